//! The trivial rank-`r` bundle with reference metric `Ĥ = I`: endomorphism
//! fields, metrics `H = e^u`, Chern curvature, `iΛ_ω F`, and the gauge-fixed
//! deformation space.

use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::field::{spectral_derivative, Direction, Field};
use crate::form::{EndForm, VOLUME_ELEMENT_FACTOR};
use crate::hermitian::{connection_form, trace_contract, HermitianMetric};
use crate::lattice::Lattice;
use crate::math::{abs, exp, expm1, C64, ONE, ZERO};

pub type MatN = DMatrix<C64>;

/// Relative tolerance for self-adjointness checks.
pub const ADJOINT_TOL: f64 = 1e-9;

fn check_rank(rank: usize) -> Result<()> {
    if (1..=4).contains(&rank) {
        Ok(())
    } else {
        Err(Error::InvalidRank(rank))
    }
}

fn max_entry(m: &MatN) -> f64 {
    m.iter().map(|z| abs(*z)).fold(0.0, f64::max)
}

/// `V, λ` with `m = V diag(λ) V†` for a hermitian matrix.
fn eigen(m: &MatN) -> (MatN, Vec<f64>) {
    let h = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let e = h.symmetric_eigen();
    (e.eigenvectors, e.eigenvalues.iter().copied().collect())
}

fn spectral_fn(v: &MatN, lambda: &[f64], f: impl Fn(f64) -> f64) -> MatN {
    let d = MatN::from_diagonal(&nalgebra::DVector::from_iterator(lambda.len(), lambda.iter().map(|&l| C64::new(f(l), 0.0))));
    v * d * v.adjoint()
}

/// `exp(t·m)` for hermitian `m`.
pub fn hermitian_exp(m: &MatN, t: f64) -> MatN {
    let (v, l) = eigen(m);
    spectral_fn(&v, &l, |x| exp(t * x))
}

/// Hermitian square root of a positive matrix.
pub fn hermitian_sqrt(m: &MatN) -> MatN {
    let (v, l) = eigen(m);
    spectral_fn(&v, &l, |x| crate::math::sqrt(x.max(0.0)))
}

/// Inverse hermitian square root of a positive matrix.
pub fn hermitian_inv_sqrt(m: &MatN) -> MatN {
    let (v, l) = eigen(m);
    spectral_fn(&v, &l, |x| 1.0 / crate::math::sqrt(x))
}

/// Fréchet derivative of `exp` at hermitian `u = V diag(λ) V†` in the
/// direction `x`: `V (Φ ∘ (V† x V)) V†` with divided differences `Φ`.
fn exp_derivative(v: &MatN, lambda: &[f64], x: &MatN) -> MatN {
    let y = v.adjoint() * x * v;
    let r = lambda.len();
    let phi = MatN::from_fn(r, r, |a, b| {
        let (la, lb) = (lambda[a], lambda[b]);
        let d = la - lb;
        let w = if d == 0.0 { exp(la) } else { exp(lb) * expm1(d) / d };
        y[(a, b)] * w
    });
    v * phi * v.adjoint()
}

/// An `r × r` endomorphism field, row-major `r²` components.
#[derive(Clone, Debug, PartialEq)]
pub struct EndField {
    rank: usize,
    field: Field,
}

impl EndField {
    pub fn zeros(lattice: Lattice, rank: usize) -> Result<EndField> {
        check_rank(rank)?;
        Ok(EndField { rank, field: Field::zeros(lattice, rank * rank) })
    }

    pub fn from_field(rank: usize, field: Field) -> Result<EndField> {
        check_rank(rank)?;
        if field.ncomp() != rank * rank {
            return Err(Error::ShapeMismatch { expected: rank * rank, found: field.ncomp() });
        }
        Ok(EndField { rank, field })
    }

    pub fn from_matrices(lattice: Lattice, rank: usize, m: &[MatN]) -> Result<EndField> {
        let mut out = EndField::zeros(lattice, rank)?;
        if m.len() != lattice.len() {
            return Err(Error::ShapeMismatch { expected: lattice.len(), found: m.len() });
        }
        for (s, x) in m.iter().enumerate() {
            out.set_matrix(s, x);
        }
        Ok(out)
    }

    /// Scalar profile times a constant matrix.
    pub fn from_profile(lattice: Lattice, m: &MatN, f: impl Fn([f64; 6]) -> f64) -> Result<EndField> {
        let rank = m.nrows();
        check_rank(rank)?;
        let field = Field::from_fn(lattice, rank * rank, |c, x| m[(c / rank, c % rank)] * f(x));
        Ok(EndField { rank, field })
    }

    pub fn identity(lattice: Lattice, rank: usize) -> Result<EndField> {
        EndField::from_profile(lattice, &MatN::identity(rank, rank), |_| 1.0)
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn lattice(&self) -> &Lattice {
        self.field.lattice()
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn into_field(self) -> Field {
        self.field
    }

    pub fn matrix(&self, site: usize) -> MatN {
        let r = self.rank;
        MatN::from_fn(r, r, |a, b| self.field.at(a * r + b, site))
    }

    pub fn matrices(&self) -> Vec<MatN> {
        (0..self.lattice().len()).map(|s| self.matrix(s)).collect()
    }

    pub fn set_matrix(&mut self, site: usize, m: &MatN) {
        let r = self.rank;
        for a in 0..r {
            for b in 0..r {
                self.field.set(a * r + b, site, m[(a, b)]);
            }
        }
    }

    pub fn map(&self, f: impl Fn(&MatN) -> MatN) -> EndField {
        let mut out = self.clone();
        for s in 0..self.lattice().len() {
            out.set_matrix(s, &f(&self.matrix(s)));
        }
        out
    }

    pub fn add(&self, other: &EndField) -> Result<EndField> {
        self.field.check_same(&other.field)?;
        Ok(EndField { rank: self.rank, field: self.field.add(&other.field) })
    }

    pub fn sub(&self, other: &EndField) -> Result<EndField> {
        self.field.check_same(&other.field)?;
        Ok(EndField { rank: self.rank, field: self.field.sub(&other.field) })
    }

    pub fn axpy(&self, a: f64, other: &EndField) -> Result<EndField> {
        self.field.check_same(&other.field)?;
        Ok(EndField { rank: self.rank, field: self.field.axpy(C64::new(a, 0.0), &other.field) })
    }

    pub fn scale(&self, a: f64) -> EndField {
        EndField { rank: self.rank, field: self.field.scale_real(a) }
    }

    pub fn max_abs(&self) -> f64 {
        self.field.max_abs()
    }

    /// `max |u − u†|` (adjoint with respect to `Ĥ = I`).
    pub fn hermitian_defect(&self) -> f64 {
        (0..self.lattice().len())
            .map(|s| {
                let m = self.matrix(s);
                max_entry(&(&m - m.adjoint()))
            })
            .fold(0.0, f64::max)
    }

    /// Pointwise trace.
    pub fn trace(&self) -> Field {
        let l = *self.lattice();
        let mut out = Field::zeros(l, 1);
        for s in 0..l.len() {
            out.set(0, s, (0..self.rank).map(|a| self.field.at(a * self.rank + a, s)).sum());
        }
        out
    }

    pub fn spectral_derivative(&self, direction: Direction) -> Result<EndField> {
        Ok(EndField { rank: self.rank, field: spectral_derivative(&self.field, direction)? })
    }
}

/// `(u, v) = ∫ Tr(u v†) w` for an endomorphism pair and a `dV`-density weight.
pub fn end_inner(u: &EndField, v: &EndField, weight: &Field) -> Result<C64> {
    u.field.check_same(&v.field)?;
    Ok(trace_pairing(&u.field, &v.field, weight, u.rank))
}

fn trace_pairing(a: &Field, b: &Field, weight: &Field, rank: usize) -> C64 {
    let l = *a.lattice();
    let mut acc = ZERO;
    for s in 0..l.len() {
        let mut t = ZERO;
        for c in 0..rank * rank {
            t += a.at(c, s) * b.at(c, s).conj();
        }
        acc += t * weight.at(0, s);
    }
    acc * (l.cell_volume() * VOLUME_ELEMENT_FACTOR)
}

/// The gauge-fixed deformation space: hermitian part, pointwise trace
/// removed, constant and Nyquist Fourier content removed.
pub fn project_h0(u: &EndField) -> EndField {
    let r = u.rank;
    let herm = u.map(|m| {
        let mut h = (m + m.adjoint()) * C64::new(0.5, 0.0);
        let tr = h.trace() / C64::new(r as f64, 0.0);
        for a in 0..r {
            h[(a, a)] -= tr;
        }
        h
    });
    EndField { rank: r, field: herm.field.resolved_nonconstant() }
}

/// A positive hermitian metric `H` on the trivial bundle. When built from
/// [`exp_metric`] the logarithm `u` is retained, and derivatives of `H` are
/// taken through the exact derivative of the matrix exponential.
#[derive(Clone, Debug)]
pub struct BundleMetric {
    lattice: Lattice,
    rank: usize,
    h: Vec<MatN>,
    hinv: Vec<MatN>,
    log: Option<EndField>,
}

impl BundleMetric {
    pub fn new(lattice: Lattice, h: Vec<MatN>) -> Result<BundleMetric> {
        let rank = h.first().map(|m| m.nrows()).unwrap_or(1);
        check_rank(rank)?;
        if h.len() != lattice.len() {
            return Err(Error::ShapeMismatch { expected: lattice.len(), found: h.len() });
        }
        let mut hinv = Vec::with_capacity(h.len());
        for (site, m) in h.iter().enumerate() {
            let scale = max_entry(m).max(f64::MIN_POSITIVE);
            let defect = max_entry(&(m - m.adjoint()));
            if defect > ADJOINT_TOL * scale {
                return Err(Error::NotSelfAdjoint { defect });
            }
            let (_, l) = eigen(m);
            let min = l.iter().copied().fold(f64::INFINITY, f64::min);
            if !(min > 0.0) {
                return Err(Error::NotPositive { min_eigenvalue: min, site });
            }
            hinv.push(m.clone().try_inverse().ok_or(Error::Singular { site })?);
        }
        Ok(BundleMetric { lattice, rank, h, hinv, log: None })
    }

    pub fn identity(lattice: Lattice, rank: usize) -> Result<BundleMetric> {
        check_rank(rank)?;
        BundleMetric::new(lattice, alloc::vec![MatN::identity(rank, rank); lattice.len()])
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn at(&self, site: usize) -> &MatN {
        &self.h[site]
    }

    pub fn inverse(&self, site: usize) -> &MatN {
        &self.hinv[site]
    }

    /// `log H` when the metric was built by [`exp_metric`].
    pub fn log(&self) -> Option<&EndField> {
        self.log.as_ref()
    }

    pub fn to_field(&self) -> Field {
        let r = self.rank;
        let mut out = Field::zeros(self.lattice, r * r);
        for (s, m) in self.h.iter().enumerate() {
            for a in 0..r {
                for b in 0..r {
                    out.set(a * r + b, s, m[(a, b)]);
                }
            }
        }
        out
    }
}

/// `H = e^u Ĥ` with `Ĥ = I`.
pub fn exp_metric(u: &EndField) -> Result<BundleMetric> {
    let scale = u.max_abs().max(1.0);
    let defect = u.hermitian_defect();
    if defect > ADJOINT_TOL * scale {
        return Err(Error::NotSelfAdjoint { defect });
    }
    let h: Vec<MatN> = u.matrices().iter().map(|m| hermitian_exp(m, 1.0)).collect();
    let mut metric = BundleMetric::new(*u.lattice(), h)?;
    metric.log = Some(u.clone());
    Ok(metric)
}

/// Chern curvature `F = ∂̄((∂H) H⁻¹)`, with `F_{jk̄} = −∂_k̄((∂_j H) H⁻¹)`.
pub fn bundle_curvature(h: &BundleMetric) -> Result<EndForm> {
    let l = h.lattice;
    let r = h.rank;
    let theta = match &h.log {
        None => connection_form(&h.to_field(), r, &h.hinv)?,
        Some(u) => {
            let mut theta = EndForm::zeros(l, 1, 0, r)?;
            let eig: Vec<(MatN, Vec<f64>)> = u.matrices().iter().map(eigen).collect();
            for j in 0..3 {
                let du = u.spectral_derivative(Direction::Holomorphic(j + 1))?;
                for (s, (v, lambda)) in eig.iter().enumerate() {
                    let dh = exp_derivative(v, lambda, &du.matrix(s));
                    theta.set_matrix(j, s, &(dh * &h.hinv[s]));
                }
            }
            theta
        }
    };
    theta.dbar()
}

/// The Chern curvature of `H = e^u` expressed in the unitary frame `σ = e^{u/2}`:
/// with `a_j = (∂_j σ) σ⁻¹` and `b_k = −a_k†`,
/// `F̃_{jk̄} = −∂_k̄ a_j + ∂_j b_k − a_j b_k + b_k a_j`,
/// which equals `e^{−u/2} F_{jk̄} e^{u/2}`. The frame keeps
/// `F̃_{jk̄}† = −F̃_{kj̄}` exact on the lattice.
pub fn unitary_frame_curvature(u: &EndField) -> Result<EndForm> {
    let l = *u.lattice();
    let r = u.rank;
    let half = u.scale(0.5);
    let eig: Vec<(MatN, Vec<f64>)> = half.matrices().iter().map(eigen).collect();
    let sigma_inv: Vec<MatN> = eig.iter().map(|(v, lam)| spectral_fn(v, lam, |x| exp(-x))).collect();
    let mut a = EndForm::zeros(l, 1, 0, r)?;
    let mut b = EndForm::zeros(l, 0, 1, r)?;
    for j in 0..3 {
        let du = half.spectral_derivative(Direction::Holomorphic(j + 1))?;
        for (s, (v, lambda)) in eig.iter().enumerate() {
            let aj = exp_derivative(v, lambda, &du.matrix(s)) * &sigma_inv[s];
            b.set_matrix(j, s, &(-aj.adjoint()));
            a.set_matrix(j, s, &aj);
        }
    }
    let da = a.dbar()?;
    let db = b.del()?;
    let mut out = da.add(&db)?;
    for s in 0..l.len() {
        for j in 0..3 {
            for k in 0..3 {
                let c = crate::basis::component(1, 1, 1 << j, 1 << k);
                let aj = a.matrix(j, s);
                let bk = b.matrix(k, s);
                let m = out.matrix(c, s) - &aj * &bk + &bk * &aj;
                out.set_matrix(c, s, &m);
            }
        }
    }
    Ok(out)
}

/// `iΛ_ω F = g^{jk̄} F_{jk̄}`.
pub fn lambda_f(g: &HermitianMetric, f: &EndForm) -> Result<EndField> {
    if g.lattice() != f.lattice() {
        return Err(Error::LatticeMismatch);
    }
    EndField::from_matrices(*g.lattice(), f.rank(), &trace_contract(g, f))
}

/// `iΛ_ω F_H` computed from the metrics.
pub fn lambda_f_of(g: &HermitianMetric, h: &BundleMetric) -> Result<EndField> {
    lambda_f(g, &bundle_curvature(h)?)
}

/// `e^{−u/2} A e^{u/2}`, which is `Ĥ`-self-adjoint whenever `A` is
/// self-adjoint for `e^u Ĥ` (that is, `A e^u` is hermitian).
pub fn conjugate_to_reference(u: &EndField, a: &EndField) -> Result<EndField> {
    u.field.check_same(&a.field)?;
    let scale = a.max_abs().max(f64::MIN_POSITIVE);
    let mut out = a.clone();
    for s in 0..u.lattice().len() {
        let (v, lambda) = eigen(&u.matrix(s));
        let half = spectral_fn(&v, &lambda, |x| exp(0.5 * x));
        let minus_half = spectral_fn(&v, &lambda, |x| exp(-0.5 * x));
        let am = a.matrix(s);
        let ah = &am * &half * &half;
        let defect = max_entry(&(&ah - ah.adjoint()));
        if defect > ADJOINT_TOL * scale.max(max_entry(&ah)) {
            return Err(Error::NotSelfAdjoint { defect });
        }
        out.set_matrix(s, &(minus_half * am * half));
    }
    Ok(out)
}

/// An endomorphism-valued top form `s = h ⊗ dV`, stored as the density `h`.
#[derive(Clone, Debug, PartialEq)]
pub struct EndSixForm {
    density: EndField,
}

impl EndSixForm {
    pub fn from_density(density: EndField) -> EndSixForm {
        EndSixForm { density }
    }

    /// `h ⊗ T` for a scalar top form density `t`.
    pub fn tensor(h: &EndField, t: &Field) -> Result<EndSixForm> {
        h.field.check_same(&Field::zeros(*t.lattice(), h.rank * h.rank))?;
        let mut out = h.clone();
        for c in 0..h.rank * h.rank {
            for s in 0..t.sites() {
                out.field.set(c, s, h.field.at(c, s) * t.at(0, s));
            }
        }
        Ok(EndSixForm { density: out })
    }

    pub fn zeros(lattice: Lattice, rank: usize) -> Result<EndSixForm> {
        Ok(EndSixForm { density: EndField::zeros(lattice, rank)? })
    }

    pub fn density(&self) -> &EndField {
        &self.density
    }

    pub fn into_density(self) -> EndField {
        self.density
    }

    pub fn lattice(&self) -> &Lattice {
        self.density.lattice()
    }

    pub fn rank(&self) -> usize {
        self.density.rank
    }

    pub fn add(&self, other: &EndSixForm) -> Result<EndSixForm> {
        Ok(EndSixForm { density: self.density.add(&other.density)? })
    }

    pub fn sub(&self, other: &EndSixForm) -> Result<EndSixForm> {
        Ok(EndSixForm { density: self.density.sub(&other.density)? })
    }

    pub fn scale(&self, a: f64) -> EndSixForm {
        EndSixForm { density: self.density.scale(a) }
    }

    pub fn max_abs(&self) -> f64 {
        self.density.max_abs()
    }

    pub fn hermitian_defect(&self) -> f64 {
        self.density.hermitian_defect()
    }

    /// `∫_X Tr s`.
    pub fn trace_integral(&self) -> C64 {
        let l = self.lattice();
        let sum: C64 = self.density.trace().component(0).iter().sum();
        sum * (l.cell_volume() * VOLUME_ELEMENT_FACTOR)
    }

    /// `∫ Tr(s h†)`: the pairing of a top form with an endomorphism field.
    pub fn pair(&self, h: &EndField) -> Result<C64> {
        let one = Field::from_fn(*self.lattice(), 1, |_, _| ONE);
        end_inner(&self.density, h, &one)
    }
}

