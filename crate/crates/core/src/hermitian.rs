//! Hermitian metrics on the torus, the dilaton `|Ω|_ω`, Chern curvature, and
//! recovery of `ω` from the positive `(2,2)`-form `|Ω|_ω ω²`.
//!
//! # Conventions
//!
//! `ω = i g_{jk̄} dz^j ∧ dz̄^k`, so the stored `(1,1)` coefficient is `i g_{jk̄}`.
//!
//! The four-index components of a `(2,2)`-form, in the normalization
//! `Ψ = ¼ Ψ_{sr̄jk̄} dz^s ∧ dz̄^r ∧ dz^j ∧ dz̄^k`, relate to the stored block
//! coefficients by
//!
//! ```text
//! Ψ_{sr̄jk̄} = −sgn(s,j) sgn(r,k) Ψ_{(sj),(rk)}
//! ```
//!
//! where `(sj)` is the sorted pair and `sgn(a,b) = +1` if `a < b`, `−1` if `a > b`
//! (the component vanishes when `s = j` or `r = k`).
//!
//! The hatted matrix of a `(2,2)`-form pairs each index `k` with its
//! complementary pair `k^c`:
//!
//! ```text
//! P_{kj} = ((−1)^{k+j} / 2) · Ψ_{(k^c),(j^c)}
//! ```
//!
//! With this sign table `|Ω|_ω ω²` maps to `|f| √det g · (g⁻¹)ᵀ`, which is
//! hermitian positive, and inverting it gives
//! `g = (det P / |f|²) · (P⁻¹)ᵀ`.

use alloc::vec::Vec;

use nalgebra::Matrix3;

use crate::basis::{self, complement_of};
use crate::error::{Error, Result};
use crate::field::{spectral_derivative, Direction, Field};
use crate::form::{EndForm, FormField};
use crate::lattice::Lattice;
use crate::math::{abs, sqrt, C64, I, ZERO};

pub type Mat3 = Matrix3<C64>;

/// Relative tolerance for the hermitian check on input matrices.
const HERMITIAN_TOL: f64 = 1e-10;
/// Relative tolerance for the positivity check.
pub const POSITIVITY_TOL: f64 = 1e-12;

fn hermitian_defect(m: &Mat3) -> f64 {
    (m - m.adjoint()).iter().map(|z| abs(*z)).fold(0.0, f64::max)
}

fn mat_scale(m: &Mat3) -> f64 {
    m.iter().map(|z| abs(*z)).fold(0.0, f64::max)
}

fn min_eigenvalue(m: &Mat3) -> f64 {
    m.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
}

/// Positive hermitian `g_{jk̄}` at every lattice site, with cached inverse and
/// determinant. `g[(j,k)] = g_{jk̄}`.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianMetric {
    lattice: Lattice,
    g: Vec<Mat3>,
    ginv: Vec<Mat3>,
    det: Vec<f64>,
}

impl HermitianMetric {
    pub fn new(lattice: Lattice, g: Vec<Mat3>) -> Result<HermitianMetric> {
        if g.len() != lattice.len() {
            return Err(Error::ShapeMismatch { expected: lattice.len(), found: g.len() });
        }
        let mut sym = Vec::with_capacity(g.len());
        let mut ginv = Vec::with_capacity(g.len());
        let mut det = Vec::with_capacity(g.len());
        for (site, m) in g.iter().enumerate() {
            let scale = mat_scale(m).max(f64::MIN_POSITIVE);
            let defect = hermitian_defect(m);
            if defect > HERMITIAN_TOL * scale {
                return Err(Error::NotSelfAdjoint { defect });
            }
            let h = (m + m.adjoint()) * C64::new(0.5, 0.0);
            let lambda = min_eigenvalue(&h);
            if !(lambda > POSITIVITY_TOL * scale) {
                return Err(Error::NotPositive { min_eigenvalue: lambda, site });
            }
            let inv = h.try_inverse().ok_or(Error::Singular { site })?;
            det.push(h.determinant().re);
            ginv.push((inv + inv.adjoint()) * C64::new(0.5, 0.0));
            sym.push(h);
        }
        Ok(HermitianMetric { lattice, g: sym, ginv, det })
    }

    pub fn from_fn(lattice: Lattice, mut f: impl FnMut([f64; 6]) -> Mat3) -> Result<HermitianMetric> {
        let g = (0..lattice.len()).map(|s| f(lattice.coordinates(s))).collect();
        HermitianMetric::new(lattice, g)
    }

    pub fn constant(lattice: Lattice, g: Mat3) -> Result<HermitianMetric> {
        HermitianMetric::new(lattice, alloc::vec![g; lattice.len()])
    }

    pub fn identity(lattice: Lattice) -> HermitianMetric {
        HermitianMetric::constant(lattice, Mat3::identity()).expect("identity is positive")
    }

    /// Nine components `g_{jk̄}` in row-major order.
    pub fn from_field(field: &Field) -> Result<HermitianMetric> {
        if field.ncomp() != 9 {
            return Err(Error::ShapeMismatch { expected: 9, found: field.ncomp() });
        }
        let l = *field.lattice();
        let g = (0..l.len()).map(|s| Mat3::from_fn(|j, k| field.at(3 * j + k, s))).collect();
        HermitianMetric::new(l, g)
    }

    pub fn to_field(&self) -> Field {
        Field::from_data(self.lattice, 9, {
            let n = self.lattice.len();
            let mut d = alloc::vec![ZERO; 9 * n];
            for (s, m) in self.g.iter().enumerate() {
                for j in 0..3 {
                    for k in 0..3 {
                        d[(3 * j + k) * n + s] = m[(j, k)];
                    }
                }
            }
            d
        })
        .expect("consistent shape")
    }

    /// Read `g` off a real `(1,1)`-form `ω = i g_{jk̄} dz^j ∧ dz̄^k`.
    pub fn from_kahler_form(omega: &FormField) -> Result<HermitianMetric> {
        if omega.bidegree() != (1, 1) {
            return Err(Error::WrongBidegree { p: 1, q: 1 });
        }
        let l = *omega.lattice();
        let g = (0..l.len())
            .map(|s| Mat3::from_fn(|j, k| -I * omega.field().at(3 * j + k, s)))
            .collect();
        HermitianMetric::new(l, g)
    }

    pub fn kahler_form(&self) -> FormField {
        let mut field = Field::zeros(self.lattice, 9);
        for (s, m) in self.g.iter().enumerate() {
            for j in 0..3 {
                for k in 0..3 {
                    field.set(3 * j + k, s, I * m[(j, k)]);
                }
            }
        }
        FormField::from_field(1, 1, field).expect("(1,1) shape")
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn at(&self, site: usize) -> &Mat3 {
        &self.g[site]
    }

    /// `(g⁻¹)` as a matrix; the contravariant `g^{jk̄}` is `inverse[(k,j)]`.
    pub fn inverse(&self, site: usize) -> &Mat3 {
        &self.ginv[site]
    }

    pub fn det(&self, site: usize) -> f64 {
        self.det[site]
    }

    pub fn matrices(&self) -> &[Mat3] {
        &self.g
    }

    /// `max_{x,y} |g(x) − g(y)|`, zero for a flat metric.
    pub fn variation(&self) -> f64 {
        let g0 = self.g[0];
        self.g.iter().map(|m| mat_scale(&(m - g0))).fold(0.0, f64::max)
    }

    /// Smallest eigenvalue over the lattice and the site where it occurs.
    pub fn min_eigenvalue(&self) -> (f64, usize) {
        self.g
            .iter()
            .enumerate()
            .map(|(s, m)| (min_eigenvalue(m), s))
            .fold((f64::INFINITY, 0), |a, b| if b.0 < a.0 { b } else { a })
    }

    /// `ω³/3! = det g · dV` as a density.
    pub fn volume_density(&self) -> Field {
        let mut out = Field::zeros(self.lattice, 1);
        for (s, d) in self.det.iter().enumerate() {
            out.set(0, s, C64::new(*d, 0.0));
        }
        out
    }

    pub fn scaled(&self, c: f64) -> Result<HermitianMetric> {
        HermitianMetric::new(self.lattice, self.g.iter().map(|m| m * C64::new(c, 0.0)).collect())
    }
}

/// `Ω = f dz¹ ∧ dz² ∧ dz³` with constant `f`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HolVolForm {
    pub f: C64,
}

impl HolVolForm {
    pub fn new(f: C64) -> Result<HolVolForm> {
        if f == ZERO || !f.re.is_finite() || !f.im.is_finite() {
            return Err(Error::InvalidConfig("holomorphic volume coefficient must be finite and nonzero".into()));
        }
        Ok(HolVolForm { f })
    }

    pub fn unit() -> HolVolForm {
        HolVolForm { f: C64::new(1.0, 0.0) }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.f.norm_sqr()
    }
}

impl Default for HolVolForm {
    fn default() -> Self {
        HolVolForm::unit()
    }
}

/// `|Ω|_ω = √(f f̄ / det g)` at every site.
pub fn dilaton(g: &HermitianMetric, omega: &HolVolForm) -> Result<Field> {
    let mut out = Field::zeros(g.lattice, 1);
    for s in 0..g.lattice.len() {
        let d = g.det[s];
        if !(d > 0.0) {
            return Err(Error::NotPositive { min_eigenvalue: d, site: s });
        }
        out.set(0, s, C64::new(sqrt(omega.norm_sqr() / d), 0.0));
    }
    Ok(out)
}

fn sgn(a: usize, b: usize) -> f64 {
    if a < b {
        1.0
    } else {
        -1.0
    }
}

/// Four-index component `Ψ_{sr̄jk̄}` (0-based) from the stored `(2,2)` coefficients.
pub fn four_index(coeffs: &[C64], s: usize, r: usize, j: usize, k: usize) -> C64 {
    if s == j || r == k {
        return ZERO;
    }
    let c = basis::component(2, 2, (1 << s) | (1 << j), (1 << r) | (1 << k));
    coeffs[c] * (-sgn(s, j) * sgn(r, k))
}

/// Stored `(2,2)` coefficients from a four-index array (only the sorted
/// representatives `s < j`, `r < k` are read).
pub fn from_four_index(psi: impl Fn(usize, usize, usize, usize) -> C64) -> [C64; 9] {
    let mut out = [ZERO; 9];
    for s in 0..3 {
        for j in s + 1..3 {
            for r in 0..3 {
                for k in r + 1..3 {
                    let c = basis::component(2, 2, (1 << s) | (1 << j), (1 << r) | (1 << k));
                    out[c] = -psi(s, r, j, k);
                }
            }
        }
    }
    out
}

/// Hatted matrix `P_{kj}` of a `(2,2)` coefficient vector.
pub fn hatted(coeffs: &[C64]) -> Mat3 {
    Mat3::from_fn(|k, j| {
        let c = basis::component(2, 2, complement_of(k), complement_of(j));
        let sign = if (k + j) % 2 == 0 { 0.5 } else { -0.5 };
        coeffs[c] * sign
    })
}

/// Inverse of [`hatted`].
pub fn from_hatted(p: &Mat3) -> [C64; 9] {
    let mut out = [ZERO; 9];
    for k in 0..3 {
        for j in 0..3 {
            let c = basis::component(2, 2, complement_of(k), complement_of(j));
            let sign = if (k + j) % 2 == 0 { 2.0 } else { -2.0 };
            out[c] = p[(k, j)] * sign;
        }
    }
    out
}

/// Raw contraction `g^{ab̄} Ψ_{ab̄jk̄}` at one site, as a matrix in `(j,k)`.
pub fn raw_contraction_at(ginv: &Mat3, coeffs: &[C64]) -> Mat3 {
    Mat3::from_fn(|j, k| {
        let mut acc = ZERO;
        for a in 0..3 {
            for b in 0..3 {
                let w = ginv[(b, a)];
                if w != ZERO {
                    acc += w * four_index(coeffs, a, b, j, k);
                }
            }
        }
        acc
    })
}

/// `|Ω|_ω ω²` for a metric field.
pub fn balanced_form(g: &HermitianMetric, omega: &HolVolForm) -> Result<FormField> {
    let dil = dilaton(g, omega)?;
    let w = g.kahler_form();
    let w2 = w.wedge(&w)?;
    let mut field = w2.field().clone();
    for c in 0..9 {
        for s in 0..g.lattice.len() {
            let v = field.at(c, s) * dil.at(0, s);
            field.set(c, s, v);
        }
    }
    FormField::from_field(2, 2, field)
}

/// Recover the metric `ω > 0` with `|Ω|_ω ω² = Ψ` pointwise.
pub fn sqrt_positive_22(psi: &FormField, omega: &HolVolForm) -> Result<HermitianMetric> {
    if psi.bidegree() != (2, 2) {
        return Err(Error::WrongBidegree { p: 2, q: 2 });
    }
    let scale = psi.max_abs().max(f64::MIN_POSITIVE);
    let defect = psi.reality_defect();
    if defect > HERMITIAN_TOL * scale {
        return Err(Error::NotReal { defect });
    }
    let l = *psi.lattice();
    let fsq = omega.norm_sqr();
    let mut worst = (f64::INFINITY, 0);
    let mut g = Vec::with_capacity(l.len());
    for s in 0..l.len() {
        let p = hatted(&psi.at_site(s));
        let p = (p + p.adjoint()) * C64::new(0.5, 0.0);
        let lambda = min_eigenvalue(&p);
        if lambda < worst.0 {
            worst = (lambda, s);
        }
        if !(lambda > POSITIVITY_TOL * scale) {
            continue;
        }
        let inv = p.try_inverse().ok_or(Error::Singular { site: s })?;
        let d = p.determinant().re;
        g.push(inv.transpose() * C64::new(d / fsq, 0.0));
    }
    if !(worst.0 > POSITIVITY_TOL * scale) {
        return Err(Error::NotPositive { min_eigenvalue: worst.0, site: worst.1 });
    }
    HermitianMetric::new(l, g)
}

/// Smallest eigenvalue of the hatted matrix over the lattice.
pub fn positivity_margin(psi: &FormField) -> (f64, usize) {
    let l = psi.lattice();
    (0..l.len())
        .map(|s| {
            let p = hatted(&psi.at_site(s));
            (min_eigenvalue(&((p + p.adjoint()) * C64::new(0.5, 0.0))), s)
        })
        .fold((f64::INFINITY, 0), |a, b| if b.0 < a.0 { b } else { a })
}

/// A conformally balanced metric `ω_Θ` defined by
/// `|Ω|_{ω_Θ} ω_Θ² = |Ω|_ω̂ ω̂² + Θ`.
#[derive(Clone, Debug)]
pub struct BalancedAnsatz {
    pub reference: HermitianMetric,
    pub theta: FormField,
    pub omega: HolVolForm,
    pub metric: HermitianMetric,
    /// `|Ω|_ω̂ ω̂² + Θ`.
    pub balanced: FormField,
}

/// Closedness tolerance for `Θ`, relative to its size.
pub const CLOSED_TOL: f64 = 1e-8;

pub fn metric_from_theta(
    reference: &HermitianMetric,
    theta: &FormField,
    omega: &HolVolForm,
) -> Result<BalancedAnsatz> {
    if theta.bidegree() != (2, 2) {
        return Err(Error::WrongBidegree { p: 2, q: 2 });
    }
    let defect = theta.closedness_defect();
    if defect > CLOSED_TOL * theta.max_abs().max(1.0) {
        return Err(Error::NotClosed { defect });
    }
    let balanced = balanced_form(reference, omega)?.add(theta)?;
    let metric = sqrt_positive_22(&balanced, omega)?;
    Ok(BalancedAnsatz { reference: reference.clone(), theta: theta.clone(), omega: *omega, metric, balanced })
}

/// `(∂_j H) H⁻¹` as a matrix-valued `(1,0)`-form for any matrix field `H`
/// stored row-major with `rank²` components.
pub(crate) fn connection_form(h: &Field, rank: usize, hinv: &[nalgebra::DMatrix<C64>]) -> Result<EndForm> {
    let l = *h.lattice();
    let mut theta = EndForm::zeros(l, 1, 0, rank)?;
    for j in 0..3 {
        let dh = spectral_derivative(h, Direction::Holomorphic(j + 1))?;
        for s in 0..l.len() {
            let m = nalgebra::DMatrix::from_fn(rank, rank, |a, b| dh.at(a * rank + b, s));
            theta.set_matrix(j, s, &(m * &hinv[s]));
        }
    }
    Ok(theta)
}

/// Chern curvature `R = ∂̄((∂g) g⁻¹)` of the tangent bundle, as an
/// endomorphism-valued `(1,1)`-form with `R_{jk̄} = −∂_k̄((∂_j g) g⁻¹)`.
pub fn chern_curvature(g: &HermitianMetric) -> Result<EndForm> {
    let l = g.lattice;
    if g.variation() == 0.0 {
        return EndForm::zeros(l, 1, 1, 3);
    }
    let hinv: Vec<_> = g.ginv.iter().map(|m| nalgebra::DMatrix::from_fn(3, 3, |a, b| m[(a, b)])).collect();
    connection_form(&g.to_field(), 3, &hinv)?.dbar()
}

/// Pointwise `g^{jk̄}` contraction of an endomorphism-valued `(1,1)`-form:
/// `Σ g^{jk̄} F_{jk̄}`.
pub(crate) fn trace_contract(g: &HermitianMetric, f: &EndForm) -> Vec<nalgebra::DMatrix<C64>> {
    let r = f.rank();
    (0..g.lattice.len())
        .map(|s| {
            let ginv = &g.ginv[s];
            let mut acc = nalgebra::DMatrix::from_element(r, r, ZERO);
            for j in 0..3 {
                for k in 0..3 {
                    let w = ginv[(k, j)];
                    if w != ZERO {
                        acc += f.matrix(basis::component(1, 1, 1 << j, 1 << k), s) * w;
                    }
                }
            }
            acc
        })
        .collect()
}
