//! Linearization of the system at the flat base point: the blocks `L1`, `A`,
//! `L2`, the variation of the square-root metric, and exact per-mode solves.

use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::bundle::{end_inner, project_h0, EndField, EndSixForm};
use crate::error::{Error, Result};
use crate::field::{Direction, Field};
use crate::flat::FlatKahler;
use crate::form::{contract_lambda, i_del_dbar, raw_contraction, EndForm, FormField, TopForm};
use crate::hermitian::{dilaton, HermitianMetric, HolVolForm};
use crate::lattice::{Lattice, Mode};
use crate::math::{sqrt, C64, I, ZERO};

/// Relative tolerance for domain and range checks.
pub const RANGE_TOL: f64 = 1e-9;

/// A constant test curvature `iF̂ = Σ φ_c ⊗ T_c` with `φ_c` real primitive
/// constant `(1,1)`-forms and `T_c` hermitian traceless. Used only to exercise
/// the off-diagonal block; the flat testbed itself has `F̂ = 0`.
#[derive(Clone, Debug)]
pub struct SyntheticCurvature {
    i_f: EndForm,
}

impl SyntheticCurvature {
    /// `terms` pairs raw `(1,1)` coefficient vectors with matrices; each form is
    /// made real and primitive with respect to `flat` before use.
    pub fn new(flat: &FlatKahler, terms: &[(Vec<C64>, DMatrix<C64>)]) -> Result<SyntheticCurvature> {
        let l = *flat.lattice();
        let omega = FormField::constant(l, 1, 1, &flat.kahler_coeffs())?;
        let lambda_omega = flat.lambda(&omega)?.field().at(0, 0);
        let mut cleaned = Vec::with_capacity(terms.len());
        for (phi, t) in terms {
            let f = FormField::constant(l, 1, 1, phi)?.real_part();
            let trace = flat.lambda(&f)?.field().at(0, 0) / lambda_omega;
            let f0 = f.axpy(-trace, &omega)?;
            let herm = (t + t.adjoint()) * C64::new(0.5, 0.0);
            let tr = herm.trace() / C64::new(t.nrows() as f64, 0.0);
            let herm = herm - DMatrix::identity(t.nrows(), t.nrows()) * tr;
            cleaned.push((f0.at_site(0), herm));
        }
        Ok(SyntheticCurvature { i_f: EndForm::constant(l, 1, 1, &cleaned)? })
    }

    pub fn i_f(&self) -> &EndForm {
        &self.i_f
    }
}

/// Background data of the linearization: flat `ω̂`, `Ĥ = I` of rank `r`, and
/// optionally a synthetic curvature.
#[derive(Clone, Debug)]
pub struct Background {
    flat: FlatKahler,
    rank: usize,
    curvature: Option<SyntheticCurvature>,
}

impl Background {
    pub fn new(flat: FlatKahler, rank: usize) -> Result<Background> {
        if !(1..=4).contains(&rank) {
            return Err(Error::InvalidRank(rank));
        }
        Ok(Background { flat, rank, curvature: None })
    }

    pub fn with_curvature(mut self, curvature: SyntheticCurvature) -> Background {
        self.curvature = Some(curvature);
        self
    }

    pub fn flat(&self) -> &FlatKahler {
        &self.flat
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn lattice(&self) -> &Lattice {
        self.flat.lattice()
    }

    pub fn curvature(&self) -> Option<&SyntheticCurvature> {
        self.curvature.as_ref()
    }

    /// Density of `|Ω|_ω̂ ω̂³/3!` against `dV`.
    pub fn weight_density(&self) -> f64 {
        self.flat.dilaton() * self.flat.det()
    }

    pub fn weight(&self) -> TopForm {
        self.flat.weight()
    }

    /// Fourier symbol of `L1` (per unit density weight): `ĝ^{jk̄} a_j ā_k`.
    pub fn l1_symbol(&self, mode: &Mode) -> f64 {
        self.flat.laplacian_symbol(mode)
    }

    /// Eigenvalue of `L2` on a mode: `−σ(k)/(2|Ω|_ω̂)`.
    pub fn l2_symbol(&self, mode: &Mode) -> f64 {
        -self.flat.laplacian_symbol(mode) / (2.0 * self.flat.dilaton())
    }
}

fn domain_defect(h: &EndField) -> f64 {
    project_h0(h).sub(h).map(|d| d.max_abs()).unwrap_or(f64::INFINITY)
}

/// `L1 h = −ĝ^{jk̄} ∂_k̄ ∂_j h ⊗ |Ω|_ω̂ ω̂³/3!`.
pub fn apply_l1(bg: &Background, h: &EndField) -> Result<EndSixForm> {
    let defect = domain_defect(h);
    if defect > RANGE_TOL * h.max_abs().max(1.0) {
        return Err(Error::OutOfRange { defect });
    }
    Ok(apply_l1_unchecked(bg, h))
}

pub(crate) fn apply_l1_unchecked(bg: &Background, h: &EndField) -> EndSixForm {
    let w = bg.weight_density();
    let f = h.field().apply_symbol(|m| C64::new(bg.l1_symbol(m) * w, 0.0));
    EndSixForm::from_density(EndField::from_field(h.rank(), f).expect("same rank"))
}

/// `A(Θ̇) = Λ_ω̂Θ̇ ∧ ω̂ ∧ iF̂`; zero unless a synthetic curvature is installed.
pub fn apply_a(bg: &Background, theta_dot: &FormField) -> Result<EndSixForm> {
    let l = *bg.lattice();
    let Some(curv) = &bg.curvature else {
        return EndSixForm::zeros(l, bg.rank);
    };
    let lam = contract_lambda(bg.flat.metric(), theta_dot)?;
    let omega = FormField::constant(l, 1, 1, &bg.flat.kahler_coeffs())?;
    let top = EndForm::wedge_scalar_left(&lam.wedge(&omega)?, curv.i_f())?;
    // (3,3) monomial coefficient c ↦ density −i c
    let density = top.field().scale(-I);
    Ok(EndSixForm::from_density(EndField::from_field(top.rank(), density)?))
}

/// `L2 Θ̇ = −(1/(2|Ω|_ω̂)) Δ_ω̂ Θ̇`.
pub fn apply_l2(bg: &Background, theta_dot: &FormField) -> Result<FormField> {
    check_no_constant_mode(theta_dot)?;
    Ok(apply_l2_unchecked(bg, theta_dot))
}

pub(crate) fn apply_l2_unchecked(bg: &Background, theta_dot: &FormField) -> FormField {
    bg.flat.hodge_laplacian(theta_dot).scale_real(-1.0 / (2.0 * bg.flat.dilaton()))
}

fn check_no_constant_mode(psi: &FormField) -> Result<()> {
    let size = psi.field().means().iter().map(|m| m.norm()).fold(0.0, f64::max);
    if size > RANGE_TOL * psi.max_abs().max(1.0) {
        return Err(Error::ConstantMode { size });
    }
    Ok(())
}

/// First variation `δg_{jk̄} = −(1/(2|Ω|_ω)) g^{sr̄} δΘ_{sr̄jk̄}` of the metric
/// extracted from `|Ω|_ω ω² = Θ`, as nine row-major components.
pub fn variation_metric(g: &HermitianMetric, delta_theta: &FormField, omega: &HolVolForm) -> Result<Field> {
    let raw = raw_contraction(g, delta_theta)?;
    let dil = dilaton(g, omega)?;
    let mut out = raw;
    for c in 0..9 {
        for s in 0..dil.sites() {
            let v = out.at(c, s) / (dil.at(0, s) * -2.0);
            out.set(c, s, v);
        }
    }
    Ok(out)
}

/// Both evaluations of `i∂∂̄ δω` at the flat point.
#[derive(Clone, Debug)]
pub struct RouteComparison {
    /// `i∂∂̄[(1/(2|Ω|_ω̂)) Λ_ω̂ δΘ]`.
    pub direct: FormField,
    /// `−(1/(2|Ω|_ω̂)) Δ δΘ`.
    pub identity: FormField,
    pub mismatch: f64,
}

/// Tolerance for agreement of the two routes, relative to `max |δΘ|`.
pub const ROUTE_TOL: f64 = 1e-9;

pub fn variation_ddbar_omega(bg: &Background, delta_theta: &FormField) -> Result<RouteComparison> {
    let half = 1.0 / (2.0 * bg.flat.dilaton());
    let lam = contract_lambda(bg.flat.metric(), delta_theta)?.scale_real(half);
    let direct = i_del_dbar(&lam.real_part())?;
    let identity = bg.flat.hodge_laplacian(delta_theta).scale_real(-half);
    let mismatch = direct.sub(&identity)?.max_abs();
    if mismatch > ROUTE_TOL * delta_theta.max_abs().max(1.0) {
        return Err(Error::RouteMismatch { mismatch });
    }
    Ok(RouteComparison { direct, identity, mismatch })
}

/// The gauge-fixed part of a top-form density: hermitian, traceless, without
/// constant or Nyquist content.
pub fn project_range_l1(rhs: &EndSixForm) -> EndSixForm {
    EndSixForm::from_density(project_h0(rhs.density()))
}

/// Solve `L1 h = rhs` on the gauge-fixed space; `rhs` must lie in the range.
pub fn solve_l1(bg: &Background, rhs: &EndSixForm) -> Result<EndField> {
    let p = project_range_l1(rhs);
    let defect = p.sub(rhs)?.max_abs();
    if defect > RANGE_TOL * rhs.max_abs().max(f64::MIN_POSITIVE) && defect > 1e-300 {
        return Err(Error::OutOfRange { defect });
    }
    Ok(solve_l1_projected(bg, &p))
}

/// `L1⁻¹` composed with the projection onto its range.
pub fn solve_l1_projected(bg: &Background, rhs: &EndSixForm) -> EndField {
    let w = bg.weight_density();
    let p = project_range_l1(rhs);
    let f = p.density().field().apply_symbol(|m| {
        if m.is_resolved_nonzero() {
            C64::new(1.0 / (bg.l1_symbol(m) * w), 0.0)
        } else {
            ZERO
        }
    });
    EndField::from_field(rhs.rank(), f).expect("same rank")
}

/// Solve `L2 Θ̇ = rhs`; `rhs` must carry no constant or Nyquist content.
pub fn solve_l2(bg: &Background, rhs: &FormField) -> Result<FormField> {
    check_no_constant_mode(rhs)?;
    let p = rhs.resolved_nonconstant();
    let defect = p.sub(rhs)?.max_abs();
    if defect > RANGE_TOL * rhs.max_abs().max(f64::MIN_POSITIVE) && defect > 1e-300 {
        return Err(Error::OutOfRange { defect });
    }
    Ok(solve_l2_projected(bg, &p))
}

pub fn solve_l2_projected(bg: &Background, rhs: &FormField) -> FormField {
    rhs.map_symbol(|m| if m.is_resolved_nonzero() { C64::new(1.0 / bg.l2_symbol(m), 0.0) } else { ZERO })
}

/// `β = −G Λ_ω̂ Θ` with `G = Δ⁻¹` on nonconstant modes, so that `i∂∂̄β = Θ` for
/// closed `Θ` without constant modes. The result is real and mean-zero.
pub fn beta_from_theta(bg: &Background, theta: &FormField) -> Result<FormField> {
    let lam = contract_lambda(bg.flat.metric(), theta)?;
    Ok(bg.flat.inverse_laplacian(&lam).scale_real(-1.0).real_part())
}

/// An element `(u, Θ)` of the deformation space or its tangent space.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockVector {
    pub u: EndField,
    pub theta: FormField,
}

/// An element of the target space.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockTarget {
    pub hym: EndSixForm,
    pub anomaly: FormField,
}

impl BlockVector {
    pub fn zeros(bg: &Background) -> BlockVector {
        BlockVector {
            u: EndField::zeros(*bg.lattice(), bg.rank).expect("rank checked"),
            theta: FormField::zeros(*bg.lattice(), 2, 2).expect("(2,2)"),
        }
    }

    pub fn add(&self, o: &BlockVector) -> Result<BlockVector> {
        Ok(BlockVector { u: self.u.add(&o.u)?, theta: self.theta.add(&o.theta)? })
    }

    pub fn sub(&self, o: &BlockVector) -> Result<BlockVector> {
        Ok(BlockVector { u: self.u.sub(&o.u)?, theta: self.theta.sub(&o.theta)? })
    }

    pub fn axpy(&self, a: f64, o: &BlockVector) -> Result<BlockVector> {
        Ok(BlockVector { u: self.u.axpy(a, &o.u)?, theta: self.theta.axpy(C64::new(a, 0.0), &o.theta)? })
    }

    pub fn scale(&self, a: f64) -> BlockVector {
        BlockVector { u: self.u.scale(a), theta: self.theta.scale_real(a) }
    }

    pub fn max_abs(&self) -> f64 {
        self.u.max_abs().max(self.theta.max_abs())
    }

    /// Real part of the weighted `L²` pairing of both components.
    pub fn dot(&self, o: &BlockVector, bg: &Background) -> f64 {
        let w = Field::from_fn(*bg.lattice(), 1, |_, _| C64::new(bg.weight_density(), 0.0));
        let a = end_inner(&self.u, &o.u, &w).map(|z| z.re).unwrap_or(0.0);
        let b = crate::flat::l2_inner(&self.theta, &o.theta, bg.flat.metric(), &bg.weight())
            .map(|z| z.re)
            .unwrap_or(0.0);
        a + b
    }

    pub fn norm(&self, bg: &Background) -> f64 {
        sqrt(self.dot(self, bg).max(0.0))
    }
}

impl BlockTarget {
    pub fn zeros(bg: &Background) -> BlockTarget {
        BlockTarget {
            hym: EndSixForm::zeros(*bg.lattice(), bg.rank).expect("rank checked"),
            anomaly: FormField::zeros(*bg.lattice(), 2, 2).expect("(2,2)"),
        }
    }

    pub fn sub(&self, o: &BlockTarget) -> Result<BlockTarget> {
        Ok(BlockTarget { hym: self.hym.sub(&o.hym)?, anomaly: self.anomaly.sub(&o.anomaly)? })
    }

    pub fn add(&self, o: &BlockTarget) -> Result<BlockTarget> {
        Ok(BlockTarget { hym: self.hym.add(&o.hym)?, anomaly: self.anomaly.add(&o.anomaly)? })
    }

    pub fn scale(&self, a: f64) -> BlockTarget {
        BlockTarget { hym: self.hym.scale(a), anomaly: self.anomaly.scale_real(a) }
    }

    pub fn max_abs(&self) -> f64 {
        self.hym.max_abs().max(self.anomaly.max_abs())
    }

    /// Weighted `L²` norm: the first component is read as `h ⊗ |Ω|_ω̂ ω̂³/3!`.
    pub fn norm(&self, bg: &Background) -> f64 {
        let (a, b) = self.component_norms(bg);
        sqrt(a * a + b * b)
    }

    pub fn component_norms(&self, bg: &Background) -> (f64, f64) {
        let w = bg.weight_density();
        let inv = Field::from_fn(*bg.lattice(), 1, |_, _| C64::new(1.0 / w, 0.0));
        let a = end_inner(self.hym.density(), self.hym.density(), &inv).map(|z| z.re).unwrap_or(0.0);
        let b = crate::flat::l2_inner(&self.anomaly, &self.anomaly, bg.flat.metric(), &bg.weight())
            .map(|z| z.re)
            .unwrap_or(0.0);
        (sqrt(a.max(0.0)), sqrt(b.max(0.0)))
    }
}

/// The block operator `[[L1, A], [0, L2]]`.
pub fn apply_block(bg: &Background, x: &BlockVector) -> Result<BlockTarget> {
    let hym = apply_l1(bg, &x.u)?.add(&apply_a(bg, &x.theta)?)?;
    Ok(BlockTarget { hym, anomaly: apply_l2(bg, &x.theta)? })
}

/// `[[L1⁻¹, −L1⁻¹ A L2⁻¹], [0, L2⁻¹]]`.
pub fn apply_block_inverse(bg: &Background, r: &BlockTarget) -> Result<BlockVector> {
    let theta = solve_l2(bg, &r.anomaly)?;
    let coupling = apply_a(bg, &theta)?;
    let u = solve_l1(bg, &r.hym)?.sub(&solve_l1(bg, &coupling)?)?;
    Ok(BlockVector { u, theta })
}

/// The block inverse composed with the projections onto the range of each block.
pub fn apply_block_inverse_projected(bg: &Background, r: &BlockTarget) -> BlockVector {
    let theta = solve_l2_projected(bg, &r.anomaly);
    let coupling = apply_a(bg, &theta).expect("A defined on (2,2)");
    let u = solve_l1_projected(bg, &r.hym.sub(&coupling).expect("same shape"));
    BlockVector { u, theta }
}

/// `(l2(L1 h, h), ½∫(|∂h|² + |∂̄h|²)|Ω|_ω̂ ω̂³/3!)`.
pub fn bochner(bg: &Background, h: &EndField) -> Result<(C64, f64)> {
    let lhs = apply_l1(bg, h)?.pair(h)?;
    let ginv = bg.flat.ginv();
    let mut d = Vec::new();
    let mut dbar = Vec::new();
    for j in 0..3 {
        d.push(h.spectral_derivative(Direction::Holomorphic(j + 1))?);
        dbar.push(h.spectral_derivative(Direction::Antiholomorphic(j + 1))?);
    }
    let l = *bg.lattice();
    let r = h.rank();
    let mut acc = ZERO;
    for s in 0..l.len() {
        for j in 0..3 {
            for k in 0..3 {
                let mut hol = ZERO;
                let mut anti = ZERO;
                for c in 0..r * r {
                    hol += d[j].field().at(c, s) * d[k].field().at(c, s).conj();
                    anti += dbar[j].field().at(c, s) * dbar[k].field().at(c, s).conj();
                }
                acc += ginv[(k, j)] * hol + ginv[(j, k)] * anti;
            }
        }
    }
    let rhs = 0.5 * acc.re * bg.weight_density() * l.cell_volume() * crate::form::VOLUME_ELEMENT_FACTOR;
    Ok((lhs, rhs))
}

