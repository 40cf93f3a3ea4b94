//! The nonlinear map `F(α′, (u, Θ))` on the flat testbed, its coupled variant
//! with a deformed tangent-bundle metric, and diagnostics on solutions.

use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::bundle::{
    bundle_curvature, exp_metric, hermitian_inv_sqrt, hermitian_sqrt, lambda_f, project_h0, unitary_frame_curvature,
    EndField, EndSixForm,
};
use crate::error::{Error, Result};
use crate::field::{spectral_derivative, Direction, Field};
use crate::form::{i_del_dbar, trace_wedge, EndForm, FormField};
use crate::hermitian::{chern_curvature, dilaton, metric_from_theta, positivity_margin, BalancedAnsatz, HermitianMetric, Mat3};
use crate::linearized::{beta_from_theta, Background, BlockTarget, BlockVector};
use crate::math::{powf, sqrt, C64, ZERO};

/// A point `(α′, u, Θ = i∂∂̄β)` of the deformation space, optionally with a
/// tangent-bundle endomorphism `u₁` for the coupled system (then `u` plays
/// the role of `u₂`).
#[derive(Clone, Debug, PartialEq)]
pub struct SystemState {
    pub alpha: f64,
    pub u: EndField,
    pub beta: FormField,
    pub theta: FormField,
    pub tangent: Option<EndField>,
}

impl SystemState {
    /// The flat base point `(α′, 0, 0)`.
    pub fn base(bg: &Background, alpha: f64) -> SystemState {
        let z = BlockVector::zeros(bg);
        SystemState {
            alpha,
            u: z.u,
            beta: FormField::zeros(*bg.lattice(), 1, 1).expect("(1,1)"),
            theta: z.theta,
            tangent: None,
        }
    }

    pub fn new(alpha: f64, u: EndField, beta: FormField) -> Result<SystemState> {
        if alpha < 0.0 || !alpha.is_finite() {
            return Err(Error::InvalidConfig("α′ must be finite and nonnegative".into()));
        }
        let theta = i_del_dbar(&beta)?;
        Ok(SystemState { alpha, u, beta, theta, tangent: None })
    }

    /// Recover `β` from a closed `Θ` without constant modes.
    pub fn from_theta(bg: &Background, alpha: f64, u: EndField, theta: &FormField) -> Result<SystemState> {
        let beta = beta_from_theta(bg, theta)?;
        let state = SystemState::new(alpha, u, beta)?;
        let defect = state.theta.sub(theta)?.max_abs();
        if defect > 1e-8 * theta.max_abs().max(1.0) {
            return Err(Error::NotClosed { defect });
        }
        Ok(state)
    }

    pub fn with_tangent(mut self, u1: EndField) -> SystemState {
        self.tangent = Some(u1);
        self
    }

    pub fn with_alpha(&self, alpha: f64) -> SystemState {
        SystemState { alpha, ..self.clone() }
    }

    /// Largest violation of the gauge conditions: `u ∈ H₀`, `β` real
    /// mean-zero, `Θ = i∂∂̄β`.
    pub fn gauge_defect(&self) -> f64 {
        let du = project_h0(&self.u).sub(&self.u).map(|d| d.max_abs()).unwrap_or(f64::INFINITY);
        let mean = self.beta.field().means().iter().map(|m| m.norm()).fold(0.0, f64::max);
        let real = self.beta.reality_defect();
        let theta = i_del_dbar(&self.beta)
            .and_then(|t| t.sub(&self.theta))
            .map(|d| d.max_abs())
            .unwrap_or(f64::INFINITY);
        let tangent = self
            .tangent
            .as_ref()
            .map(|t| project_h0(t).sub(t).map(|d| d.max_abs()).unwrap_or(f64::INFINITY))
            .unwrap_or(0.0);
        du.max(mean).max(real).max(theta).max(tangent)
    }

    /// Translate every field by whole lattice steps.
    pub fn shifted(&self, shift: &[usize]) -> SystemState {
        let sh = |e: &EndField| EndField::from_field(e.rank(), e.field().shifted(shift)).expect("same rank");
        SystemState {
            alpha: self.alpha,
            u: sh(&self.u),
            beta: self.beta.shifted(shift),
            theta: self.theta.shifted(shift),
            tangent: self.tangent.as_ref().map(sh),
        }
    }

    pub fn block(&self) -> BlockVector {
        BlockVector { u: self.u.clone(), theta: self.theta.clone() }
    }

    /// `x + t·δ` for a tangent vector whose `Θ` part is re-expressed as `i∂∂̄δβ`.
    pub fn step(&self, bg: &Background, t: f64, delta: &BlockVector) -> Result<SystemState> {
        let dbeta = beta_from_theta(bg, &delta.theta)?;
        let u = project_h0(&self.u.axpy(t, &delta.u)?);
        let beta = self.beta.axpy(C64::new(t, 0.0), &dbeta)?;
        let mut out = SystemState::new(self.alpha, u, beta)?;
        out.tangent = self.tangent.clone();
        Ok(out)
    }
}

/// Geometric data derived from a state.
#[derive(Clone, Debug)]
pub struct Geometry {
    pub ansatz: BalancedAnsatz,
    /// `|Ω|_{ω_Θ}`.
    pub dilaton: Field,
    /// Chern curvature of `ω_Θ`.
    pub tangent_curvature: EndForm,
    /// Chern curvature of `e^u Ĥ`.
    pub bundle_curvature: EndForm,
}

impl Geometry {
    pub fn new(bg: &Background, state: &SystemState) -> Result<Geometry> {
        let flat = bg.flat();
        let ansatz = metric_from_theta(flat.metric(), &state.theta, flat.omega())?;
        let dilaton = dilaton(&ansatz.metric, flat.omega())?;
        let tangent_curvature = chern_curvature(&ansatz.metric)?;
        let bundle_curvature = bundle_curvature(&exp_metric(&state.u)?)?;
        Ok(Geometry { ansatz, dilaton, tangent_curvature, bundle_curvature })
    }

    pub fn metric(&self) -> &HermitianMetric {
        &self.ansatz.metric
    }
}

/// Both (or, in coupled mode, all three) components of `F` with their norms.
#[derive(Clone, Debug)]
pub struct Residual {
    /// `|Ω|_{ω_Θ} e^{−u/2}(iΛ_{ω_Θ} F_u) e^{u/2} ⊗ ω_Θ³/3!`.
    pub hym: EndSixForm,
    /// `i∂∂̄ω_Θ − α′(Tr R∧R − Tr F∧F)`.
    pub anomaly: FormField,
    /// Coupled mode: the tangent-bundle Hermitian–Yang–Mills component.
    pub tangent_hym: Option<EndSixForm>,
    pub hym_l2: f64,
    pub hym_max: f64,
    pub anomaly_l2: f64,
    pub anomaly_max: f64,
    pub tangent_l2: f64,
}

impl Residual {
    fn new(bg: &Background, hym: EndSixForm, anomaly: FormField, tangent_hym: Option<EndSixForm>) -> Residual {
        let target = BlockTarget { hym: hym.clone(), anomaly: anomaly.clone() };
        let (hym_l2, anomaly_l2) = target.component_norms(bg);
        let tangent_l2 = tangent_hym
            .as_ref()
            .map(|t| BlockTarget { hym: t.clone(), anomaly: anomaly.clone() }.component_norms(bg).0)
            .unwrap_or(0.0);
        Residual {
            hym_max: hym.max_abs(),
            anomaly_max: anomaly.max_abs(),
            hym,
            anomaly,
            tangent_hym,
            hym_l2,
            anomaly_l2,
            tangent_l2,
        }
    }

    /// Combined weighted `L²` norm.
    pub fn l2(&self) -> f64 {
        sqrt(self.hym_l2 * self.hym_l2 + self.anomaly_l2 * self.anomaly_l2 + self.tangent_l2 * self.tangent_l2)
    }

    pub fn target(&self) -> BlockTarget {
        BlockTarget { hym: self.hym.clone(), anomaly: self.anomaly.clone() }
    }

    /// `max |Tr|` of the first component and `|∫ Tr|`, and its `Ĥ`-adjointness defect.
    pub fn hym_membership(&self) -> (f64, f64) {
        (self.hym.hermitian_defect(), self.hym.trace_integral().norm())
    }
}

/// `|Ω|_g e^{−u/2}(iΛ_g F_u) e^{u/2} · det g`, evaluated in the unitary frame.
fn hym_component(g: &HermitianMetric, dil: &Field, u: &EndField) -> Result<EndSixForm> {
    let k = lambda_f(g, &unitary_frame_curvature(u)?)?;
    let mut density = Field::zeros(*g.lattice(), 1);
    for s in 0..g.lattice().len() {
        density.set(0, s, dil.at(0, s) * g.det(s));
    }
    EndSixForm::tensor(&k, &density)
}

fn anomaly_component(
    alpha: f64,
    metric: &HermitianMetric,
    r: &EndForm,
    f: &EndForm,
) -> Result<FormField> {
    let ddbar = i_del_dbar(&metric.kahler_form().real_part())?;
    if alpha == 0.0 {
        return Ok(ddbar);
    }
    let rr = trace_wedge(r, r)?;
    let ff = trace_wedge(f, f)?;
    ddbar.sub(&rr.sub(&ff)?.scale_real(alpha))
}

/// `F(α′, (u, Θ))`.
pub fn eval_f(bg: &Background, state: &SystemState) -> Result<Residual> {
    let geo = Geometry::new(bg, state)?;
    eval_f_with(bg, state, &geo)
}

pub fn eval_f_with(bg: &Background, state: &SystemState, geo: &Geometry) -> Result<Residual> {
    let hym = hym_component(geo.metric(), &geo.dilaton, &state.u)?;
    let anomaly = anomaly_component(state.alpha, geo.metric(), &geo.tangent_curvature, &geo.bundle_curvature)?;
    Ok(Residual::new(bg, hym, anomaly, None))
}

/// The coupled map `F(α′, (u₁, u₂, Θ))`: Hermitian–Yang–Mills for the tangent
/// metric `e^{u₁}ĝ` (with `u₁` written in a `ĝ`-unitary frame) and for `e^{u₂}Ĥ`,
/// and the anomaly equation with `R = R_{u₁}`.
pub fn eval_f_coupled(bg: &Background, state: &SystemState) -> Result<Residual> {
    let u1 = state.tangent.as_ref().ok_or_else(|| Error::InvalidConfig("coupled mode needs a tangent field".into()))?;
    if u1.rank() != 3 {
        return Err(Error::InvalidRank(u1.rank()));
    }
    let flat = bg.flat();
    let ansatz = metric_from_theta(flat.metric(), &state.theta, flat.omega())?;
    let dil = dilaton(&ansatz.metric, flat.omega())?;
    let tangent_hym = hym_component(&ansatz.metric, &dil, u1)?;
    let hym = hym_component(&ansatz.metric, &dil, &state.u)?;
    let r = bundle_curvature(&exp_metric(u1)?)?;
    let f = bundle_curvature(&exp_metric(&state.u)?)?;
    let anomaly = anomaly_component(state.alpha, &ansatz.metric, &r, &f)?;
    Ok(Residual::new(bg, hym, anomaly, Some(tangent_hym)))
}

/// `α′ · sup_x |R_Θ|_{g_Θ}` with the tensor norm
/// `|R|² = g^{jl̄} g^{mk̄} Tr(R̃_{jk̄} R̃_{lm̄}†)`, `R̃ = g^{−1/2} R g^{1/2}`
/// (the endomorphism part measured in a `g`-unitary frame).
pub fn ellipticity_monitor(bg: &Background, state: &SystemState) -> Result<f64> {
    if state.alpha == 0.0 {
        return Ok(0.0);
    }
    let geo = Geometry::new(bg, state)?;
    Ok(state.alpha * curvature_sup_norm(geo.metric(), &geo.tangent_curvature))
}

pub fn curvature_sup_norm(g: &HermitianMetric, r: &EndForm) -> f64 {
    let mut sup: f64 = 0.0;
    for s in 0..g.lattice().len() {
        let gm = to_dmatrix(g.at(s));
        let root = hermitian_sqrt(&gm);
        let root_inv = hermitian_inv_sqrt(&gm);
        let ginv = g.inverse(s);
        let rt: Vec<DMatrix<C64>> = (0..9).map(|c| &root_inv * r.matrix(c, s) * &root).collect();
        let mut acc = ZERO;
        for j in 0..3 {
            for k in 0..3 {
                for l in 0..3 {
                    for m in 0..3 {
                        let w = ginv[(l, j)] * ginv[(k, m)];
                        if w == ZERO {
                            continue;
                        }
                        let a = &rt[3 * j + k];
                        let b = &rt[3 * l + m];
                        acc += w * (a * b.adjoint()).trace();
                    }
                }
            }
        }
        sup = sup.max(sqrt(acc.re.max(0.0)));
    }
    sup
}

fn to_dmatrix(m: &Mat3) -> DMatrix<C64> {
    DMatrix::from_fn(3, 3, |a, b| m[(a, b)])
}

/// A pointwise gauge transformation `σ` with `g = σ̄† h σ̄`.
#[derive(Clone, Debug)]
pub struct GaugeField {
    sigma: Vec<DMatrix<C64>>,
    lattice: crate::lattice::Lattice,
}

impl GaugeField {
    pub fn at(&self, site: usize) -> &DMatrix<C64> {
        &self.sigma[site]
    }

    pub fn to_field(&self) -> Field {
        let mut f = Field::zeros(self.lattice, 9);
        for (s, m) in self.sigma.iter().enumerate() {
            for c in 0..9 {
                f.set(c, s, m[(c / 3, c % 3)]);
            }
        }
        f
    }

    /// `max |σ̄† h σ̄ − g|`.
    pub fn reconstruction_defect(&self, h: &HermitianMetric, g: &HermitianMetric) -> f64 {
        (0..self.sigma.len())
            .map(|s| {
                let sb = self.sigma[s].conjugate();
                let r = sb.adjoint() * to_dmatrix(h.at(s)) * &sb - to_dmatrix(g.at(s));
                r.iter().map(|z| z.norm()).fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }

    /// Transport a connection `d + A` (acting on column vectors) to the frame
    /// `s = σ s̃`: `Ã = σ⁻¹ A σ + σ⁻¹ dσ`. Returns the `(1,0)` and `(0,1)` parts.
    pub fn transport(&self, a10: &EndForm, a01: &EndForm) -> Result<(EndForm, EndForm)> {
        let l = self.lattice;
        let sig = self.to_field();
        let inv: Vec<DMatrix<C64>> =
            self.sigma.iter().enumerate().map(|(s, m)| m.clone().try_inverse().ok_or(Error::Singular { site: s })).collect::<Result<_>>()?;
        let mut out10 = EndForm::zeros(l, 1, 0, 3)?;
        let mut out01 = EndForm::zeros(l, 0, 1, 3)?;
        for j in 0..3 {
            let d = spectral_derivative(&sig, Direction::Holomorphic(j + 1))?;
            let db = spectral_derivative(&sig, Direction::Antiholomorphic(j + 1))?;
            for s in 0..l.len() {
                let dm = DMatrix::from_fn(3, 3, |a, b| d.at(3 * a + b, s));
                let dbm = DMatrix::from_fn(3, 3, |a, b| db.at(3 * a + b, s));
                out10.set_matrix(j, s, &(&inv[s] * a10.matrix(j, s) * &self.sigma[s] + &inv[s] * dm));
                out01.set_matrix(j, s, &(&inv[s] * a01.matrix(j, s) * &self.sigma[s] + &inv[s] * dbm));
            }
        }
        Ok((out10, out01))
    }

    /// `σ⁻¹ R σ` for an endomorphism-valued form.
    pub fn conjugate(&self, r: &EndForm) -> Result<EndForm> {
        let (p, q) = r.bidegree();
        let mut out = EndForm::zeros(self.lattice, p, q, r.rank())?;
        for s in 0..self.sigma.len() {
            let inv = self.sigma[s].clone().try_inverse().ok_or(Error::Singular { site: s })?;
            for c in 0..crate::basis::form_dim(p, q) {
                out.set_matrix(c, s, &(&inv * r.matrix(c, s) * &self.sigma[s]));
            }
        }
        Ok(out)
    }
}

/// `σ` with `σ̄ = h^{−1/2}(h^{1/2} g h^{1/2})^{1/2} h^{−1/2}`, the unique
/// solution of `g = σ̄† h σ̄` with `h^{1/2} σ̄ h^{−1/2}` positive.
pub fn gauge_to_unitary(h: &HermitianMetric, g: &HermitianMetric) -> Result<GaugeField> {
    if h.lattice() != g.lattice() {
        return Err(Error::LatticeMismatch);
    }
    let sigma = (0..h.lattice().len())
        .map(|s| {
            let hm = to_dmatrix(h.at(s));
            let root = hermitian_sqrt(&hm);
            let root_inv = hermitian_inv_sqrt(&hm);
            let mid = hermitian_sqrt(&(&root * to_dmatrix(g.at(s)) * &root));
            (&root_inv * mid * &root_inv).conjugate()
        })
        .collect();
    Ok(GaugeField { sigma, lattice: *h.lattice() })
}

/// The Chern connection `A = ((∂h) h⁻¹)ᵀ` of `h` acting on column vectors.
pub fn chern_connection(h: &HermitianMetric) -> Result<EndForm> {
    let l = *h.lattice();
    let hinv: Vec<DMatrix<C64>> = (0..l.len()).map(|s| to_dmatrix(h.inverse(s))).collect();
    let theta = crate::hermitian::connection_form(&h.to_field(), 3, &hinv)?;
    let mut out = EndForm::zeros(l, 1, 0, 3)?;
    for s in 0..l.len() {
        for j in 0..3 {
            out.set_matrix(j, s, &theta.matrix(j, s).transpose());
        }
    }
    Ok(out)
}

/// `(1,1)` part of `dA + A∧A` for `A = a + b`, `a` of type `(1,0)`, `b` of type `(0,1)`.
pub fn connection_curvature(a: &EndForm, b: &EndForm) -> Result<EndForm> {
    let mut out = a.dbar()?.add(&b.del()?)?;
    out = out.add(&a.wedge(b)?)?.add(&b.wedge(a)?)?;
    Ok(out)
}

/// Which direction to rescale a solution.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RescaleMode {
    /// `ω̃ = α′⁻¹ ω_Θ`, solving the equation with `α′ = 1`.
    AlphaToClass,
    /// `ω = α ω̃` for a solution `ω̃` at `α′ = 1`, solving the equation with `α′ = α`.
    ClassToAlpha { alpha: f64 },
}

#[derive(Clone, Debug)]
pub struct RescaleReport {
    pub metric: HermitianMetric,
    /// The equation parameter the rescaled metric solves.
    pub alpha: f64,
    /// Scale factor `c` in `ω' = c ω_Θ`.
    pub scale: f64,
    /// `|Ω|_{ω'} ω'² = class_factor · (|Ω|_ω̂ ω̂² + Θ) / |Ω|_ω̂`, i.e. the class is
    /// `c^{1/2} [|Ω|_ω̂ ω̂²]`; this field is `c^{1/2} |Ω|_ω̂`.
    pub class_factor: f64,
    pub original_anomaly: FormField,
    pub rescaled_anomaly: FormField,
    /// `max |rescaled − c · original|`.
    pub covariance_defect: f64,
    /// `max |(|Ω|_{ω'} ω'²) − c^{1/2}(|Ω|_ω̂ ω̂² + Θ)|`.
    pub class_defect: f64,
}

pub fn rescale_solution(bg: &Background, state: &SystemState, mode: RescaleMode) -> Result<RescaleReport> {
    if state.alpha == 0.0 {
        return Err(Error::ZeroAlpha);
    }
    let (scale, alpha) = match mode {
        RescaleMode::AlphaToClass => (1.0 / state.alpha, 1.0),
        RescaleMode::ClassToAlpha { alpha } => {
            if alpha == 0.0 {
                return Err(Error::ZeroAlpha);
            }
            (alpha / state.alpha, alpha)
        }
    };
    let geo = Geometry::new(bg, state)?;
    let original = eval_f_with(bg, state, &geo)?.anomaly;
    let metric = geo.metric().scaled(scale)?;
    let r = chern_curvature(&metric)?;
    let rescaled = anomaly_component(alpha, &metric, &r, &geo.bundle_curvature)?;
    let covariance_defect = rescaled.sub(&original.scale_real(scale))?.max_abs();
    let class_factor = powf(scale, 0.5) * bg.flat().dilaton();
    let balanced = crate::hermitian::balanced_form(&metric, bg.flat().omega())?;
    let class_defect = balanced.sub(&geo.ansatz.balanced.scale_real(powf(scale, 0.5)))?.max_abs();
    Ok(RescaleReport {
        metric,
        alpha,
        scale,
        class_factor,
        original_anomaly: original,
        rescaled_anomaly: rescaled,
        covariance_defect,
        class_defect,
    })
}

/// Smallest eigenvalue of the hatted matrix of `|Ω|_ω̂ ω̂² + Θ`.
pub fn positivity(bg: &Background, state: &SystemState) -> Result<f64> {
    let flat = bg.flat();
    let psi = crate::hermitian::balanced_form(flat.metric(), flat.omega())?.add(&state.theta)?;
    Ok(positivity_margin(&psi).0)
}
