//! Newton correction with the base-point block inverse as preconditioner, and
//! predictor–corrector continuation in `α′`, including manufactured forcing.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::bundle::{project_h0, EndField, EndSixForm};
use crate::error::{Error, Result};
use crate::form::FormField;
use crate::linearized::{apply_block_inverse_projected, solve_l1_projected, Background, BlockTarget, BlockVector};
use crate::math::{sqrt, C64};
use crate::system::{ellipticity_monitor, eval_f, eval_f_coupled, positivity, Residual, SystemState};

/// A tangent vector: `(δu, δΘ)` and, in coupled mode, `δu₁`.
#[derive(Clone, Debug, PartialEq)]
pub struct Step {
    pub block: BlockVector,
    pub tangent: Option<EndField>,
}

/// A value of `F` or a forcing: block components and, in coupled mode, the
/// tangent-bundle component.
#[derive(Clone, Debug, PartialEq)]
pub struct Target {
    pub block: BlockTarget,
    pub tangent: Option<EndSixForm>,
}

impl Step {
    pub fn zeros(bg: &Background, coupled: bool) -> Step {
        let l = *bg.lattice();
        Step { block: BlockVector::zeros(bg), tangent: coupled.then(|| EndField::zeros(l, 3).expect("rank 3")) }
    }

    fn zip(&self, o: &Step, f: impl Fn(&EndField, &EndField) -> Result<EndField>) -> Result<Option<EndField>> {
        match (&self.tangent, &o.tangent) {
            (Some(a), Some(b)) => Ok(Some(f(a, b)?)),
            (None, None) => Ok(None),
            _ => Err(Error::InvalidConfig("mixing coupled and uncoupled vectors".into())),
        }
    }

    pub fn axpy(&self, a: f64, o: &Step) -> Result<Step> {
        Ok(Step { block: self.block.axpy(a, &o.block)?, tangent: self.zip(o, |x, y| x.axpy(a, y))? })
    }

    pub fn sub(&self, o: &Step) -> Result<Step> {
        self.axpy(-1.0, o)
    }

    pub fn scale(&self, a: f64) -> Step {
        Step { block: self.block.scale(a), tangent: self.tangent.as_ref().map(|t| t.scale(a)) }
    }

    pub fn dot(&self, o: &Step, bg: &Background) -> f64 {
        let w = crate::field::Field::from_fn(*bg.lattice(), 1, |_, _| C64::new(bg.weight_density(), 0.0));
        let t = match (&self.tangent, &o.tangent) {
            (Some(a), Some(b)) => crate::bundle::end_inner(a, b, &w).map(|z| z.re).unwrap_or(0.0),
            _ => 0.0,
        };
        self.block.dot(&o.block, bg) + t
    }

    pub fn norm(&self, bg: &Background) -> f64 {
        sqrt(self.dot(self, bg).max(0.0))
    }

    pub fn max_abs(&self) -> f64 {
        self.block.max_abs().max(self.tangent.as_ref().map(|t| t.max_abs()).unwrap_or(0.0))
    }
}

impl Target {
    pub fn zeros(bg: &Background, coupled: bool) -> Target {
        let l = *bg.lattice();
        Target { block: BlockTarget::zeros(bg), tangent: coupled.then(|| EndSixForm::zeros(l, 3).expect("rank 3")) }
    }

    pub fn of(r: &Residual) -> Target {
        Target { block: r.target(), tangent: r.tangent_hym.clone() }
    }

    pub fn sub(&self, o: &Target) -> Result<Target> {
        let tangent = match (&self.tangent, &o.tangent) {
            (Some(a), Some(b)) => Some(a.sub(b)?),
            (None, None) => None,
            _ => return Err(Error::InvalidConfig("mixing coupled and uncoupled targets".into())),
        };
        Ok(Target { block: self.block.sub(&o.block)?, tangent })
    }

    pub fn scale(&self, a: f64) -> Target {
        Target { block: self.block.scale(a), tangent: self.tangent.as_ref().map(|t| t.scale(a)) }
    }

    /// Weighted `L²` norm of all components.
    pub fn norm(&self, bg: &Background) -> f64 {
        let (a, b) = self.block.component_norms(bg);
        let t = self
            .tangent
            .as_ref()
            .map(|t| BlockTarget { hym: t.clone(), anomaly: self.block.anomaly.clone() }.component_norms(bg).0)
            .unwrap_or(0.0);
        sqrt(a * a + b * b + t * t)
    }
}

/// The exact inverse of the linearization at the flat base point, composed
/// with the projection onto its range.
pub fn precondition(bg: &Background, r: &Target) -> Step {
    Step {
        block: apply_block_inverse_projected(bg, &r.block),
        tangent: r.tangent.as_ref().map(|t| solve_l1_projected(bg, t)),
    }
}

/// `F(α′, x)` for either the plain or the coupled system.
pub fn evaluate(bg: &Background, state: &SystemState) -> Result<Target> {
    let r = if state.tangent.is_some() { eval_f_coupled(bg, state)? } else { eval_f(bg, state)? };
    Ok(Target::of(&r))
}

/// `x + t·δ`, re-projected into the gauge-fixed space with `Θ = i∂∂̄β`.
pub fn advance(bg: &Background, state: &SystemState, t: f64, delta: &Step) -> Result<SystemState> {
    let mut out = state.step(bg, t, &delta.block)?;
    out.tangent = match (&state.tangent, &delta.tangent) {
        (Some(a), Some(d)) => Some(project_h0(&a.axpy(t, d)?)),
        (None, None) => None,
        _ => return Err(Error::InvalidConfig("state and step disagree on coupled mode".into())),
    };
    Ok(out)
}

/// Centered-difference Jacobian–vector product `(F(x + εv) − F(x − εv))/(2ε)`.
pub fn jacobian_vector(bg: &Background, state: &SystemState, v: &Step, eps: f64) -> Result<Target> {
    let plus = evaluate(bg, &advance(bg, state, eps, v)?)?;
    let minus = evaluate(bg, &advance(bg, state, -eps, v)?)?;
    Ok(plus.sub(&minus)?.scale(0.5 / eps))
}

/// How each Newton step is solved.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NewtonMethod {
    /// `δ = −P r` with `P` the frozen base-point block inverse.
    Chord,
    /// Restarted GMRES on the left-preconditioned system `P J δ = −P r` with
    /// finite-difference `J`, forcing term `min(10⁻², ‖r‖)`.
    Krylov { restart: usize, max_restarts: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct NewtonConfig {
    /// Residual `L²` tolerance.
    pub tol: f64,
    pub max_iters: usize,
    pub method: NewtonMethod,
    /// A trial point is rejected if its positivity margin falls below this.
    /// Continuation also rejects steps whose corrected state falls below it.
    pub positivity_floor: f64,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        NewtonConfig {
            tol: 1e-9,
            max_iters: 25,
            method: NewtonMethod::Krylov { restart: 30, max_restarts: 4 },
            positivity_floor: 0.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct NewtonReport {
    pub state: SystemState,
    pub iterations: usize,
    /// Residual norm before each iteration and after the last.
    pub history: Vec<f64>,
    /// Accepted damping factor per iteration.
    pub damping: Vec<f64>,
    pub krylov_iterations: usize,
}

impl NewtonReport {
    pub fn residual(&self) -> f64 {
        *self.history.last().expect("nonempty history")
    }

    /// `max r_{k+1}/r_k²` over iterations with `r_k < threshold` and a
    /// following residual above `RATIO_FLOOR·max(r_0, 1)`.
    pub fn quadratic_ratio(&self, threshold: f64) -> Option<f64> {
        let floor = RATIO_FLOOR * self.history[0].max(1.0);
        self.history
            .windows(2)
            .filter(|w| w[0] < threshold && w[1] > floor)
            .map(|w| w[1] / (w[0] * w[0]))
            .fold(None, |m: Option<f64>, r| Some(m.map_or(r, |m| m.max(r))))
    }
}

const ARMIJO_C: f64 = 1e-4;
/// Residuals below this fraction of the initial residual are treated as
/// rounding noise in ratio checks.
pub const RATIO_FLOOR: f64 = 1e-11;
const DAMPING: [f64; 4] = [1.0, 0.5, 0.25, 0.125];

fn trial(bg: &Background, state: &SystemState, lambda: f64, delta: &Step, floor: f64) -> Result<SystemState> {
    let next = advance(bg, state, lambda, delta)?;
    let margin = positivity(bg, &next)?;
    if margin <= floor {
        return Err(Error::NotPositive { min_eigenvalue: margin, site: 0 });
    }
    Ok(next)
}

/// Solve `F(α′, x) = target` starting from `state`.
pub fn newton_correct(
    bg: &Background,
    state: &SystemState,
    target: &Target,
    cfg: &NewtonConfig,
) -> Result<NewtonReport> {
    let mut x = state.clone();
    let mut r = evaluate(bg, &x)?.sub(target)?;
    let mut norm = r.norm(bg);
    let mut history = vec![norm];
    let mut damping = Vec::new();
    let mut krylov_iterations = 0;
    let mut last_err = None;
    while norm >= cfg.tol {
        if damping.len() == cfg.max_iters {
            return Err(Error::NewtonStalled { iterations: cfg.max_iters, residual: norm });
        }
        let delta = match cfg.method {
            NewtonMethod::Chord => precondition(bg, &r).scale(-1.0),
            NewtonMethod::Krylov { restart, max_restarts } => {
                let forcing = norm.min(1e-2);
                let (d, its) = gmres(bg, &x, &r, forcing, restart, max_restarts)?;
                krylov_iterations += its;
                d
            }
        };
        let mut accepted = None;
        for lambda in DAMPING {
            match trial(bg, &x, lambda, &delta, cfg.positivity_floor) {
                Ok(next) => {
                    let rn = evaluate(bg, &next)?.sub(target)?;
                    let nn = rn.norm(bg);
                    if nn <= (1.0 - ARMIJO_C * lambda) * norm {
                        accepted = Some((next, rn, nn, lambda));
                        break;
                    }
                }
                Err(e @ Error::NotPositive { .. }) => last_err = Some(e),
                Err(e) => return Err(e),
            }
        }
        let Some((next, rn, nn, lambda)) = accepted else {
            return Err(last_err.unwrap_or(Error::NewtonStalled { iterations: damping.len(), residual: norm }));
        };
        x = next;
        r = rn;
        norm = nn;
        history.push(norm);
        damping.push(lambda);
    }
    Ok(NewtonReport { state: x, iterations: damping.len(), history, damping, krylov_iterations })
}

/// Restarted GMRES for `P J δ = −P r` in the weighted inner product.
fn gmres(
    bg: &Background,
    x: &SystemState,
    r: &Target,
    forcing: f64,
    restart: usize,
    max_restarts: usize,
) -> Result<(Step, usize)> {
    let op = |v: &Step| -> Result<Step> {
        let vn = v.max_abs();
        if vn == 0.0 {
            return Ok(v.clone());
        }
        let eps = 1e-6 / vn;
        Ok(precondition(bg, &jacobian_vector(bg, x, v, eps)?))
    };
    let b = precondition(bg, r).scale(-1.0);
    let bnorm = b.norm(bg);
    let mut sol = b.scale(0.0);
    if bnorm == 0.0 {
        return Ok((sol, 0));
    }
    let goal = forcing * bnorm;
    let mut total = 0;
    for _ in 0..=max_restarts {
        let res = b.sub(&op(&sol)?)?;
        let beta = res.norm(bg);
        if beta <= goal {
            break;
        }
        let mut basis = vec![res.scale(1.0 / beta)];
        let mut h: Vec<Vec<f64>> = Vec::new();
        let mut givens: Vec<(f64, f64)> = Vec::new();
        let mut g = vec![beta];
        for k in 0..restart {
            total += 1;
            let mut w = op(&basis[k])?;
            let mut col = vec![0.0; k + 2];
            for (i, q) in basis.iter().enumerate() {
                col[i] = w.dot(q, bg);
                w = w.axpy(-col[i], q)?;
            }
            // one reorthogonalization pass
            for (i, q) in basis.iter().enumerate() {
                let c = w.dot(q, bg);
                col[i] += c;
                w = w.axpy(-c, q)?;
            }
            col[k + 1] = w.norm(bg);
            for (i, &(c, s)) in givens.iter().enumerate() {
                let (a, b) = (col[i], col[i + 1]);
                col[i] = c * a + s * b;
                col[i + 1] = -s * a + c * b;
            }
            let (a, b) = (col[k], col[k + 1]);
            let d = sqrt(a * a + b * b);
            let (c, s) = if d == 0.0 { (1.0, 0.0) } else { (a / d, b / d) };
            col[k] = d;
            col[k + 1] = 0.0;
            givens.push((c, s));
            g.push(-s * g[k]);
            g[k] *= c;
            let next_norm = w.norm(bg);
            h.push(col);
            let done = g[k + 1].abs() <= goal || next_norm == 0.0;
            if !done {
                basis.push(w.scale(1.0 / next_norm));
            }
            if done || k + 1 == restart {
                break;
            }
        }
        let m = h.len();
        let mut y = vec![0.0; m];
        for i in (0..m).rev() {
            let mut acc = g[i];
            for j in i + 1..m {
                acc -= h[j][i] * y[j];
            }
            y[i] = acc / h[i][i];
        }
        for (q, yi) in basis.iter().zip(&y) {
            sol = sol.axpy(*yi, q)?;
        }
        if g[m].abs() <= goal {
            break;
        }
    }
    Ok((sol, total))
}

/// Known solution `x*(α′) = (α′/α_ref)·x*` and forcing `ρ(α′) = F(α′, x*(α′))`.
#[derive(Clone, Debug)]
pub struct ManufacturedProblem {
    /// `(u*, β*, Θ*)` reached at `α′ = alpha_ref`.
    pub target: SystemState,
    pub alpha_ref: f64,
    pub amplitude: f64,
}

impl ManufacturedProblem {
    /// The manufactured solution at `α′`.
    pub fn solution(&self, alpha: f64) -> SystemState {
        let t = if self.alpha_ref == 0.0 { 1.0 } else { alpha / self.alpha_ref };
        let s = &self.target;
        let theta = s.theta.scale_real(t);
        SystemState {
            alpha,
            u: s.u.scale(t),
            beta: s.beta.scale_real(t),
            theta,
            tangent: s.tangent.as_ref().map(|u| u.scale(t)),
        }
    }

    pub fn forcing(&self, bg: &Background, alpha: f64) -> Result<Target> {
        evaluate(bg, &self.solution(alpha))
    }
}

/// Build a manufactured problem from band-limited shapes `u`, `β` (and
/// optionally `u₁`), each normalized to unit max and scaled by `amplitude`.
pub fn make_manufactured(
    bg: &Background,
    amplitude: f64,
    u_shape: &EndField,
    beta_shape: &FormField,
    tangent_shape: Option<&EndField>,
    alpha_ref: f64,
) -> Result<ManufacturedProblem> {
    let unit = |m: f64| if m == 0.0 { 0.0 } else { amplitude / m };
    let u = project_h0(u_shape);
    let u = u.scale(unit(u.max_abs()));
    let beta = beta_shape.real_part().resolved_nonconstant();
    let beta = beta.scale_real(unit(beta.max_abs()));
    let mut target = SystemState::new(alpha_ref, u, beta)?;
    if let Some(t) = tangent_shape {
        let t = project_h0(t);
        target.tangent = Some(t.scale(unit(t.max_abs())));
    }
    let margin = positivity(bg, &target)?;
    if margin <= 0.0 {
        return Err(Error::NotPositive { min_eigenvalue: margin, site: 0 });
    }
    Ok(ManufacturedProblem { target, alpha_ref, amplitude })
}

/// First-order predictor choice.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Predictor {
    /// Start each corrector from the previous solution.
    Previous,
    /// Linear extrapolation through the last two solutions.
    Secant,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ContinuationConfig {
    pub alpha_start: f64,
    pub alpha_target: f64,
    pub step: f64,
    pub shrink: f64,
    pub grow: f64,
    pub min_step: f64,
    pub predictor: Predictor,
    pub newton: NewtonConfig,
    /// Ellipticity monitor warning threshold.
    pub epsilon: f64,
}

impl ContinuationConfig {
    pub fn new(alpha_target: f64, step: f64) -> ContinuationConfig {
        ContinuationConfig {
            alpha_start: 0.0,
            alpha_target,
            step,
            shrink: 0.5,
            grow: 1.5,
            min_step: step * 1e-6,
            predictor: Predictor::Secant,
            newton: NewtonConfig::default(),
            epsilon: 0.1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |s: &str| Err(Error::InvalidConfig(s.into()));
        if !(0.0 <= self.alpha_start && self.alpha_start < self.alpha_target) {
            return bad("need 0 ≤ alpha_start < alpha_target");
        }
        if !(self.step > 0.0 && self.min_step > 0.0 && self.min_step <= self.step) {
            return bad("need 0 < min_step ≤ step");
        }
        if !(0.0 < self.shrink && self.shrink < 1.0 && self.grow >= 1.0) {
            return bad("need 0 < shrink < 1 ≤ grow");
        }
        if !(self.newton.tol > 0.0 && self.newton.max_iters > 0 && self.epsilon > 0.0) {
            return bad("tolerances must be positive");
        }
        Ok(())
    }
}

/// One accepted continuation step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub alpha: f64,
    pub step: f64,
    pub hym_l2: f64,
    pub anomaly_l2: f64,
    pub tangent_l2: f64,
    pub residual: f64,
    pub newton_iterations: usize,
    pub krylov_iterations: usize,
    pub ellipticity: f64,
    pub positivity: f64,
    /// `α′^{−1/2}|Ω|_ω̂`; absent at `α′ = 0`.
    pub class_factor: Option<f64>,
    /// `‖x − x*‖` for manufactured runs.
    pub recovery_error: Option<f64>,
    /// Largest `r_{k+1}/r_k²` once `r_k < 10⁻³`.
    pub quadratic_ratio: Option<f64>,
    pub history: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct PathReport {
    pub records: Vec<StepRecord>,
    pub state: SystemState,
    pub alpha_reached: f64,
    pub completed: bool,
    pub stop_reason: Option<String>,
    pub warnings: Vec<String>,
    pub rejected_steps: usize,
}

/// Continue the solution of `F(α′, x) = ρ(α′)` from `alpha_start` to
/// `alpha_target`, where `ρ` is the manufactured forcing or zero. The start
/// state must solve the problem at `alpha_start`.
pub fn continue_in_alpha(
    bg: &Background,
    cfg: &ContinuationConfig,
    start: &SystemState,
    problem: Option<&ManufacturedProblem>,
) -> Result<PathReport> {
    cfg.validate()?;
    let coupled = start.tangent.is_some();
    let forcing = |alpha: f64| -> Result<Target> {
        match problem {
            Some(p) => p.forcing(bg, alpha),
            None => Ok(Target::zeros(bg, coupled)),
        }
    };
    let mut records = Vec::new();
    let mut warnings = Vec::new();
    let start = start.with_alpha(cfg.alpha_start);
    let first = newton_correct(bg, &start, &forcing(cfg.alpha_start)?, &cfg.newton)?;
    records.push(record(bg, cfg, &first, 0.0, problem, &mut warnings)?);
    let mut current = first.state;
    let mut previous: Option<SystemState> = None;
    let mut alpha = cfg.alpha_start;
    let mut step = cfg.step;
    let mut last_step = 0.0;
    let mut rejected = 0;
    let mut stop_reason = None;
    while alpha < cfg.alpha_target {
        let h = step.min(cfg.alpha_target - alpha);
        let next_alpha = if cfg.alpha_target - alpha - h <= 1e-14 * cfg.alpha_target { cfg.alpha_target } else { alpha + h };
        let guess = match (cfg.predictor, &previous) {
            (Predictor::Secant, Some(prev)) if last_step > 0.0 => {
                let d = difference(&current, prev)?;
                advance(bg, &current, h / last_step, &d)?
            }
            _ => current.clone(),
        }
        .with_alpha(next_alpha);
        let corrected = newton_correct(bg, &guess, &forcing(next_alpha)?, &cfg.newton).and_then(|rep| {
            // an exact predictor skips the Newton trial points, so check the result too
            let margin = positivity(bg, &rep.state)?;
            if margin <= cfg.newton.positivity_floor {
                return Err(Error::NotPositive { min_eigenvalue: margin, site: 0 });
            }
            Ok(rep)
        });
        match corrected {
            Ok(rep) => {
                records.push(record(bg, cfg, &rep, h, problem, &mut warnings)?);
                previous = Some(current);
                current = rep.state;
                alpha = next_alpha;
                last_step = h;
                if rep.iterations <= 3 {
                    step *= cfg.grow;
                }
            }
            Err(e @ (Error::NewtonStalled { .. } | Error::NotPositive { .. })) => {
                rejected += 1;
                step *= cfg.shrink;
                if step < cfg.min_step {
                    stop_reason = Some(format!("step underflow at alpha' = {alpha:e}: {e}"));
                    break;
                }
            }
            Err(e) => return Err(e),
        }
    }
    Ok(PathReport {
        completed: stop_reason.is_none(),
        records,
        state: current,
        alpha_reached: alpha,
        stop_reason,
        warnings,
        rejected_steps: rejected,
    })
}

fn difference(a: &SystemState, b: &SystemState) -> Result<Step> {
    let block = a.block().sub(&b.block())?;
    let tangent = match (&a.tangent, &b.tangent) {
        (Some(x), Some(y)) => Some(x.sub(y)?),
        _ => None,
    };
    Ok(Step { block, tangent })
}

/// `‖x − y‖` in the weighted norm.
pub fn state_distance(bg: &Background, a: &SystemState, b: &SystemState) -> Result<f64> {
    Ok(difference(a, b)?.norm(bg))
}

fn record(
    bg: &Background,
    cfg: &ContinuationConfig,
    rep: &NewtonReport,
    step: f64,
    problem: Option<&ManufacturedProblem>,
    warnings: &mut Vec<String>,
) -> Result<StepRecord> {
    let s = &rep.state;
    let r = if s.tangent.is_some() { eval_f_coupled(bg, s)? } else { eval_f(bg, s)? };
    let ellipticity = ellipticity_monitor(bg, s)?;
    if ellipticity > cfg.epsilon {
        warnings.push(format!("alpha' = {:e}: ellipticity monitor {ellipticity:e} above {:e}", s.alpha, cfg.epsilon));
    }
    let recovery_error = match problem {
        Some(p) => Some(state_distance(bg, s, &p.solution(s.alpha))?),
        None => None,
    };
    let class_factor = (s.alpha > 0.0).then(|| bg.flat().dilaton() / sqrt(s.alpha));
    Ok(StepRecord {
        alpha: s.alpha,
        step,
        hym_l2: r.hym_l2,
        anomaly_l2: r.anomaly_l2,
        tangent_l2: r.tangent_l2,
        residual: rep.residual(),
        newton_iterations: rep.iterations,
        krylov_iterations: rep.krylov_iterations,
        ellipticity,
        positivity: positivity(bg, s)?,
        class_factor,
        recovery_error,
        quadratic_ratio: rep.quadratic_ratio(1e-3),
        history: rep.history.clone(),
    })
}
