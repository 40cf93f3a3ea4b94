//! The identity battery behind `balanced verify`.

use balanced_core::bundle::{bundle_curvature, exp_metric, project_h0, EndField, MatN};
use balanced_core::continuation::{jacobian_vector, precondition, Step};
use balanced_core::form::{contract_lambda, i_del_dbar, raw_contraction, FormField};
use balanced_core::hermitian::{balanced_form, four_index, sqrt_positive_22, HermitianMetric, Mat3};
use balanced_core::linearized::{
    apply_block, apply_block_inverse, apply_l1, apply_l2, bochner, variation_metric, Background, BlockTarget,
    BlockVector, SyntheticCurvature,
};
use balanced_core::math::I;
use balanced_core::system::{eval_f, SystemState};
use balanced_core::{sample, Lattice, C64};
use serde::Serialize;

use crate::config::RunConfig;
use crate::rng::Uniform;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Skip,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Row {
    /// `module.invariant`.
    pub id: &'static str,
    pub measured: Option<f64>,
    pub tolerance: f64,
    pub status: Status,
    pub note: Option<String>,
}

/// Smallest lattice resolution at which nonlinear suites are free of aliasing
/// for band-limited inputs.
pub const ALIASING_MIN_POINTS: usize = 8;

struct Ctx<'a> {
    cfg: &'a RunConfig,
    bg: Background,
    lattice: Lattice,
    /// 1 normally; 2 under the fault-injection fixture.
    lambda_scale: f64,
}

type Check = fn(&Ctx, &mut Uniform) -> Result<f64, String>;

struct Suite {
    id: &'static str,
    check: Check,
    /// `None` for the configured identity tolerance.
    tolerance: Option<f64>,
    aliasing_sensitive: bool,
}

const SUITES: &[Suite] = &[
    Suite { id: "spectral_forms.dbar_squared", check: dbar_squared, tolerance: None, aliasing_sensitive: false },
    Suite { id: "spectral_forms.leibniz", check: leibniz, tolerance: None, aliasing_sensitive: true },
    Suite { id: "spectral_forms.omega_squared", check: omega_squared, tolerance: None, aliasing_sensitive: false },
    Suite {
        id: "spectral_forms.omega_delta_omega",
        check: omega_delta_omega,
        tolerance: None,
        aliasing_sensitive: false,
    },
    Suite {
        id: "hermitian_geometry.contraction_minus_4g",
        check: contraction,
        tolerance: None,
        aliasing_sensitive: false,
    },
    Suite {
        id: "hermitian_geometry.sqrt_round_trip",
        check: sqrt_round_trip,
        tolerance: Some(1e-10),
        aliasing_sensitive: false,
    },
    Suite {
        id: "hermitian_geometry.sqrt_scaling",
        check: sqrt_scaling,
        tolerance: Some(1e-12),
        aliasing_sensitive: false,
    },
    Suite {
        id: "linearized_ops.variation_metric",
        check: variation_fd,
        tolerance: None,
        aliasing_sensitive: false,
    },
    Suite {
        id: "linearized_ops.variation_routes",
        check: variation_routes,
        tolerance: None,
        aliasing_sensitive: false,
    },
    Suite { id: "linearized_ops.kahler_identity", check: kahler_identity, tolerance: None, aliasing_sensitive: false },
    Suite { id: "linearized_ops.bochner", check: bochner_check, tolerance: None, aliasing_sensitive: false },
    Suite { id: "bundle_geometry.trace_identity", check: trace_identity, tolerance: None, aliasing_sensitive: true },
    Suite { id: "strominger_system.base_point", check: base_point, tolerance: Some(1e-12), aliasing_sensitive: false },
    Suite { id: "strominger_system.w_membership", check: membership, tolerance: None, aliasing_sensitive: true },
    Suite {
        id: "linearized_ops.block_round_trip",
        check: block_round_trip,
        tolerance: None,
        aliasing_sensitive: false,
    },
    Suite {
        id: "strominger_system.gateaux_order",
        check: gateaux_order,
        tolerance: Some(0.1),
        aliasing_sensitive: true,
    },
    Suite {
        id: "continuation.preconditioned_identity",
        check: preconditioned_identity,
        tolerance: None,
        aliasing_sensitive: true,
    },
];

pub fn suite_ids() -> Vec<&'static str> {
    SUITES.iter().map(|s| s.id).collect()
}

/// Run every suite. Each suite draws from its own stream of `seed`, so rows do
/// not depend on execution order or thread count.
pub fn run_battery(cfg: &RunConfig, seed: u64, threads: usize) -> Result<Vec<Row>, String> {
    let bg = cfg.background(seed).map_err(|e| e.to_string())?;
    let lattice = *bg.lattice();
    let ctx = Ctx { cfg, bg, lattice, lambda_scale: if cfg.verify.fault_lambda_scale { 2.0 } else { 1.0 } };
    let run = |(i, s): (usize, &Suite)| run_suite(&ctx, s, seed, i as u64);
    #[cfg(feature = "parallel")]
    if threads > 1 {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(|e| e.to_string())?;
        return Ok(pool.install(|| SUITES.par_iter().enumerate().map(run).collect()));
    }
    let _ = threads;
    Ok(SUITES.iter().enumerate().map(run).collect())
}

fn run_suite(ctx: &Ctx, s: &Suite, seed: u64, stream: u64) -> Row {
    let tolerance = s.tolerance.unwrap_or(ctx.cfg.verify.tolerance);
    if s.aliasing_sensitive && ctx.lattice.points_per_axis() < ALIASING_MIN_POINTS {
        return Row {
            id: s.id,
            measured: None,
            tolerance,
            status: Status::Skip,
            note: Some(format!("needs at least {ALIASING_MIN_POINTS} points per axis")),
        };
    }
    let mut rng = Uniform::derived(seed, stream);
    match (s.check)(ctx, &mut rng) {
        Ok(m) => Row {
            id: s.id,
            measured: Some(m),
            tolerance,
            status: if m <= tolerance { Status::Pass } else { Status::Fail },
            note: None,
        },
        Err(e) => Row { id: s.id, measured: None, tolerance, status: Status::Fail, note: Some(e) },
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn dbar_squared(ctx: &Ctx, u: &mut Uniform) -> Result<f64, String> {
    let mut worst: f64 = 0.0;
    for (p, q) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
        let b = sample::form(ctx.lattice, p, q, 1.0, &mut u.source());
        worst = worst.max(b.dbar().and_then(|x| x.dbar()).map_err(err)?.max_abs());
        worst = worst.max(b.del().and_then(|x| x.del()).map_err(err)?.max_abs());
        let a = b.dbar().and_then(|x| x.del()).map_err(err)?;
        let c = b.del().and_then(|x| x.dbar()).map_err(err)?;
        worst = worst.max(a.add(&c).map_err(err)?.max_abs());
    }
    Ok(worst)
}

fn leibniz(ctx: &Ctx, u: &mut Uniform) -> Result<f64, String> {
    let a = sample::form(ctx.lattice, 1, 0, 1.0, &mut u.source());
    let b = sample::form(ctx.lattice, 0, 1, 1.0, &mut u.source());
    let lhs = a.wedge(&b).and_then(|x| x.dbar()).map_err(err)?;
    let rhs = a
        .dbar()
        .and_then(|x| x.wedge(&b))
        .and_then(|x| x.sub(&a.wedge(&b.dbar()?)?))
        .map_err(err)?;
    Ok(lhs.sub(&rhs).map_err(err)?.max_abs())
}

fn omega_squared(ctx: &Ctx, u: &mut Uniform) -> Result<f64, String> {
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let g = sample::positive_matrix(&mut u.source());
        let w = HermitianMetric::constant(ctx.lattice, g).map_err(err)?.kahler_form();
        let c = w.wedge(&w).map_err(err)?.at_site(0);
        for (s, r, j, k) in quad() {
            let expect = (g[(j, r)] * g[(s, k)] - g[(s, r)] * g[(j, k)]) * 2.0;
            worst = worst.max((four_index(&c, s, r, j, k) - expect).norm());
        }
    }
    Ok(worst)
}

fn omega_delta_omega(ctx: &Ctx, u: &mut Uniform) -> Result<f64, String> {
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let g = sample::positive_matrix(&mut u.source());
        let a = Mat3::from_fn(|_, _| C64::new(u.next(), u.next()));
        let dg = (a + a.adjoint()) * C64::new(0.5, 0.0);
        let w = HermitianMetric::constant(ctx.lattice, g).map_err(err)?.kahler_form();
        let coeffs: Vec<C64> = (0..9).map(|c| I * dg[(c / 3, c % 3)]).collect();
        let dw = FormField::constant(ctx.lattice, 1, 1, &coeffs).map_err(err)?;
        let c = w.wedge(&dw).map_err(err)?.at_site(0);
        for (s, r, j, k) in quad() {
            let expect = g[(j, r)] * dg[(s, k)] - g[(s, r)] * dg[(j, k)] + g[(s, k)] * dg[(j, r)]
                - g[(j, k)] * dg[(s, r)];
            worst = worst.max((four_index(&c, s, r, j, k) - expect).norm());
        }
    }
    Ok(worst)
}

fn quad() -> impl Iterator<Item = (usize, usize, usize, usize)> {
    (0..81).map(|i| (i / 27, (i / 9) % 3, (i / 3) % 3, i % 3))
}

fn contraction(ctx: &Ctx, u: &mut Uniform) -> Result<f64, String> {
    let m = sample::smooth_metric(ctx.lattice, 0.2, &mut u.source());
    let w = m.kahler_form();
    let w2 = w.wedge(&w).map_err(err)?;
    let raw = raw_contraction(&m, &w2).map_err(err)?.scale_real(ctx.lambda_scale);
    let a = raw.sub(&m.to_field().scale_real(-4.0)).max_abs();
    let lam = contract_lambda(&m, &w2).map_err(err)?.scale_real(ctx.lambda_scale);
    let b = lam.sub(&w.scale_real(4.0)).map_err(err)?.max_abs();
    Ok(a.max(b))
}

fn rel_err(a: &HermitianMetric, b: &HermitianMetric) -> f64 {
    (0..a.lattice().len()).map(|s| (a.at(s) - b.at(s)).norm() / b.at(s).norm()).fold(0.0, f64::max)
}

fn sqrt_round_trip(ctx: &Ctx, u: &mut Uniform) -> Result<f64, String> {
    let omega = *ctx.bg.flat().omega();
    let mut worst: f64 = 0.0;
    let single = Lattice::with_axes(4, &[balanced_core::Axis::X1]).map_err(err)?;
    for _ in 0..100 {
        let g = sample::constant_metric(single, &mut u.source());
        let back = sqrt_positive_22(&balanced_form(&g, &omega).map_err(err)?, &omega).map_err(err)?;
        worst = worst.max(rel_err(&back, &g));
    }
    for _ in 0..10 {
        let g = sample::smooth_metric(ctx.lattice, 0.3, &mut u.source());
        let back = sqrt_positive_22(&balanced_form(&g, &omega).map_err(err)?, &omega).map_err(err)?;
        worst = worst.max(rel_err(&back, &g));
    }
    Ok(worst)
}

fn sqrt_scaling(ctx: &Ctx, u: &mut Uniform) -> Result<f64, String> {
    let omega = *ctx.bg.flat().omega();
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let g = sample::smooth_metric(ctx.lattice, 0.3, &mut u.source());
        let psi = balanced_form(&g, &omega).map_err(err)?;
        let c = 0.1 + 4.9 * (u.next() + 1.0);
        let a = sqrt_positive_22(&psi.scale_real(c), &omega).map_err(err)?;
        let b = sqrt_positive_22(&psi, &omega).map_err(err)?.scaled(c * c).map_err(err)?;
        worst = worst.max(rel_err(&a, &b));
    }
    Ok(worst)
}

/// Largest deviation of centered differences of the square root from the
/// variation formula over three steps, relative to the variation. The square
/// root is quadratic in `Ψ`, so the differences carry no truncation error.
fn variation_fd(ctx: &Ctx, u: &mut Uniform) -> Result<f64, String> {
    let omega = *ctx.bg.flat().omega();
    let g = sample::smooth_metric(ctx.lattice, 0.1, &mut u.source());
    let psi = balanced_form(&g, &omega).map_err(err)?;
    let dpsi = i_del_dbar(&sample::real_11(ctx.lattice, 0.5, &mut u.source())).map_err(err)?;
    let exact = variation_metric(&g, &dpsi, &omega).map_err(err)?.scale_real(ctx.lambda_scale);
    let mut worst: f64 = 0.0;
    for h in [1e-2, 5e-3, 2.5e-3] {
        let at = |t: f64| -> Result<_, String> {
            Ok(sqrt_positive_22(&psi.axpy(C64::new(t, 0.0), &dpsi).map_err(err)?, &omega).map_err(err)?.to_field())
        };
        let fd = at(h)?.sub(&at(-h)?).scale_real(0.5 / h);
        worst = worst.max(fd.sub(&exact).max_abs() / exact.max_abs());
    }
    Ok(worst)
}

fn closed_direction(ctx: &Ctx, u: &mut Uniform) -> Result<FormField, String> {
    random_closed(ctx.lattice, 1.0, u)
}

/// A random real `i∂∂̄`-exact `(1,1)`-form.
pub fn random_closed(l: Lattice, amp: f64, u: &mut Uniform) -> Result<FormField, String> {
    i_del_dbar(&sample::real_11(l, amp, &mut u.source())).map_err(err)
}

fn variation_routes(ctx: &Ctx, u: &mut Uniform) -> Result<f64, String> {
    let flat = ctx.bg.flat();
    let t = closed_direction(ctx, u)?;
    let half = ctx.lambda_scale / (2.0 * flat.dilaton());
    let lam = contract_lambda(flat.metric(), &t).map_err(err)?.scale_real(half);
    let direct = i_del_dbar(&lam.real_part()).map_err(err)?;
    let identity = flat.hodge_laplacian(&t).scale_real(-1.0 / (2.0 * flat.dilaton()));
    Ok(direct.sub(&identity).map_err(err)?.max_abs() / t.max_abs())
}

fn kahler_identity(ctx: &Ctx, u: &mut Uniform) -> Result<f64, String> {
    let flat = ctx.bg.flat();
    let mut worst: f64 = 0.0;
    for (p, q) in [(1, 0), (1, 1), (2, 1), (1, 2), (2, 2), (3, 2)] {
        let eta = sample::form(ctx.lattice, p, q, 1.0, &mut u.source());
        let a = flat.lambda(&eta.dbar().map_err(err)?).map_err(err)?;
        let b = if q >= 1 {
            flat.lambda(&eta).and_then(|x| x.dbar()).map_err(err)?
        } else {
            FormField::zeros(ctx.lattice, p - 1, q).map_err(err)?
        };
        let c = flat.del_adjoint(&eta).map_err(err)?.scale(I);
        worst = worst.max(a.sub(&b).and_then(|x| x.add(&c)).map_err(err)?.max_abs());
    }
    Ok(worst)
}

/// A random traceless hermitian endomorphism in the gauge-fixed space.
pub fn random_h0(l: Lattice, rank: usize, amp: f64, u: &mut Uniform) -> Result<EndField, String> {
    let f = sample::hermitian_traceless(l, rank, amp, &mut u.source());
    Ok(project_h0(&EndField::from_field(rank, f).map_err(err)?))
}

fn bochner_check(ctx: &Ctx, u: &mut Uniform) -> Result<f64, String> {
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let h = random_h0(ctx.lattice, ctx.bg.rank(), 1.0, u)?;
        let (lhs, rhs) = bochner(&ctx.bg, &h).map_err(err)?;
        worst = worst.max((lhs - C64::new(rhs, 0.0)).norm() / rhs);
    }
    Ok(worst)
}

fn trace_identity(ctx: &Ctx, u: &mut Uniform) -> Result<f64, String> {
    let rank = ctx.bg.rank();
    let traceless = random_h0(ctx.lattice, rank, 0.8, u)?;
    let t = sample::real_field(ctx.lattice, 1, 0.5, true, &mut u.source());
    let mut h = traceless;
    for site in 0..ctx.lattice.len() {
        let m = h.matrix(site) + MatN::identity(rank, rank) * t.at(0, site);
        h.set_matrix(site, &m);
    }
    let f = bundle_curvature(&exp_metric(&h).map_err(err)?).map_err(err)?;
    let tr_if = f.trace().scale(I);
    let tr_u = FormField::from_field(0, 0, h.trace()).map_err(err)?;
    let expect = tr_u.dbar().and_then(|x| x.del()).map_err(err)?.scale(-I);
    Ok(tr_if.sub(&expect).map_err(err)?.max_abs())
}

fn base_point(ctx: &Ctx, _: &mut Uniform) -> Result<f64, String> {
    let mut worst: f64 = 0.0;
    for alpha in [0.0, 0.1] {
        let r = eval_f(&ctx.bg, &SystemState::base(&ctx.bg, alpha)).map_err(err)?;
        worst = worst.max(r.hym_max).max(r.anomaly_max);
    }
    Ok(worst)
}

fn membership(ctx: &Ctx, u: &mut Uniform) -> Result<f64, String> {
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let h = random_h0(ctx.lattice, ctx.bg.rank(), 0.05, u)?;
        let beta = sample::real_11(ctx.lattice, 0.05, &mut u.source());
        let s = SystemState::new(0.05, h, beta).map_err(err)?;
        let r = eval_f(&ctx.bg, &s).map_err(err)?;
        let (adj, trace) = r.hym_membership();
        let closed = r.anomaly.del().map_err(err)?.max_abs().max(r.anomaly.dbar().map_err(err)?.max_abs());
        worst = worst.max(adj).max(trace).max(closed);
    }
    Ok(worst)
}

fn synthetic(ctx: &Ctx, u: &mut Uniform) -> Result<Background, String> {
    let rank = ctx.bg.rank();
    let terms: Vec<_> = (0..2)
        .map(|_| {
            let phi: Vec<C64> = (0..9).map(|_| C64::new(u.next(), u.next())).collect();
            (phi, sample::hermitian_traceless_matrix(rank, &mut u.source()))
        })
        .collect();
    let curv = SyntheticCurvature::new(ctx.bg.flat(), &terms).map_err(err)?;
    Ok(ctx.bg.clone().with_curvature(curv))
}

fn block_round_trip(ctx: &Ctx, u: &mut Uniform) -> Result<f64, String> {
    let bg = synthetic(ctx, u)?;
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let x = BlockVector { u: random_h0(ctx.lattice, bg.rank(), 1.0, u)?, theta: closed_direction(ctx, u)? };
        let y = apply_block_inverse(&bg, &apply_block(&bg, &x).map_err(err)?).map_err(err)?;
        worst = worst.max(y.sub(&x).map_err(err)?.max_abs() / x.max_abs());
    }
    Ok(worst)
}

/// `|order − 2|` of centered differences of `F` at the origin against the blocks.
fn gateaux_order(ctx: &Ctx, u: &mut Uniform) -> Result<f64, String> {
    let bg = &ctx.bg;
    let dir = BlockVector { u: random_h0(ctx.lattice, bg.rank(), 1.0, u)?, theta: closed_direction(ctx, u)? };
    let base = SystemState::base(bg, 0.0);
    let exact = BlockTarget { hym: apply_l1(bg, &dir.u).map_err(err)?, anomaly: apply_l2(bg, &dir.theta).map_err(err)? };
    let errs = gateaux_errors(bg, &base, &dir, &exact, &ctx.cfg.linearize.steps)?;
    Ok(worst_order_deviation(&errs, &ctx.cfg.linearize.steps))
}

/// Max-norm errors of centered differences of `F` against `exact`, per step.
pub fn gateaux_errors(
    bg: &Background,
    base: &SystemState,
    dir: &BlockVector,
    exact: &BlockTarget,
    steps: &[f64],
) -> Result<Vec<f64>, String> {
    Ok(gateaux_split(bg, base, dir, exact, steps)?.iter().map(|(a, b)| a.max(*b)).collect())
}

/// As [`gateaux_errors`], split into the first and the anomaly component.
pub fn gateaux_split(
    bg: &Background,
    base: &SystemState,
    dir: &BlockVector,
    exact: &BlockTarget,
    steps: &[f64],
) -> Result<Vec<(f64, f64)>, String> {
    steps
        .iter()
        .map(|&t| {
            let f = |s: f64| -> Result<BlockTarget, String> {
                Ok(eval_f(bg, &base.step(bg, s, dir).map_err(err)?).map_err(err)?.target())
            };
            let d = f(t)?.sub(&f(-t)?).map_err(err)?.scale(0.5 / t).sub(exact).map_err(err)?;
            Ok((d.hym.max_abs(), d.anomaly.max_abs()))
        })
        .collect()
}

/// Observed convergence orders between successive steps.
pub fn observed_orders(errs: &[f64], steps: &[f64]) -> Vec<f64> {
    errs.windows(2).zip(steps.windows(2)).map(|(e, h)| (e[0] / e[1]).ln() / (h[0] / h[1]).ln()).collect()
}

fn worst_order_deviation(errs: &[f64], steps: &[f64]) -> f64 {
    observed_orders(errs, steps).iter().map(|o| (o - 2.0).abs()).fold(0.0, f64::max)
}

fn preconditioned_identity(ctx: &Ctx, u: &mut Uniform) -> Result<f64, String> {
    let bg = &ctx.bg;
    let base = SystemState::base(bg, 0.0);
    let v = Step {
        block: BlockVector { u: random_h0(ctx.lattice, bg.rank(), 1.0, u)?, theta: closed_direction(ctx, u)? },
        tangent: None,
    };
    let pjv = precondition(bg, &jacobian_vector(bg, &base, &v, 1e-5).map_err(err)?);
    Ok(pjv.sub(&v).map_err(err)?.max_abs() / v.max_abs())
}
