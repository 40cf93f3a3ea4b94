mod common;

use balanced_core::bundle::{project_h0, EndField};
use balanced_core::continuation::{
    continue_in_alpha, evaluate, jacobian_vector, make_manufactured, newton_correct, precondition, state_distance,
    ContinuationConfig, ManufacturedProblem, NewtonConfig, NewtonMethod, Step, Target,
};
use balanced_core::flat::FlatKahler;
use balanced_core::form::{i_del_dbar, FormField};
use balanced_core::hermitian::HolVolForm;
use balanced_core::lattice::Lattice;
use balanced_core::linearized::{Background, BlockVector};
use balanced_core::math::C64;
use balanced_core::sample;
use balanced_core::system::SystemState;
use balanced_core::Error;
use common::{cross_plane, Uniform};

fn background(l: Lattice, rank: usize, u: &mut Uniform) -> Background {
    let g = sample::constant_metric(l, &mut u.source());
    Background::new(FlatKahler::new(&g, HolVolForm::new(C64::new(0.9, -0.2)).unwrap()).unwrap(), rank).unwrap()
}

fn shape_u(l: Lattice, rank: usize, u: &mut Uniform) -> EndField {
    project_h0(&EndField::from_field(rank, sample::hermitian_traceless(l, rank, 1.0, &mut u.source())).unwrap())
}

fn problem(bg: &Background, amp: f64, coupled: bool, u: &mut Uniform) -> ManufacturedProblem {
    let l = *bg.lattice();
    let su = shape_u(l, bg.rank(), u);
    let sb = sample::real_11(l, 1.0, &mut u.source());
    let st = coupled.then(|| shape_u(l, 3, u));
    make_manufactured(bg, amp, &su, &sb, st.as_ref(), 1e-2).unwrap()
}

fn krylov() -> NewtonMethod {
    NewtonMethod::Krylov { restart: 30, max_restarts: 4 }
}

#[test]
fn preconditioned_jacobian_is_identity_at_base() {
    let mut u = Uniform::new(21);
    let bg = background(cross_plane(8), 2, &mut u);
    let l = *bg.lattice();
    let base = SystemState::base(&bg, 0.0);
    for _ in 0..3 {
        let theta = i_del_dbar(&sample::real_11(l, 1.0, &mut u.source())).unwrap();
        let v = Step { block: BlockVector { u: shape_u(l, 2, &mut u), theta }, tangent: None };
        let pjv = precondition(&bg, &jacobian_vector(&bg, &base, &v, 1e-5).unwrap());
        let d = pjv.sub(&v).unwrap().max_abs();
        assert!(d < 1e-9 * v.max_abs(), "{d:e}");
    }
}

#[test]
fn exact_solution_takes_no_iterations() {
    let mut u = Uniform::new(22);
    let bg = background(cross_plane(8), 2, &mut u);
    let p = problem(&bg, 1e-2, false, &mut u);
    let x = p.solution(5e-3);
    let rep = newton_correct(&bg, &x, &p.forcing(&bg, 5e-3).unwrap(), &NewtonConfig::default()).unwrap();
    assert_eq!(rep.iterations, 0);
    assert_eq!(rep.state, x);
}

#[test]
fn base_point_problem_converges_to_zero() {
    let mut u = Uniform::new(23);
    let bg = background(cross_plane(8), 2, &mut u);
    let l = *bg.lattice();
    let beta = sample::real_11(l, 1e-2, &mut u.source());
    let guess = SystemState::new(0.0, shape_u(l, 2, &mut u).scale(1e-2), beta).unwrap();
    for method in [NewtonMethod::Chord, krylov()] {
        let cfg = NewtonConfig { method, ..NewtonConfig::default() };
        let rep = newton_correct(&bg, &guess, &Target::zeros(&bg, false), &cfg).unwrap();
        assert!(rep.residual() < 1e-9);
        assert!(rep.state.block().max_abs() < 1e-9);
        assert!(rep.state.gauge_defect() < 1e-12);
    }
}

#[test]
fn manufactured_newton_recovers_target() {
    let mut u = Uniform::new(24);
    let bg = background(cross_plane(8), 2, &mut u);
    let p = problem(&bg, 1e-2, false, &mut u);
    let alpha = 1e-2;
    for method in [NewtonMethod::Chord, krylov()] {
        let cfg = NewtonConfig { method, ..NewtonConfig::default() };
        let rep = newton_correct(&bg, &SystemState::base(&bg, alpha), &p.forcing(&bg, alpha).unwrap(), &cfg).unwrap();
        assert!(rep.iterations <= 10, "{method:?}: {}", rep.iterations);
        let err = state_distance(&bg, &rep.state, &p.solution(alpha)).unwrap();
        assert!(err < 1e-7, "{err:e}");
    }
}

#[test]
fn krylov_converges_quadratically() {
    let mut u = Uniform::new(25);
    let bg = background(cross_plane(8), 2, &mut u);
    let p = problem(&bg, 5e-2, false, &mut u);
    let cfg = NewtonConfig { tol: 1e-12, method: krylov(), ..NewtonConfig::default() };
    let rep = newton_correct(&bg, &SystemState::base(&bg, 1e-2), &p.forcing(&bg, 1e-2).unwrap(), &cfg).unwrap();
    let ratio = rep.quadratic_ratio(1e-3).expect("at least one quadratic step");
    assert!(ratio < 10.0, "{ratio} {:?}", rep.history);
}

#[test]
fn flat_path_stays_trivial() {
    let mut u = Uniform::new(26);
    let bg = background(cross_plane(8), 2, &mut u);
    let cfg = ContinuationConfig::new(1e-2, 2.5e-3);
    let rep = continue_in_alpha(&bg, &cfg, &SystemState::base(&bg, 0.0), None).unwrap();
    assert!(rep.completed);
    assert_eq!(rep.alpha_reached, 1e-2);
    for r in &rep.records {
        assert!(r.residual < 1e-12);
        assert_eq!(r.newton_iterations, 0);
        assert_eq!(r.ellipticity, 0.0);
    }
    assert_eq!(rep.state.block().max_abs(), 0.0);
}

#[test]
fn manufactured_continuation_tracks_solution() {
    let mut u = Uniform::new(27);
    let bg = background(cross_plane(8), 2, &mut u);
    let p = problem(&bg, 1e-2, false, &mut u);
    let run = |step: f64, predictor| {
        let mut cfg = ContinuationConfig::new(1e-2, step);
        cfg.predictor = predictor;
        continue_in_alpha(&bg, &cfg, &SystemState::base(&bg, 0.0), Some(&p)).unwrap()
    };
    use balanced_core::continuation::Predictor;
    for predictor in [Predictor::Previous, Predictor::Secant] {
        let a = run(2.5e-3, predictor);
        let b = run(1.25e-3, predictor);
        assert!(a.completed && b.completed);
        for r in a.records.iter().chain(&b.records) {
            assert!(r.recovery_error.unwrap() < 1e-6);
            assert!(r.newton_iterations <= 10);
            assert!(r.quadratic_ratio.map_or(true, |q| q < 10.0), "{:?}", r.history);
            assert!(r.positivity > 0.0);
        }
        let last = a.records.last().unwrap();
        assert_eq!(last.alpha, 1e-2);
        assert!((last.class_factor.unwrap() - bg.flat().dilaton() * 10.0).abs() < 1e-12);
        assert!(state_distance(&bg, &a.state, &b.state).unwrap() < 1e-8);
    }
}

#[test]
fn tight_positivity_floor_stops_gracefully() {
    let mut u = Uniform::new(28);
    let bg = background(cross_plane(8), 2, &mut u);
    let p = problem(&bg, 1e-2, false, &mut u);
    let mut cfg = ContinuationConfig::new(1e-2, 2.5e-3);
    cfg.min_step = 1e-4;
    let base_margin = balanced_core::system::positivity(&bg, &SystemState::base(&bg, 0.0)).unwrap();
    cfg.newton.positivity_floor = base_margin;
    let rep = continue_in_alpha(&bg, &cfg, &SystemState::base(&bg, 0.0), Some(&p)).unwrap();
    assert!(!rep.completed);
    assert!(rep.rejected_steps > 0);
    assert!(rep.alpha_reached < 1e-2);
    assert!(rep.stop_reason.unwrap().contains("underflow"));
}

#[test]
fn invalid_configs_are_rejected() {
    let mut u = Uniform::new(29);
    let bg = background(cross_plane(8), 2, &mut u);
    let base = SystemState::base(&bg, 0.0);
    let mut cfg = ContinuationConfig::new(1e-2, 2.5e-3);
    cfg.alpha_start = 2e-2;
    assert!(matches!(continue_in_alpha(&bg, &cfg, &base, None), Err(Error::InvalidConfig(_))));
    let mut cfg = ContinuationConfig::new(1e-2, 2.5e-3);
    cfg.newton.tol = 0.0;
    assert!(matches!(continue_in_alpha(&bg, &cfg, &base, None), Err(Error::InvalidConfig(_))));
}

#[test]
fn manufactured_forcing_lies_in_target_space_and_scales() {
    let mut u = Uniform::new(30);
    let bg = background(cross_plane(8), 2, &mut u);
    let l = *bg.lattice();
    let su = shape_u(l, 2, &mut u);
    let sb = sample::real_11(l, 1.0, &mut u.source());
    let rho = |amp: f64| {
        let p = make_manufactured(&bg, amp, &su, &sb, None, 1e-2).unwrap();
        let r = p.forcing(&bg, 1e-2).unwrap();
        assert!(r.block.hym.hermitian_defect() < 1e-10);
        assert!(r.block.hym.trace_integral().norm() < 1e-10);
        assert!(r.block.anomaly.del().unwrap().max_abs() < 1e-10);
        assert!(r.block.anomaly.dbar().unwrap().max_abs() < 1e-10);
        r
    };
    assert_eq!(rho(0.0).norm(&bg), 0.0);
    let (a, b, c) = (rho(1e-3), rho(2e-3), rho(4e-3));
    assert!((b.norm(&bg) / a.norm(&bg) - 2.0).abs() < 1e-2);
    // ρ(2a) − 2ρ(a) is second order, so its Richardson ratio approaches 4
    let d1 = b.sub(&a.scale(2.0)).unwrap().norm(&bg);
    let d2 = c.sub(&b.scale(2.0)).unwrap().norm(&bg);
    assert!((d2 / d1 - 4.0).abs() < 0.1, "{}", d2 / d1);
    assert!(matches!(
        make_manufactured(&bg, 1e3, &su, &sb, None, 1e-2),
        Err(Error::NotPositive { .. })
    ));
}

#[test]
fn coupled_manufactured_solve() {
    let mut u = Uniform::new(31);
    let bg = background(cross_plane(8), 2, &mut u);
    let p = problem(&bg, 1e-2, true, &mut u);
    let start = SystemState::base(&bg, 0.0).with_tangent(EndField::zeros(*bg.lattice(), 3).unwrap());
    let cfg = ContinuationConfig::new(1e-2, 5e-3);
    let rep = continue_in_alpha(&bg, &cfg, &start, Some(&p)).unwrap();
    assert!(rep.completed);
    for r in &rep.records {
        assert!(r.recovery_error.unwrap() < 1e-6);
    }
    let f = evaluate(&bg, &rep.state).unwrap();
    assert!(f.tangent.is_some());
    let _ = FormField::zeros(*bg.lattice(), 2, 2).unwrap();
}
