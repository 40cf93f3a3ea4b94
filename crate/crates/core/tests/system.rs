mod common;

use balanced_core::bundle::{project_h0, EndField};
use balanced_core::flat::FlatKahler;
use balanced_core::form::FormField;
use balanced_core::hermitian::{HermitianMetric, HolVolForm};
use balanced_core::lattice::Lattice;
use balanced_core::linearized::{apply_l1, apply_l2, Background, BlockTarget, BlockVector};
use balanced_core::math::C64;
use balanced_core::sample;
use balanced_core::system::{
    chern_connection, connection_curvature, ellipticity_monitor, eval_f, eval_f_coupled, gauge_to_unitary,
    rescale_solution, RescaleMode, SystemState,
};
use balanced_core::Error;
use common::{cross_plane, Uniform};

fn background(l: Lattice, rank: usize, u: &mut Uniform) -> Background {
    let g = sample::constant_metric(l, &mut u.source());
    let omega = HolVolForm::new(C64::new(0.8, 0.3)).unwrap();
    Background::new(FlatKahler::new(&g, omega).unwrap(), rank).unwrap()
}

fn random_u(l: Lattice, rank: usize, amp: f64, u: &mut Uniform) -> EndField {
    let f = sample::hermitian_traceless(l, rank, amp, &mut u.source());
    project_h0(&EndField::from_field(rank, f).unwrap())
}

fn random_state(bg: &Background, alpha: f64, amp: f64, u: &mut Uniform) -> SystemState {
    let l = *bg.lattice();
    let h = random_u(l, bg.rank(), amp, u);
    let beta = sample::real_11(l, amp, &mut u.source());
    SystemState::new(alpha, h, beta).unwrap()
}

#[test]
fn base_point_is_a_zero() {
    let mut u = Uniform::new(0);
    let bg = background(cross_plane(8), 2, &mut u);
    for alpha in [0.0, 0.3] {
        let r = eval_f(&bg, &SystemState::base(&bg, alpha)).unwrap();
        assert!(r.hym_max < 1e-12 && r.anomaly_max < 1e-12, "{} {}", r.hym_max, r.anomaly_max);
        assert!(r.l2() < 1e-12);
    }
}

#[test]
fn zero_u_has_vanishing_first_component() {
    let mut u = Uniform::new(1);
    let bg = background(cross_plane(8), 3, &mut u);
    let l = *bg.lattice();
    let beta = sample::real_11(l, 0.02, &mut u.source());
    let state = SystemState::new(0.0, EndField::zeros(l, 3).unwrap(), beta).unwrap();
    let r = eval_f(&bg, &state).unwrap();
    assert!(r.hym_max < 1e-14);
    assert!(r.anomaly_max > 1e-4);
}

#[test]
fn residual_lies_in_target_space() {
    let mut u = Uniform::new(2);
    let bg = background(cross_plane(8), 2, &mut u);
    for _ in 0..20 {
        let state = random_state(&bg, 0.05, 0.05, &mut u);
        let r = eval_f(&bg, &state).unwrap();
        let (adj, trace) = r.hym_membership();
        assert!(adj < 1e-10 && trace < 1e-10, "{adj} {trace}");
        assert!(r.anomaly.del().unwrap().max_abs() < 1e-9);
        assert!(r.anomaly.dbar().unwrap().max_abs() < 1e-9);
        assert!(r.anomaly.reality_defect() < 1e-9 * r.anomaly_max);
        assert!(state.gauge_defect() < 1e-12);
    }
}

#[test]
fn translation_equivariance() {
    let mut u = Uniform::new(3);
    let bg = background(cross_plane(8), 2, &mut u);
    let state = random_state(&bg, 0.1, 0.05, &mut u);
    let shift = [3, 5];
    let a = eval_f(&bg, &state.shifted(&shift)).unwrap();
    let b = eval_f(&bg, &state).unwrap();
    let d1 = a.hym.density().field().sub(&b.hym.density().field().shifted(&shift)).max_abs();
    let d2 = a.anomaly.sub(&b.anomaly.shifted(&shift)).unwrap().max_abs();
    assert!(d1 < 1e-12 && d2 < 1e-12, "{d1} {d2}");
}

fn fd_error(bg: &Background, dir: &BlockVector, t: f64) -> (f64, f64) {
    let base = SystemState::base(bg, 0.0);
    let plus = eval_f(bg, &base.step(bg, t, dir).unwrap()).unwrap().target();
    let minus = eval_f(bg, &base.step(bg, -t, dir).unwrap()).unwrap().target();
    let fd = plus.sub(&minus).unwrap().scale(0.5 / t);
    let exact = BlockTarget { hym: apply_l1(bg, &dir.u).unwrap(), anomaly: apply_l2(bg, &dir.theta).unwrap() };
    let d = fd.sub(&exact).unwrap();
    (d.hym.max_abs(), d.anomaly.max_abs())
}

#[test]
fn linearization_at_origin_matches_blocks() {
    let mut u = Uniform::new(4);
    let bg = background(cross_plane(8), 2, &mut u);
    let l = *bg.lattice();
    let beta = sample::real_11(l, 1.0, &mut u.source());
    let theta = balanced_core::form::i_del_dbar(&beta).unwrap();
    let dir = BlockVector { u: random_u(l, 2, 1.0, &mut u), theta };
    let steps = [1e-2, 5e-3, 2.5e-3];
    let errs: Vec<(f64, f64)> = steps.iter().map(|&t| fd_error(&bg, &dir, t)).collect();
    for w in errs.windows(2) {
        let (a, b) = (w[0].0.max(w[0].1), w[1].0.max(w[1].1));
        let order = (a / b).log2();
        assert!((order - 2.0).abs() < 0.1, "order {order} ({a:e} → {b:e})");
    }
    // at α′ = 0 the anomaly is i∂∂̄ of a cofactor matrix, quadratic in Θ,
    // so the centered difference is exact up to rounding
    assert!(errs.iter().all(|e| e.1 < 1e-10));
    // the (2,1) block: anomaly response to u alone
    let only_u = BlockVector { u: dir.u.clone(), theta: FormField::zeros(l, 2, 2).unwrap() };
    let base = SystemState::base(&bg, 0.0);
    for t in steps {
        let r = eval_f(&bg, &base.step(&bg, t, &only_u).unwrap()).unwrap();
        assert!(r.anomaly_max < 1e-14);
    }
}

#[test]
fn coupled_base_point_and_cancellation() {
    let mut u = Uniform::new(5);
    let bg = background(cross_plane(8), 3, &mut u);
    let l = *bg.lattice();
    let base = SystemState::base(&bg, 0.2).with_tangent(EndField::zeros(l, 3).unwrap());
    let r = eval_f_coupled(&bg, &base).unwrap();
    assert!(r.l2() < 1e-12 && r.anomaly_max < 1e-12);

    let h = random_u(l, 3, 0.05, &mut u);
    let state = SystemState::new(0.2, h.clone(), FormField::zeros(l, 1, 1).unwrap())
        .unwrap()
        .with_tangent(h);
    let r = eval_f_coupled(&bg, &state).unwrap();
    let t = r.tangent_hym.as_ref().unwrap();
    assert!(t.sub(&r.hym).unwrap().max_abs() < 1e-15);
    assert!(r.anomaly_max < 1e-14, "{}", r.anomaly_max);
    assert!(r.hym_max > 1e-4);

    let missing = SystemState::base(&bg, 0.2);
    assert!(matches!(eval_f_coupled(&bg, &missing), Err(Error::InvalidConfig(_))));
}

#[test]
fn gauge_to_unitary_special_cases() {
    let mut u = Uniform::new(6);
    let l = cross_plane(8);
    let h = sample::smooth_metric(l, 0.1, &mut u.source());
    let id = gauge_to_unitary(&h, &h).unwrap();
    let c = 1.7;
    let scaled = gauge_to_unitary(&h, &h.scaled(c * c).unwrap()).unwrap();
    for s in 0..l.len() {
        let e = id.at(s) - nalgebra::DMatrix::<C64>::identity(3, 3);
        assert!(e.iter().all(|z| z.norm() < 1e-12));
        let e = scaled.at(s) - nalgebra::DMatrix::<C64>::identity(3, 3) * C64::new(c, 0.0);
        assert!(e.iter().all(|z| z.norm() < 1e-12));
    }
}

#[test]
fn gauge_to_unitary_reconstructs_and_conjugates_curvature() {
    let mut u = Uniform::new(7);
    let l = cross_plane(32);
    for _ in 0..3 {
        let h = sample::smooth_metric_in_band(l, 1, 0.1, &mut u.source());
        let g = sample::smooth_metric_in_band(l, 1, 0.1, &mut u.source());
        let sigma = gauge_to_unitary(&h, &g).unwrap();
        assert!(sigma.reconstruction_defect(&h, &g) < 1e-12);
        let a = chern_connection(&h).unwrap();
        let zero = balanced_core::form::EndForm::zeros(l, 0, 1, 3).unwrap();
        let f = connection_curvature(&a, &zero).unwrap();
        let (ta, tb) = sigma.transport(&a, &zero).unwrap();
        let ft = connection_curvature(&ta, &tb).unwrap();
        let d = ft.sub(&sigma.conjugate(&f).unwrap()).unwrap().max_abs();
        assert!(d < 1e-9, "{d:e}");
        assert!(f.max_abs() > 1e-3);
    }
}

#[test]
fn ellipticity_monitor_scaling() {
    let mut u = Uniform::new(8);
    let bg = background(cross_plane(8), 2, &mut u);
    assert_eq!(ellipticity_monitor(&bg, &SystemState::base(&bg, 0.5)).unwrap(), 0.0);
    let s = random_state(&bg, 0.0, 0.05, &mut u);
    assert_eq!(ellipticity_monitor(&bg, &s).unwrap(), 0.0);
    let m1 = ellipticity_monitor(&bg, &s.with_alpha(0.01)).unwrap();
    let m2 = ellipticity_monitor(&bg, &s.with_alpha(0.02)).unwrap();
    assert!(m1 > 0.0);
    assert!((m2 - 2.0 * m1).abs() < 1e-14 * m2);
}

#[test]
fn rescaling_covariance_and_class_factor() {
    let mut u = Uniform::new(9);
    let bg = background(cross_plane(8), 2, &mut u);
    let state = random_state(&bg, 0.25, 0.05, &mut u);
    let rep = rescale_solution(&bg, &state, RescaleMode::AlphaToClass).unwrap();
    assert_eq!(rep.alpha, 1.0);
    assert!(rep.covariance_defect < 1e-9, "{}", rep.covariance_defect);
    assert_eq!(rep.class_factor, 2.0 * bg.flat().dilaton());
    assert!(rep.class_defect < 1e-12);

    let unit = rescale_solution(&bg, &state.with_alpha(1.0), RescaleMode::AlphaToClass).unwrap();
    assert_eq!(unit.scale, 1.0);
    assert!(unit.rescaled_anomaly.sub(&unit.original_anomaly).unwrap().max_abs() < 1e-15);

    let back = rescale_solution(&bg, &state.with_alpha(1.0), RescaleMode::ClassToAlpha { alpha: 0.25 }).unwrap();
    assert!(back.covariance_defect < 1e-9);
    assert!(matches!(
        rescale_solution(&bg, &state.with_alpha(0.0), RescaleMode::AlphaToClass),
        Err(Error::ZeroAlpha)
    ));
}

#[test]
fn identity_metric_is_a_fixture() {
    let l = cross_plane(8);
    let g = HermitianMetric::identity(l);
    assert!(gauge_to_unitary(&g, &g).unwrap().reconstruction_defect(&g, &g) < 1e-15);
}
