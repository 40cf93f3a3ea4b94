mod common;

use balanced_core::flat::{l2_inner, FlatKahler};
use balanced_core::form::{contract_lambda, i_del_dbar, integrate, raw_contraction, FormField, TopForm};
use balanced_core::hermitian::{four_index, HermitianMetric, Mat3};
use balanced_core::lattice::{Axis, Lattice};
use balanced_core::math::{C64, I, TAU};
use balanced_core::sample;
use common::{cross_plane, max_diff, Uniform};

fn lattice3() -> Lattice {
    Lattice::with_axes(8, &[Axis::X1, Axis::Y2, Axis::X3]).unwrap()
}

#[test]
fn del_and_dbar_square_to_zero_and_anticommute() {
    let l = lattice3();
    let mut u = Uniform::new(1);
    for (p, q) in [(0, 0), (1, 0), (0, 1), (1, 1), (0, 2)] {
        let b = sample::form(l, p, q, 1.0, &mut u.source());
        if q + 2 <= 3 {
            assert!(b.dbar().unwrap().dbar().unwrap().max_abs() < 1e-12);
        }
        if p + 2 <= 3 {
            assert!(b.del().unwrap().del().unwrap().max_abs() < 1e-12);
        }
        let a = b.dbar().unwrap().del().unwrap();
        let c = b.del().unwrap().dbar().unwrap();
        assert!(a.add(&c).unwrap().max_abs() < 1e-12);
    }
}

#[test]
fn leibniz_rule() {
    let l = lattice3();
    let mut u = Uniform::new(2);
    let a = sample::form(l, 1, 0, 1.0, &mut u.source());
    let b = sample::form(l, 0, 1, 1.0, &mut u.source());
    let lhs = a.wedge(&b).unwrap().del().unwrap();
    let rhs = a.del().unwrap().wedge(&b).unwrap().sub(&a.wedge(&b.del().unwrap()).unwrap()).unwrap();
    assert!(lhs.sub(&rhs).unwrap().max_abs() < 1e-9);
}

#[test]
fn i_del_dbar_of_single_mode_matches_hand_expansion() {
    // β = cos(x¹)·i dz²∧dz̄², with ∂_{z¹}∂_{z̄¹} cos x¹ = −¼ cos x¹, so
    // i∂∂̄β = ¼ cos x¹ dz¹∧dz̄¹∧dz²∧dz̄² = −¼ cos x¹ dz¹∧dz²∧dz̄¹∧dz̄².
    let l = Lattice::with_axes(8, &[Axis::X1]).unwrap();
    let zero = C64::new(0.0, 0.0);
    let beta = FormField::from_fn(l, 1, 1, |h, a, x| if h == 0b010 && a == 0b010 { I * x[0].cos() } else { zero })
        .unwrap();
    let out = i_del_dbar(&beta).unwrap();
    let expect =
        FormField::from_fn(l, 2, 2, |h, a, x| if h == 0b011 && a == 0b011 { C64::new(-0.25 * x[0].cos(), 0.0) } else { zero })
            .unwrap();
    assert!(out.sub(&expect).unwrap().max_abs() < 1e-13);
    assert!(out.reality_defect() < 1e-14);
    assert!(out.closedness_defect() < 1e-13);
    assert!(out.field().means().iter().all(|m| m.norm() < 1e-15));
}

#[test]
fn i_del_dbar_rejects_complex_input() {
    let l = lattice3();
    let mut u = Uniform::new(3);
    let b = sample::form(l, 1, 1, 1.0, &mut u.source());
    assert!(i_del_dbar(&b).is_err());
}

#[test]
fn omega_squared_components() {
    let l = Lattice::with_axes(4, &[Axis::X1]).unwrap();
    let mut u = Uniform::new(4);
    for _ in 0..10 {
        let g = sample::positive_matrix(&mut u.source());
        let m = HermitianMetric::constant(l, g).unwrap();
        let w = m.kahler_form();
        let w2 = w.wedge(&w).unwrap();
        let c = w2.at_site(0);
        for s in 0..3 {
            for r in 0..3 {
                for j in 0..3 {
                    for k in 0..3 {
                        let expect = -g[(s, r)] * g[(j, k)] * 2.0 + g[(j, r)] * g[(s, k)] * 2.0;
                        assert!((four_index(&c, s, r, j, k) - expect).norm() < 1e-12);
                    }
                }
            }
        }
    }
}

#[test]
fn omega_wedge_delta_omega_components() {
    let l = Lattice::with_axes(4, &[Axis::X1]).unwrap();
    let g = Mat3::from_diagonal(&nalgebra::Vector3::new(C64::new(1.5, 0.0), C64::new(0.7, 0.0), C64::new(2.0, 0.0)));
    let dg = Mat3::from_diagonal(&nalgebra::Vector3::new(C64::new(0.3, 0.0), C64::new(-0.2, 0.0), C64::new(0.9, 0.0)));
    let w = HermitianMetric::constant(l, g).unwrap().kahler_form();
    let dw = FormField::constant(l, 1, 1, &(0..9).map(|c| I * dg[(c / 3, c % 3)]).collect::<Vec<_>>()).unwrap();
    let c = w.wedge(&dw).unwrap().at_site(0);
    for s in 0..3 {
        for r in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    let expect = -g[(s, r)] * dg[(j, k)] + g[(j, r)] * dg[(s, k)];
                    let sym = -g[(j, k)] * dg[(s, r)] + g[(s, k)] * dg[(j, r)];
                    assert!((four_index(&c, s, r, j, k) - (expect + sym)).norm() < 1e-12);
                }
            }
        }
    }
}

#[test]
fn raw_contraction_of_omega_squared_is_minus_four_g() {
    let l = cross_plane(8);
    let mut u = Uniform::new(5);
    let m = sample::smooth_metric(l, 0.2, &mut u.source());
    let w = m.kahler_form();
    let raw = raw_contraction(&m, &w.wedge(&w).unwrap()).unwrap();
    let expect = m.to_field().scale_real(-4.0);
    assert!(max_diff(raw.data(), expect.data()) < 1e-12);
    let lam = contract_lambda(&m, &w.wedge(&w).unwrap()).unwrap();
    assert!(lam.sub(&w.scale_real(4.0)).unwrap().max_abs() < 1e-12);
}

#[test]
fn form_valued_lambda_is_the_adjoint_of_lefschetz() {
    let l = Lattice::with_axes(4, &[Axis::X1]).unwrap();
    let mut u = Uniform::new(6);
    let m = sample::constant_metric(l, &mut u.source());
    let flat = FlatKahler::new(&m, Default::default()).unwrap();
    let psi = sample::form(l, 2, 2, 1.0, &mut u.source());
    let a = contract_lambda(&m, &psi).unwrap();
    let b = flat.lambda(&psi).unwrap();
    assert!(a.sub(&b).unwrap().max_abs() < 1e-12 * psi.max_abs().max(1.0));
}

#[test]
fn graded_commutativity_and_associativity() {
    let l = lattice3();
    let mut u = Uniform::new(7);
    let a = sample::form(l, 1, 0, 1.0, &mut u.source());
    let b = sample::form(l, 1, 1, 1.0, &mut u.source());
    let c = sample::form(l, 0, 1, 1.0, &mut u.source());
    // deg a = 1, deg c = 1
    assert!(a.wedge(&c).unwrap().add(&c.wedge(&a).unwrap()).unwrap().max_abs() < 1e-13);
    assert!(a.wedge(&b).unwrap().sub(&b.wedge(&a).unwrap()).unwrap().max_abs() < 1e-13);
    let l1 = a.wedge(&b).unwrap().wedge(&c).unwrap();
    let r1 = a.wedge(&b.wedge(&c).unwrap()).unwrap();
    assert!(l1.sub(&r1).unwrap().max_abs() < 1e-13);
}

#[test]
fn unit_torus_volume() {
    let l = Lattice::full(4).unwrap();
    let m = HermitianMetric::identity(l);
    let w = m.kahler_form();
    let w3 = w.wedge(&w).unwrap().wedge(&w).unwrap().scale_real(1.0 / 6.0);
    let vol = integrate(&TopForm::from_form(&w3).unwrap());
    assert!((vol.re - 8.0 * TAU.powi(6)).abs() < 1e-8 * TAU.powi(6));
    assert!(vol.im.abs() < 1e-9);

    let l = Lattice::with_axes(4, &[Axis::X1]).unwrap().with_periods([1.0, 2.0, 3.0, 1.5, 2.5, 0.5]).unwrap();
    let mut u = Uniform::new(8);
    let g = sample::constant_metric(l, &mut u.source());
    let w = g.kahler_form();
    let w3 = w.wedge(&w).unwrap().wedge(&w).unwrap().scale_real(1.0 / 6.0);
    let vol = integrate(&TopForm::from_form(&w3).unwrap());
    let expect = 8.0 * g.det(0) * (1.0 * 2.0 * 3.0 * 1.5 * 2.5 * 0.5);
    assert!((vol.re - expect).abs() < 1e-12 * expect);
}

#[test]
fn exact_top_forms_integrate_to_zero() {
    let l = lattice3();
    let mut u = Uniform::new(9);
    let b = sample::form(l, 3, 2, 1.0, &mut u.source());
    let t = TopForm::from_form(&b.dbar().unwrap()).unwrap();
    assert!(integrate(&t).norm() < 1e-10);
}

#[test]
fn l2_inner_is_hermitian_positive() {
    let l = lattice3();
    let mut u = Uniform::new(10);
    let g = sample::smooth_metric(l, 0.2, &mut u.source());
    let w = TopForm::constant(l, 1.3);
    let a = sample::form(l, 2, 1, 1.0, &mut u.source());
    let b = sample::form(l, 2, 1, 1.0, &mut u.source());
    let ab = l2_inner(&a, &b, &g, &w).unwrap();
    let ba = l2_inner(&b, &a, &g, &w).unwrap();
    assert!((ab - ba.conj()).norm() < 1e-10 * ab.norm());
    let aa = l2_inner(&a, &a, &g, &w).unwrap();
    assert!(aa.re > 0.0 && aa.im.abs() < 1e-10 * aa.re);
    let z = FormField::zeros(l, 2, 1).unwrap();
    assert_eq!(l2_inner(&z, &z, &g, &w).unwrap(), C64::new(0.0, 0.0));
}
