mod common;

use balanced_core::bundle::{
    unitary_frame_curvature, bundle_curvature, conjugate_to_reference, end_inner, exp_metric, lambda_f, lambda_f_of, project_h0, BundleMetric,
    EndField, MatN,
};
use balanced_core::field::Field;
use balanced_core::form::{EndForm, FormField};
use balanced_core::hermitian::HermitianMetric;
use balanced_core::lattice::{Axis, Lattice};
use balanced_core::math::{C64, I};
use balanced_core::sample;
use common::{cross_plane, Uniform};

fn diag(v: &[f64]) -> MatN {
    MatN::from_diagonal(&nalgebra::DVector::from_iterator(v.len(), v.iter().map(|&x| C64::new(x, 0.0))))
}

/// Low-frequency hermitian traceless field, for identities that are exact only
/// up to aliasing of pointwise products.
fn smooth_u(l: Lattice, rank: usize, amp: f64, seed: u64) -> EndField {
    let mut rng = Uniform::new(seed);
    let x = sample::field_in_band(l, rank * rank, 1, amp, true, &mut rng.source());
    project_h0(&EndField::from_field(rank, x).unwrap())
}

fn random_u(l: Lattice, rank: usize, amp: f64, seed: u64) -> EndField {
    let mut u = Uniform::new(seed);
    let f = sample::hermitian_traceless(l, rank, amp, &mut u.source());
    EndField::from_field(rank, f).unwrap()
}

#[test]
fn exponential_metric_basics() {
    let l = cross_plane(8);
    let h = exp_metric(&EndField::zeros(l, 2).unwrap()).unwrap();
    assert!((h.at(5) - MatN::identity(2, 2)).norm() < 1e-15);
    let t = 0.7;
    let u = EndField::from_profile(l, &diag(&[t, -t]), |_| 1.0).unwrap();
    let h = exp_metric(&u).unwrap();
    assert!((h.at(0) - diag(&[t.exp(), (-t).exp()])).norm() < 1e-14);
    let u = random_u(l, 3, 1.0, 1);
    let h = exp_metric(&u).unwrap();
    for s in 0..l.len() {
        assert!((h.at(s).determinant() - C64::new(1.0, 0.0)).norm() < 1e-12);
    }
    let bad = EndField::from_profile(l, &(diag(&[1.0, 0.0]) * I), |_| 1.0).unwrap();
    assert!(exp_metric(&bad).is_err());
}

#[test]
fn constant_metric_is_flat() {
    let l = cross_plane(8);
    let u = EndField::from_profile(l, &diag(&[0.4, -0.4]), |_| 1.0).unwrap();
    assert!(bundle_curvature(&exp_metric(&u).unwrap()).unwrap().max_abs() < 1e-15);
    assert_eq!(bundle_curvature(&BundleMetric::identity(l, 2).unwrap()).unwrap().max_abs(), 0.0);
}

#[test]
fn diagonal_curvature_matches_finite_differences() {
    // u = ε cos x¹ diag(1,−1): (∂_1 H)H⁻¹ = −(ε/2) sin x¹ diag(1,−1),
    // F_{11̄} = −∂_1̄ of that = (ε/4) cos x¹ diag(1,−1).
    let n = 32;
    let l = Lattice::with_axes(n, &[Axis::X1]).unwrap();
    let eps = 0.3;
    let u = EndField::from_profile(l, &diag(&[1.0, -1.0]), |x| eps * x[0].cos()).unwrap();
    let f = bundle_curvature(&exp_metric(&u).unwrap()).unwrap();
    let h = l.periods()[0] / n as f64;
    for s in 0..l.len() {
        let x = l.coordinates(s)[0];
        let theta = |x: f64| -0.5 * eps * x.sin();
        let fd = -0.5 * (theta(x + h) - theta(x - h)) / (2.0 * h);
        let m = f.matrix(0, s);
        assert!((m[(0, 0)].re - fd).abs() < 2.0 * h * h);
        assert!((m[(1, 1)].re + fd).abs() < 2.0 * h * h);
        assert!((m[(0, 0)].re - 0.25 * eps * x.cos()).abs() < 1e-12);
    }
}

#[test]
fn trace_identity() {
    let l = cross_plane(8);
    let mut rng = Uniform::new(2);
    let traceless = random_u(l, 2, 0.8, 3);
    let t = sample::real_field(l, 1, 0.5, true, &mut rng.source());
    let mut scalar = EndField::zeros(l, 2).unwrap();
    for site in 0..l.len() {
        scalar.set_matrix(site, &(MatN::identity(2, 2) * t.at(0, site)));
    }
    let u = traceless.add(&scalar).unwrap();
    let f = bundle_curvature(&exp_metric(&u).unwrap()).unwrap();
    let tr_if = f.trace().scale(I);
    // log det e^u = Tr u
    let tr_u = FormField::from_field(0, 0, u.trace()).unwrap();
    let expect = tr_u.dbar().unwrap().del().unwrap().scale(-I);
    assert!(tr_if.sub(&expect).unwrap().max_abs() < 1e-9);
}

#[test]
fn abelian_curvature() {
    let l = cross_plane(8);
    let mut rng = Uniform::new(4);
    let t = sample::real_field(l, 1, 1.0, true, &mut rng.source());
    let u = EndField::from_field(1, t.clone()).unwrap();
    let f = bundle_curvature(&exp_metric(&u).unwrap()).unwrap();
    let tu = FormField::from_field(0, 0, t).unwrap();
    // F = ∂̄∂u = −∂∂̄u
    let expect = tu.del().unwrap().dbar().unwrap();
    let got = FormField::from_field(1, 1, f.field().clone()).unwrap();
    assert!(got.sub(&expect).unwrap().max_abs() < 1e-10);
}

#[test]
fn lambda_f_wedge_normalization_and_hermiticity() {
    let l = cross_plane(32);
    let mut rng = Uniform::new(5);
    let g = sample::constant_metric(l, &mut rng.source());
    let u = smooth_u(l, 2, 0.5, 6);
    let h = exp_metric(&u).unwrap();
    let f = bundle_curvature(&h).unwrap();
    let lf = lambda_f(&g, &f).unwrap();
    let w = g.kahler_form();
    let w2 = w.wedge(&w).unwrap();
    let w3 = w2.wedge(&w).unwrap();
    let lhs = EndForm::wedge_scalar_left(&w2, &f.scale(I)).unwrap();
    for s in 0..l.len() {
        let rhs = lf.matrix(s) * (w3.field().at(0, s) / 3.0);
        assert!((lhs.matrix(0, s) - rhs).norm() < 1e-10);
        let m = lf.matrix(s) * h.at(s);
        assert!((&m - m.adjoint()).norm() < 1e-10);
    }
}

#[test]
fn conjugation_restores_reference_adjointness() {
    let l = cross_plane(32);
    let g = HermitianMetric::identity(l);
    let u = smooth_u(l, 3, 0.7, 7);
    let a = lambda_f_of(&g, &exp_metric(&u).unwrap()).unwrap();
    assert!(a.hermitian_defect() > 1e-6);
    let b = conjugate_to_reference(&u, &a).unwrap();
    assert!(b.hermitian_defect() < 1e-10);
    let id = EndField::identity(l, 3).unwrap();
    assert!(conjugate_to_reference(&u, &id).unwrap().sub(&id).unwrap().max_abs() < 1e-12);
    let zero = EndField::zeros(l, 3).unwrap();
    assert_eq!(conjugate_to_reference(&zero, &b).unwrap(), b);
    let skew = a.map(|m| m * I);
    assert!(conjugate_to_reference(&u, &skew).is_err());
}

#[test]
fn gauge_projection() {
    let l = cross_plane(8);
    let id = EndField::identity(l, 2).unwrap();
    assert!(project_h0(&id).max_abs() < 1e-15);
    let c = EndField::from_profile(l, &diag(&[1.0, -1.0]), |_| 1.0).unwrap();
    assert!(project_h0(&c).max_abs() < 1e-15);
    let mut rng = Uniform::new(8);
    let x = EndField::from_field(2, sample::field(l, 4, 1.0, false, &mut rng.source())).unwrap();
    let y = EndField::from_field(2, sample::field(l, 4, 1.0, false, &mut rng.source())).unwrap();
    let px = project_h0(&x);
    assert!(project_h0(&px).sub(&px).unwrap().max_abs() < 1e-14);
    let w = Field::from_fn(l, 1, |_, _| C64::new(1.0, 0.0));
    let py = project_h0(&y);
    // orthogonality in the real inner product Re ∫ Tr(u v†)
    let ip = end_inner(&x.sub(&px).unwrap(), &py, &w).unwrap();
    assert!(ip.re.abs() < 1e-10);
    let pu = random_u(l, 2, 1.0, 9);
    let pu = project_h0(&pu);
    assert!(project_h0(&pu).sub(&pu).unwrap().max_abs() < 1e-14);
}


#[test]
fn unitary_frame_curvature_is_the_conjugated_curvature() {
    let l = cross_plane(32);
    let mut rng = Uniform::new(10);
    let g = sample::constant_metric(l, &mut rng.source());
    let u = smooth_u(l, 2, 0.5, 11);
    let a = conjugate_to_reference(&u, &lambda_f_of(&g, &exp_metric(&u).unwrap()).unwrap()).unwrap();
    let b = lambda_f(&g, &unitary_frame_curvature(&u).unwrap()).unwrap();
    let err = a.sub(&b).unwrap().max_abs();
    assert!(err < 1e-9 * b.max_abs(), "{err}");
    // on a coarse lattice the unitary frame stays exactly hermitian and traceless
    let l = cross_plane(8);
    let u = random_u(l, 3, 0.8, 12);
    let b = lambda_f(&HermitianMetric::identity(l), &unitary_frame_curvature(&u).unwrap()).unwrap();
    assert!(b.hermitian_defect() < 1e-14);
    assert!(b.trace().max_abs() < 1e-14);
}
