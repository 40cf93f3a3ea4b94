mod common;

use balanced_core::flat::{hodge_laplacian_flat, l2_inner, FlatKahler};
use balanced_core::form::{contract_lambda, i_del_dbar, FormField};
use balanced_core::hermitian::HermitianMetric;
use balanced_core::lattice::{Axis, Lattice};
use balanced_core::math::{C64, I};
use balanced_core::sample;
use common::{cross_plane, Uniform};

fn background(seed: u64, l: Lattice) -> FlatKahler {
    let mut u = Uniform::new(seed);
    let g = sample::constant_metric(l, &mut u.source());
    FlatKahler::new(&g, Default::default()).unwrap()
}

#[test]
fn del_adjoint_is_the_l2_adjoint() {
    let l = Lattice::with_axes(8, &[Axis::X1, Axis::Y2, Axis::Y3]).unwrap();
    let flat = background(1, l);
    let mut u = Uniform::new(2);
    let w = flat.weight();
    for (p, q) in [(0, 0), (1, 1), (1, 2), (2, 2)] {
        let a = sample::form(l, p, q, 1.0, &mut u.source());
        let b = sample::form(l, p + 1, q, 1.0, &mut u.source());
        let lhs = l2_inner(&a.del().unwrap(), &b, flat.metric(), &w).unwrap();
        let rhs = l2_inner(&a, &flat.del_adjoint(&b).unwrap(), flat.metric(), &w).unwrap();
        assert!((lhs - rhs).norm() < 1e-10 * lhs.norm().max(1.0), "{p},{q}: {lhs} vs {rhs}");
    }
}

#[test]
fn kahler_identity() {
    let l = Lattice::with_axes(8, &[Axis::X1, Axis::Y2, Axis::X3]).unwrap();
    let flat = background(3, l);
    let mut u = Uniform::new(4);
    for (p, q) in [(1, 0), (1, 1), (2, 1), (1, 2), (2, 2), (3, 2)] {
        let eta = sample::form(l, p, q, 1.0, &mut u.source());
        let a = flat.lambda(&eta.dbar().unwrap()).unwrap();
        let b = if q >= 1 { flat.lambda(&eta).unwrap().dbar().unwrap() } else { FormField::zeros(l, p - 1, q).unwrap() };
        let c = flat.del_adjoint(&eta).unwrap().scale(I);
        let r = a.sub(&b).unwrap().add(&c).unwrap();
        assert!(r.max_abs() < 1e-10, "({p},{q}) residual {}", r.max_abs());
    }
}

#[test]
fn laplacian_is_scalar_per_mode() {
    let l = cross_plane(8);
    let flat = background(5, l);
    let mut u = Uniform::new(6);
    let psi = sample::form(l, 2, 2, 1.0, &mut u.source());
    let lap = flat.hodge_laplacian(&psi);
    let scalar = psi.map_symbol(|m| C64::new(flat.laplacian_symbol(m), 0.0));
    assert!(lap.sub(&scalar).unwrap().max_abs() < 1e-12);
    for m in l.modes() {
        assert!(flat.laplacian_symbol(&m) >= 0.0);
    }
}

#[test]
fn laplacian_of_constant_vanishes() {
    let l = cross_plane(8);
    let flat = background(7, l);
    let psi = FormField::constant(l, 2, 2, &[C64::new(1.0, 2.0); 9]).unwrap();
    assert!(hodge_laplacian_flat(flat.metric(), &psi).unwrap().max_abs() < 1e-14);
}

#[test]
fn nonconstant_background_is_rejected() {
    let l = cross_plane(8);
    let mut u = Uniform::new(8);
    let g = sample::smooth_metric(l, 0.1, &mut u.source());
    let psi = FormField::zeros(l, 2, 2).unwrap();
    assert!(hodge_laplacian_flat(&g, &psi).is_err());
}

#[test]
fn ddbar_of_lambda_equals_minus_laplacian_on_closed_forms() {
    let l = Lattice::with_axes(8, &[Axis::X1, Axis::Y2, Axis::X3]).unwrap();
    let flat = background(9, l);
    let mut u = Uniform::new(10);
    let beta = sample::real_11(l, 1.0, &mut u.source());
    let theta = i_del_dbar(&beta).unwrap();
    let lhs = i_del_dbar(&contract_lambda(flat.metric(), &theta).unwrap()).unwrap();
    let rhs = flat.hodge_laplacian(&theta).scale_real(-1.0);
    assert!(lhs.sub(&rhs).unwrap().max_abs() < 1e-10 * theta.max_abs().max(1.0));
}

#[test]
fn identity_metric_symbol() {
    let l = Lattice::with_axes(8, &[Axis::X1, Axis::Y1]).unwrap();
    let flat = FlatKahler::standard(l);
    let idx = l.mode_index(&[1, 2]);
    assert!((flat.laplacian_symbol(&l.mode(idx)) - 0.25 * 5.0).abs() < 1e-15);
    let _ = HermitianMetric::identity(l);
}
