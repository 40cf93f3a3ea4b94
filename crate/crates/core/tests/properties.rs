mod common;

use balanced_core::bundle::{project_h0, EndField};
use balanced_core::flat::FlatKahler;
use balanced_core::form::i_del_dbar;
use balanced_core::hermitian::{balanced_form, sqrt_positive_22, HolVolForm};
use balanced_core::lattice::{Axis, Lattice};
use balanced_core::linearized::{apply_block, apply_block_inverse, Background, BlockVector};
use balanced_core::math::C64;
use balanced_core::sample;
use balanced_core::system::{eval_f, SystemState};
use common::Uniform;
use proptest::prelude::*;

fn lattice(n: usize, pair: usize) -> Lattice {
    let axes = [[Axis::X1, Axis::Y1], [Axis::X1, Axis::Y2], [Axis::Y1, Axis::X3]][pair];
    Lattice::with_axes(n, &axes).unwrap()
}

fn background(l: Lattice, rank: usize, u: &mut Uniform) -> Background {
    let g = sample::constant_metric(l, &mut u.source());
    let f = HolVolForm::new(C64::new(u.next() + 1.5, u.next())).unwrap();
    Background::new(FlatKahler::new(&g, f).unwrap(), rank).unwrap()
}

fn state(bg: &Background, alpha: f64, u: &mut Uniform) -> SystemState {
    let l = *bg.lattice();
    let h = sample::hermitian_traceless(l, bg.rank(), 0.05, &mut u.source());
    let h = project_h0(&EndField::from_field(bg.rank(), h).unwrap());
    SystemState::new(alpha, h, sample::real_11(l, 0.05, &mut u.source())).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn dbar_and_del_square_to_zero(seed in any::<u64>(), pair in 0usize..3, p in 0usize..2, q in 0usize..2) {
        let mut u = Uniform::new(seed);
        let f = sample::form(lattice(8, pair), p, q, 1.0, &mut u.source());
        prop_assert!(f.dbar().unwrap().dbar().unwrap().max_abs() < 1e-12);
        prop_assert!(f.del().unwrap().del().unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn square_root_is_homogeneous_of_degree_two(seed in any::<u64>(), c in 0.1f64..10.0) {
        let mut u = Uniform::new(seed);
        let l = lattice(4, 0);
        let omega = HolVolForm::new(C64::new(1.0, u.next())).unwrap();
        let g = sample::constant_metric(l, &mut u.source());
        let psi = balanced_form(&g, &omega).unwrap();
        let a = sqrt_positive_22(&psi.scale_real(c), &omega).unwrap();
        let b = sqrt_positive_22(&psi, &omega).unwrap();
        for s in 0..l.len() {
            let d = (a.at(s) - b.at(s) * C64::new(c * c, 0.0)).norm();
            prop_assert!(d < 1e-12 * c * c * b.at(s).norm());
        }
    }

    #[test]
    fn gauge_projection_is_idempotent(seed in any::<u64>(), rank in 1usize..5) {
        let mut u = Uniform::new(seed);
        let f = sample::field(lattice(8, 1), rank * rank, 1.0, false, &mut u.source());
        let p = project_h0(&EndField::from_field(rank, f).unwrap());
        prop_assert!(project_h0(&p).sub(&p).unwrap().max_abs() < 1e-15);
        prop_assert!(p.hermitian_defect() < 1e-15);
    }

    #[test]
    fn residual_stays_in_target_space(seed in any::<u64>(), pair in 0usize..3, alpha in 0.0f64..0.2) {
        let mut u = Uniform::new(seed);
        let bg = background(lattice(8, pair), 2, &mut u);
        let r = eval_f(&bg, &state(&bg, alpha, &mut u)).unwrap();
        let (adj, trace) = r.hym_membership();
        prop_assert!(adj < 1e-10 && trace < 1e-10);
        prop_assert!(r.anomaly.del().unwrap().max_abs() < 1e-9);
    }

    #[test]
    fn residual_is_translation_equivariant(seed in any::<u64>(), a in 0usize..8, b in 0usize..8) {
        let mut u = Uniform::new(seed);
        let bg = background(lattice(8, 1), 2, &mut u);
        let s = state(&bg, 0.1, &mut u);
        let x = eval_f(&bg, &s.shifted(&[a, b])).unwrap();
        let y = eval_f(&bg, &s).unwrap();
        prop_assert!(x.anomaly.sub(&y.anomaly.shifted(&[a, b])).unwrap().max_abs() < 1e-12);
        prop_assert!(x.hym.density().field().sub(&y.hym.density().field().shifted(&[a, b])).max_abs() < 1e-12);
    }

    #[test]
    fn block_inverse_inverts(seed in any::<u64>(), rank in 1usize..5) {
        let mut u = Uniform::new(seed);
        let bg = background(lattice(8, 1), rank, &mut u);
        let l = *bg.lattice();
        let h = project_h0(&EndField::from_field(rank, sample::hermitian_traceless(l, rank, 1.0, &mut u.source())).unwrap());
        let theta = i_del_dbar(&sample::real_11(l, 1.0, &mut u.source())).unwrap();
        let x = BlockVector { u: h, theta };
        let y = apply_block_inverse(&bg, &apply_block(&bg, &x).unwrap()).unwrap();
        prop_assert!(y.sub(&x).unwrap().max_abs() < 1e-9 * x.max_abs().max(1e-300));
    }
}
