//! Band-limited test fields driven by a caller-supplied source of uniform
//! numbers in `[-1, 1]`, so the crate stays independent of any RNG.

use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::field::Field;
use crate::form::FormField;
use crate::hermitian::{HermitianMetric, Mat3};
use crate::lattice::Lattice;
use crate::math::C64;

/// Largest mode number used for random fields: `max(N/4 − 1, 1)`.
pub fn band_limit(lattice: &Lattice) -> i64 {
    ((lattice.points_per_axis() / 4) as i64 - 1).max(1)
}

fn complex(next: &mut impl FnMut() -> f64) -> C64 {
    C64::new(next(), next())
}

/// Random complex field with `ncomp` components, Fourier support in
/// `|m| ≤ band_limit` on every active axis and no constant mode when
/// `mean_zero`.
pub fn field(lattice: Lattice, ncomp: usize, amp: f64, mean_zero: bool, next: &mut impl FnMut() -> f64) -> Field {
    field_in_band(lattice, ncomp, band_limit(&lattice), amp, mean_zero, next)
}

/// As [`field`] with an explicit band `|m| ≤ b`.
pub fn field_in_band(
    lattice: Lattice,
    ncomp: usize,
    b: i64,
    amp: f64,
    mean_zero: bool,
    next: &mut impl FnMut() -> f64,
) -> Field {
    let n = lattice.len();
    let mut spec = Field::zeros(lattice, ncomp);
    let count = (0..n).filter(|&s| lattice.mode_numbers(s).iter().all(|m| m.abs() <= b)).count() as f64;
    for c in 0..ncomp {
        for s in 0..n {
            let m = lattice.mode_numbers(s);
            if m.iter().all(|k| k.abs() <= b) && !(mean_zero && m.iter().all(|&k| k == 0)) {
                spec.set(c, s, complex(next) * (amp * n as f64 / count));
            }
        }
    }
    spec.from_spectrum()
}

pub fn real_field(lattice: Lattice, ncomp: usize, amp: f64, mean_zero: bool, next: &mut impl FnMut() -> f64) -> Field {
    let f = field(lattice, ncomp, amp, mean_zero, next);
    f.add(&f.conj()).scale_real(0.5)
}

pub fn form(lattice: Lattice, p: usize, q: usize, amp: f64, next: &mut impl FnMut() -> f64) -> FormField {
    let f = field(lattice, crate::basis::form_dim(p, q), amp, false, next);
    FormField::from_field(p, q, f).expect("bidegree in range")
}

/// Random real `(1,1)`-form with no constant mode.
pub fn real_11(lattice: Lattice, amp: f64, next: &mut impl FnMut() -> f64) -> FormField {
    let f = field(lattice, 9, amp, true, next);
    FormField::from_field(1, 1, f).expect("(1,1)").real_part()
}

/// Random positive hermitian `3×3` matrix with eigenvalues in roughly `[0.5, 3]`.
pub fn positive_matrix(next: &mut impl FnMut() -> f64) -> Mat3 {
    let a = Mat3::from_fn(|_, _| complex(next) * 0.5);
    a * a.adjoint() + Mat3::identity() * C64::new(0.5, 0.0)
}

pub fn constant_metric(lattice: Lattice, next: &mut impl FnMut() -> f64) -> HermitianMetric {
    HermitianMetric::constant(lattice, positive_matrix(next)).expect("positive by construction")
}

/// `g₀ + amp·h(x)` with `g₀` random positive and `h` a band-limited hermitian field.
pub fn smooth_metric(lattice: Lattice, amp: f64, next: &mut impl FnMut() -> f64) -> HermitianMetric {
    smooth_metric_in_band(lattice, band_limit(&lattice), amp, next)
}

/// As [`smooth_metric`] with perturbation modes `|m| ≤ b`.
pub fn smooth_metric_in_band(lattice: Lattice, b: i64, amp: f64, next: &mut impl FnMut() -> f64) -> HermitianMetric {
    let g0 = positive_matrix(next);
    let h = field_in_band(lattice, 9, b, amp, true, next);
    let g: Vec<Mat3> = (0..lattice.len())
        .map(|s| {
            let m = Mat3::from_fn(|j, k| h.at(3 * j + k, s));
            g0 + (m + m.adjoint()) * C64::new(0.5, 0.0)
        })
        .collect();
    HermitianMetric::new(lattice, g).expect("small perturbation of a positive matrix")
}

/// Random hermitian traceless mean-zero endomorphism field, row-major `rank²` components.
pub fn hermitian_traceless(lattice: Lattice, rank: usize, amp: f64, next: &mut impl FnMut() -> f64) -> Field {
    let x = field(lattice, rank * rank, amp, true, next);
    let mut out = Field::zeros(lattice, rank * rank);
    for s in 0..lattice.len() {
        let m = DMatrix::from_fn(rank, rank, |a, b| x.at(a * rank + b, s));
        let mut h = (&m + m.adjoint()) * C64::new(0.5, 0.0);
        let tr = h.trace() / C64::new(rank as f64, 0.0);
        for a in 0..rank {
            h[(a, a)] -= tr;
        }
        for a in 0..rank {
            for b in 0..rank {
                out.set(a * rank + b, s, h[(a, b)]);
            }
        }
    }
    out
}

/// Random constant hermitian traceless matrix.
pub fn hermitian_traceless_matrix(rank: usize, next: &mut impl FnMut() -> f64) -> DMatrix<C64> {
    let m = DMatrix::from_fn(rank, rank, |_, _| complex(next));
    let mut h = (&m + m.adjoint()) * C64::new(0.5, 0.0);
    let tr = h.trace() / C64::new(rank as f64, 0.0);
    for a in 0..rank {
        h[(a, a)] -= tr;
    }
    h
}

