#![allow(dead_code)]

use balanced_core::lattice::{Axis, Lattice};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Uniform(ChaCha8Rng);

impl Uniform {
    pub fn new(seed: u64) -> Uniform {
        Uniform(ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn next(&mut self) -> f64 {
        self.0.gen_range(-1.0..1.0)
    }

    pub fn source(&mut self) -> impl FnMut() -> f64 + '_ {
        move || self.next()
    }
}

/// Two active axes spanning the first complex direction.
pub fn plane(n: usize) -> Lattice {
    Lattice::with_axes(n, &[Axis::X1, Axis::Y1]).unwrap()
}

/// Two active axes in different complex directions, so mixed derivatives appear.
pub fn cross_plane(n: usize) -> Lattice {
    Lattice::with_axes(n, &[Axis::X1, Axis::Y2]).unwrap()
}

pub fn max_diff(a: &[balanced_core::C64], b: &[balanced_core::C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}
