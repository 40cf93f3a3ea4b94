//! Seeded uniform source feeding the core samplers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Uniform(ChaCha8Rng);

impl Uniform {
    pub fn new(seed: u64) -> Uniform {
        Uniform(ChaCha8Rng::seed_from_u64(seed))
    }

    /// Independent stream for a named sub-task.
    pub fn derived(seed: u64, stream: u64) -> Uniform {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        r.set_stream(stream);
        Uniform(r)
    }

    /// Uniform in `[-1, 1)`.
    pub fn next(&mut self) -> f64 {
        self.0.gen_range(-1.0..1.0)
    }

    pub fn source(&mut self) -> impl FnMut() -> f64 + '_ {
        move || self.next()
    }
}
