//! Multi-dimensional discrete Fourier transform over the active lattice axes.
//!
//! Forward: `X_m = Σ_j x_j e^{-2πi jm/N}`; inverse carries the `1/N` factor.
//! Power-of-two sizes use an iterative radix-2 kernel, other even sizes a
//! direct sum.

use alloc::vec::Vec;

use crate::math::{cis, C64, TAU, ZERO};

pub(crate) struct Plan {
    n: usize,
    /// `e^{-2πi k/N}` for `k < N`.
    twiddles: Vec<C64>,
    bitrev: Option<Vec<usize>>,
}

impl Plan {
    pub(crate) fn new(n: usize) -> Plan {
        let twiddles = (0..n).map(|k| cis(-TAU * k as f64 / n as f64)).collect();
        let bitrev = n.is_power_of_two().then(|| {
            let bits = n.trailing_zeros();
            (0..n)
                .map(|i| if bits == 0 { 0 } else { i.reverse_bits() >> (usize::BITS - bits) })
                .collect()
        });
        Plan { n, twiddles, bitrev }
    }

    fn twiddle(&self, k: usize, inverse: bool) -> C64 {
        let w = self.twiddles[k % self.n];
        if inverse {
            w.conj()
        } else {
            w
        }
    }

    /// Unnormalized 1D transform in place.
    pub(crate) fn run(&self, line: &mut [C64], scratch: &mut Vec<C64>, inverse: bool) {
        let n = self.n;
        match &self.bitrev {
            Some(rev) => {
                for i in 0..n {
                    let j = rev[i];
                    if i < j {
                        line.swap(i, j);
                    }
                }
                let mut len = 2;
                while len <= n {
                    let stride = n / len;
                    for start in (0..n).step_by(len) {
                        for k in 0..len / 2 {
                            let w = self.twiddle(k * stride, inverse);
                            let a = line[start + k];
                            let b = line[start + k + len / 2] * w;
                            line[start + k] = a + b;
                            line[start + k + len / 2] = a - b;
                        }
                    }
                    len <<= 1;
                }
            }
            None => {
                scratch.clear();
                scratch.extend_from_slice(line);
                for (m, out) in line.iter_mut().enumerate() {
                    let mut acc = ZERO;
                    for (j, &x) in scratch.iter().enumerate() {
                        acc += x * self.twiddle(j * m, inverse);
                    }
                    *out = acc;
                }
            }
        }
    }
}

/// Transform `data` (length `n^dims`, row-major) along every axis.
pub(crate) fn transform(plan: &Plan, dims: usize, data: &mut [C64], inverse: bool) {
    let n = plan.n;
    let total = data.len();
    debug_assert_eq!(total, n.pow(dims as u32));
    let mut line = alloc::vec![ZERO; n];
    let mut scratch = Vec::with_capacity(n);
    for axis in 0..dims {
        // Stride of this axis in row-major order.
        let stride = n.pow((dims - 1 - axis) as u32);
        let block = stride * n;
        for base in (0..total).step_by(block) {
            for offset in 0..stride {
                let start = base + offset;
                for (i, slot) in line.iter_mut().enumerate() {
                    *slot = data[start + i * stride];
                }
                plan.run(&mut line, &mut scratch, inverse);
                for (i, v) in line.iter().enumerate() {
                    data[start + i * stride] = *v;
                }
            }
        }
    }
    if inverse {
        let scale = 1.0 / total as f64;
        for v in data.iter_mut() {
            *v *= scale;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(x: &[C64]) -> Vec<C64> {
        let n = x.len();
        (0..n)
            .map(|m| {
                x.iter()
                    .enumerate()
                    .map(|(j, &v)| v * cis(-TAU * (j * m) as f64 / n as f64))
                    .sum()
            })
            .collect()
    }

    #[test]
    fn radix2_and_direct_match_naive_sum() {
        for &n in &[4usize, 6, 8, 10, 16] {
            let x: Vec<C64> = (0..n)
                .map(|j| C64::new((j as f64 * 0.37).sin(), (j as f64 * 1.3).cos()))
                .collect();
            let plan = Plan::new(n);
            let mut y = x.clone();
            transform(&plan, 1, &mut y, false);
            for (a, b) in y.iter().zip(naive(&x)) {
                assert!((a - b).norm() < 1e-12, "n = {n}");
            }
            transform(&plan, 1, &mut y, true);
            for (a, b) in y.iter().zip(x.iter()) {
                assert!((a - b).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn two_dimensional_single_mode() {
        let n = 8;
        let plan = Plan::new(n);
        let mut data: Vec<C64> = (0..n * n)
            .map(|s| {
                let (i, j) = (s / n, s % n);
                cis(TAU * (2.0 * i as f64 - 1.0 * j as f64) / n as f64)
            })
            .collect();
        transform(&plan, 2, &mut data, false);
        let hit = 2 * n + (n - 1);
        for (s, v) in data.iter().enumerate() {
            let expect = if s == hit { (n * n) as f64 } else { 0.0 };
            assert!((v - C64::new(expect, 0.0)).norm() < 1e-10);
        }
    }
}
