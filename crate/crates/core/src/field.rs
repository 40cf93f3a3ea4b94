//! Multi-component complex lattice fields and spectral differentiation.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fft::{transform, Plan};
use crate::lattice::{Lattice, Mode};
use crate::math::{sqrt, C64, ZERO};

/// `ncomp` complex lattice functions stored component-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    lattice: Lattice,
    ncomp: usize,
    data: Vec<C64>,
}

/// Which complex derivative to take; the index is 1-based (`1..=3`).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Holomorphic(usize),
    Antiholomorphic(usize),
}

impl Field {
    pub fn zeros(lattice: Lattice, ncomp: usize) -> Field {
        Field { lattice, ncomp, data: alloc::vec![ZERO; ncomp * lattice.len()] }
    }

    pub fn from_data(lattice: Lattice, ncomp: usize, data: Vec<C64>) -> Result<Field> {
        if data.len() != ncomp * lattice.len() {
            return Err(Error::ShapeMismatch { expected: ncomp * lattice.len(), found: data.len() });
        }
        Ok(Field { lattice, ncomp, data })
    }

    /// Build from a closure of `(component, coordinates)`.
    pub fn from_fn(lattice: Lattice, ncomp: usize, mut f: impl FnMut(usize, [f64; 6]) -> C64) -> Field {
        let n = lattice.len();
        let coords: Vec<[f64; 6]> = (0..n).map(|s| lattice.coordinates(s)).collect();
        let mut data = Vec::with_capacity(ncomp * n);
        for c in 0..ncomp {
            for x in &coords {
                data.push(f(c, *x));
            }
        }
        Field { lattice, ncomp, data }
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn ncomp(&self) -> usize {
        self.ncomp
    }

    pub fn sites(&self) -> usize {
        self.lattice.len()
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<C64> {
        self.data
    }

    pub fn component(&self, c: usize) -> &[C64] {
        let n = self.sites();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn component_mut(&mut self, c: usize) -> &mut [C64] {
        let n = self.sites();
        &mut self.data[c * n..(c + 1) * n]
    }

    #[inline]
    pub fn at(&self, c: usize, site: usize) -> C64 {
        self.data[c * self.sites() + site]
    }

    #[inline]
    pub fn set(&mut self, c: usize, site: usize, v: C64) {
        let n = self.sites();
        self.data[c * n + site] = v;
    }

    pub fn check_same(&self, other: &Field) -> Result<()> {
        if self.lattice != other.lattice {
            return Err(Error::LatticeMismatch);
        }
        if self.ncomp != other.ncomp {
            return Err(Error::ShapeMismatch { expected: self.ncomp, found: other.ncomp });
        }
        Ok(())
    }

    pub fn scale(&self, a: C64) -> Field {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v *= a);
        out
    }

    pub fn scale_real(&self, a: f64) -> Field {
        self.scale(C64::new(a, 0.0))
    }

    /// `self + a * other`.
    pub fn axpy(&self, a: C64, other: &Field) -> Field {
        debug_assert!(self.check_same(other).is_ok());
        let mut out = self.clone();
        for (o, x) in out.data.iter_mut().zip(other.data.iter()) {
            *o += a * x;
        }
        out
    }

    pub fn add(&self, other: &Field) -> Field {
        self.axpy(C64::new(1.0, 0.0), other)
    }

    pub fn sub(&self, other: &Field) -> Field {
        self.axpy(C64::new(-1.0, 0.0), other)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).fold(0.0, f64::max).sqrt_or_zero()
    }

    /// Euclidean norm of the raw component array.
    pub fn raw_norm(&self) -> f64 {
        sqrt(self.data.iter().map(|v| v.norm_sqr()).sum())
    }

    /// Forward transform of every component.
    pub fn spectrum(&self) -> Field {
        let mut out = self.clone();
        out.transform_in_place(false);
        out
    }

    /// Inverse of [`Field::spectrum`].
    pub fn from_spectrum(&self) -> Field {
        let mut out = self.clone();
        out.transform_in_place(true);
        out
    }

    fn transform_in_place(&mut self, inverse: bool) {
        let dims = self.lattice.active_axes().len();
        if dims == 0 {
            return;
        }
        let plan = Plan::new(self.lattice.points_per_axis());
        let n = self.sites();
        for c in 0..self.ncomp {
            transform(&plan, dims, &mut self.data[c * n..(c + 1) * n], inverse);
        }
    }

    /// Multiply each component's spectrum by `symbol(mode)` and transform back.
    pub fn apply_symbol(&self, symbol: impl Fn(&Mode) -> C64) -> Field {
        let mut spec = self.spectrum();
        let n = self.sites();
        let modes = self.lattice.modes();
        for c in 0..self.ncomp {
            for (s, m) in modes.iter().enumerate() {
                spec.data[c * n + s] *= symbol(m);
            }
        }
        spec.from_spectrum()
    }

    /// Zero the constant and Nyquist Fourier content of every component.
    pub fn resolved_nonconstant(&self) -> Field {
        self.apply_symbol(|m| if m.is_resolved_nonzero() { C64::new(1.0, 0.0) } else { ZERO })
    }

    /// Zero the Nyquist Fourier content of every component.
    pub fn without_nyquist(&self) -> Field {
        self.apply_symbol(|m| if m.nyquist { ZERO } else { C64::new(1.0, 0.0) })
    }

    /// Lattice mean of each component.
    pub fn means(&self) -> Vec<C64> {
        let n = self.sites() as f64;
        (0..self.ncomp).map(|c| self.component(c).iter().sum::<C64>() / n).collect()
    }

    /// Pointwise complex conjugate.
    pub fn conj(&self) -> Field {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v = v.conj());
        out
    }

    /// Shift every component by whole grid steps along the active axes.
    pub fn shifted(&self, shift: &[usize]) -> Field {
        let mut out = self.clone();
        let n = self.sites();
        for c in 0..self.ncomp {
            for s in 0..n {
                let t = self.lattice.shift_site(s, shift);
                out.data[c * n + t] = self.data[c * n + s];
            }
        }
        out
    }
}

trait SqrtOrZero {
    fn sqrt_or_zero(self) -> f64;
}

impl SqrtOrZero for f64 {
    fn sqrt_or_zero(self) -> f64 {
        if self > 0.0 {
            sqrt(self)
        } else {
            0.0
        }
    }
}

/// `∂_j f` or `∂_k̄ f` by multiplication with the exact Fourier symbol.
pub fn spectral_derivative(f: &Field, direction: Direction) -> Result<Field> {
    match direction {
        Direction::Holomorphic(j) if (1..=3).contains(&j) => Ok(f.apply_symbol(|m| m.holo(j - 1))),
        Direction::Antiholomorphic(j) if (1..=3).contains(&j) => {
            Ok(f.apply_symbol(|m| m.antiholo(j - 1)))
        }
        Direction::Holomorphic(j) | Direction::Antiholomorphic(j) => Err(Error::InvalidDirection(j)),
    }
}
