//! Periodic lattice on the real 6-torus with the pairing `z^j = x^j + i y^j`.
//!
//! Only active axes are stored. A field is constant along every inactive axis,
//! so its values live on an `N^a` grid where `a` is the number of active axes
//! (row-major, first active axis slowest).

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{C64, TAU};

/// Real axis labels; axis `2(j-1)` is `x^j`, axis `2(j-1)+1` is `y^j`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    X1,
    Y1,
    X2,
    Y2,
    X3,
    Y3,
}

impl Axis {
    pub const ALL: [Axis; 6] = [Axis::X1, Axis::Y1, Axis::X2, Axis::Y2, Axis::X3, Axis::Y3];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Axis> {
        Axis::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        ["x1", "y1", "x2", "y2", "x3", "y3"][self as usize]
    }

    pub fn parse(s: &str) -> Option<Axis> {
        Axis::ALL.iter().copied().find(|a| a.name() == s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Lattice {
    points: usize,
    periods: [f64; 6],
    active: [bool; 6],
}

/// One Fourier mode of the lattice.
#[derive(Clone, Copy, Debug)]
pub struct Mode {
    /// Wavevector per real axis; zero on inactive axes.
    pub k: [f64; 6],
    /// Wavevector with Nyquist entries zeroed, used for derivative symbols.
    pub k_diff: [f64; 6],
    pub nyquist: bool,
    pub zero: bool,
}

impl Mode {
    /// Symbol of `∂/∂z^j` (0-based `j`).
    #[inline]
    pub fn holo(&self, j: usize) -> C64 {
        C64::new(0.5 * self.k_diff[2 * j + 1], 0.5 * self.k_diff[2 * j])
    }

    /// Symbol of `∂/∂z̄^j` (0-based `j`).
    #[inline]
    pub fn antiholo(&self, j: usize) -> C64 {
        C64::new(-0.5 * self.k_diff[2 * j + 1], 0.5 * self.k_diff[2 * j])
    }

    pub fn holo_vec(&self) -> [C64; 3] {
        [self.holo(0), self.holo(1), self.holo(2)]
    }

    pub fn antiholo_vec(&self) -> [C64; 3] {
        [self.antiholo(0), self.antiholo(1), self.antiholo(2)]
    }

    /// A mode carried by the resolved discrete space: not constant, no Nyquist index.
    pub fn is_resolved_nonzero(&self) -> bool {
        !self.zero && !self.nyquist
    }
}

impl Lattice {
    pub fn new(points: usize, periods: [f64; 6], active: [bool; 6]) -> Result<Self> {
        if points < 4 || points % 2 != 0 {
            return Err(Error::InvalidLattice("points per axis must be even and at least 4"));
        }
        if periods.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
            return Err(Error::InvalidLattice("periods must be positive and finite"));
        }
        Ok(Lattice { points, periods, active })
    }

    /// All six axes active, periods `2π`.
    pub fn full(points: usize) -> Result<Self> {
        Lattice::new(points, [TAU; 6], [true; 6])
    }

    /// Periods `2π`, only the listed axes active.
    pub fn with_axes(points: usize, axes: &[Axis]) -> Result<Self> {
        let mut active = [false; 6];
        for a in axes {
            active[a.index()] = true;
        }
        Lattice::new(points, [TAU; 6], active)
    }

    pub fn with_periods(mut self, periods: [f64; 6]) -> Result<Self> {
        self.periods = periods;
        Lattice::new(self.points, self.periods, self.active)
    }

    pub fn points_per_axis(&self) -> usize {
        self.points
    }

    pub fn periods(&self) -> [f64; 6] {
        self.periods
    }

    pub fn active(&self) -> [bool; 6] {
        self.active
    }

    pub fn is_active(&self, axis: Axis) -> bool {
        self.active[axis.index()]
    }

    pub fn active_axes(&self) -> Vec<usize> {
        (0..6).filter(|&a| self.active[a]).collect()
    }

    pub fn active_mask(&self) -> u8 {
        (0..6).fold(0u8, |m, a| if self.active[a] { m | (1 << a) } else { m })
    }

    pub fn from_mask(points: usize, periods: [f64; 6], mask: u8) -> Result<Self> {
        let mut active = [false; 6];
        for (a, slot) in active.iter_mut().enumerate() {
            *slot = mask & (1 << a) != 0;
        }
        Lattice::new(points, periods, active)
    }

    /// Number of stored sites.
    pub fn len(&self) -> usize {
        self.points.pow(self.active.iter().filter(|&&a| a).count() as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Coordinate measure `d^6x` carried by one stored site.
    pub fn cell_volume(&self) -> f64 {
        (0..6)
            .map(|a| {
                if self.active[a] {
                    self.periods[a] / self.points as f64
                } else {
                    self.periods[a]
                }
            })
            .product()
    }

    /// Coordinate volume `∏ L_a` of the torus.
    pub fn coordinate_volume(&self) -> f64 {
        self.periods.iter().product()
    }

    /// Per-active-axis grid indices of a stored site.
    pub fn site_indices(&self, mut site: usize) -> Vec<usize> {
        let axes = self.active_axes();
        let mut idx = alloc::vec![0; axes.len()];
        for slot in idx.iter_mut().rev() {
            *slot = site % self.points;
            site /= self.points;
        }
        idx
    }

    pub fn site_from_indices(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * self.points + (i % self.points))
    }

    /// Real coordinates of a stored site (zero along inactive axes).
    pub fn coordinates(&self, site: usize) -> [f64; 6] {
        let mut x = [0.0; 6];
        for (slot, &a) in self.site_indices(site).iter().zip(self.active_axes().iter()) {
            x[a] = self.periods[a] * (*slot as f64) / self.points as f64;
        }
        x
    }

    fn signed_mode(&self, i: usize) -> (i64, bool) {
        let n = self.points;
        if i < n / 2 {
            (i as i64, false)
        } else if i == n / 2 {
            ((n / 2) as i64, true)
        } else {
            (i as i64 - n as i64, false)
        }
    }

    /// Integer mode numbers per active axis for a spectral index.
    pub fn mode_numbers(&self, index: usize) -> Vec<i64> {
        self.site_indices(index).iter().map(|&i| self.signed_mode(i).0).collect()
    }

    pub fn mode(&self, index: usize) -> Mode {
        let axes = self.active_axes();
        let mut k = [0.0; 6];
        let mut k_diff = [0.0; 6];
        let mut nyquist = false;
        let mut zero = true;
        for (&i, &a) in self.site_indices(index).iter().zip(axes.iter()) {
            let (m, nyq) = self.signed_mode(i);
            let kk = TAU * m as f64 / self.periods[a];
            k[a] = kk;
            if nyq {
                nyquist = true;
            } else {
                k_diff[a] = kk;
            }
            if m != 0 {
                zero = false;
            }
        }
        Mode { k, k_diff, nyquist, zero }
    }

    pub fn modes(&self) -> Vec<Mode> {
        (0..self.len()).map(|i| self.mode(i)).collect()
    }

    /// Spectral index holding the given signed mode numbers (one per active axis).
    pub fn mode_index(&self, numbers: &[i64]) -> usize {
        let n = self.points as i64;
        let idx: Vec<usize> = numbers.iter().map(|&m| m.rem_euclid(n) as usize).collect();
        self.site_from_indices(&idx)
    }

    /// Site reached from `site` by shifting each active axis by `shift` grid steps.
    pub fn shift_site(&self, site: usize, shift: &[usize]) -> usize {
        let idx: Vec<usize> = self
            .site_indices(site)
            .iter()
            .zip(shift.iter())
            .map(|(&i, &s)| (i + s) % self.points)
            .collect();
        self.site_from_indices(&idx)
    }
}
