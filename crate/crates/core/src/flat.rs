//! Operators tied to a flat Kähler background `ω̂` with constant `ĝ`: pointwise
//! inner products of forms, the codifferential `∂†`, the Lefschetz pair
//! `(L, Λ)`, and the Laplacian `Δ = ∂∂† + ∂†∂`, all diagonal in Fourier space.
//!
//! Forms are paired by `⟨dz^a, dz^b⟩ = g^{ab̄}`, `⟨dz̄^a, dz̄^b⟩ = g^{bā}`,
//! extended to monomials by determinants.

use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::basis::{form_dim, masks_of};
use crate::error::{Error, Result};
use crate::form::{anti_wedge_matrix, hol_wedge_matrix, left_wedge_matrix, FormField, TopForm, VOLUME_ELEMENT_FACTOR};
use crate::hermitian::{dilaton, HermitianMetric, HolVolForm, Mat3};
use crate::lattice::{Lattice, Mode};
use crate::math::{C64, I, ONE, ZERO};

fn sub_det(m: &Mat3, rows: u8, cols: u8) -> C64 {
    let r: Vec<usize> = (0..3).filter(|j| rows & (1 << j) != 0).collect();
    let c: Vec<usize> = (0..3).filter(|j| cols & (1 << j) != 0).collect();
    match r.len() {
        0 => ONE,
        1 => m[(r[0], c[0])],
        2 => m[(r[0], c[0])] * m[(r[1], c[1])] - m[(r[0], c[1])] * m[(r[1], c[0])],
        _ => m.determinant(),
    }
}

/// Gram matrix `M[(c', c)] = ⟨e_c, e_{c'}⟩` of the `(p,q)` monomials for the
/// inverse metric `ginv`; `⟨α, β⟩ = βᴴ M α`.
pub fn gram(ginv: &Mat3, p: usize, q: usize) -> DMatrix<C64> {
    let d = form_dim(p, q);
    let gt = ginv.transpose();
    DMatrix::from_fn(d, d, |c2, c1| {
        let (i2, j2) = masks_of(p, q, c2);
        let (i1, j1) = masks_of(p, q, c1);
        sub_det(ginv, i2, i1) * sub_det(&gt, j2, j1)
    })
}

/// Pointwise `⟨α, β⟩` of two coefficient vectors.
pub fn pointwise_inner(gram: &DMatrix<C64>, a: &[C64], b: &[C64]) -> C64 {
    let mut acc = ZERO;
    for r in 0..gram.nrows() {
        let mut row = ZERO;
        for c in 0..gram.ncols() {
            row += gram[(r, c)] * a[c];
        }
        acc += row * b[r].conj();
    }
    acc
}

/// `∫_X ⟨a, b⟩_g w` for forms of equal bidegree.
pub fn l2_inner(a: &FormField, b: &FormField, g: &HermitianMetric, weight: &TopForm) -> Result<C64> {
    if a.bidegree() != b.bidegree() {
        let (p, q) = b.bidegree();
        return Err(Error::WrongBidegree { p, q });
    }
    if a.lattice() != b.lattice() || a.lattice() != g.lattice() || a.lattice() != weight.lattice() {
        return Err(Error::LatticeMismatch);
    }
    let (p, q) = a.bidegree();
    let l = *a.lattice();
    let flat = g.variation() == 0.0;
    let mut m = gram(g.inverse(0), p, q);
    let mut acc = ZERO;
    for s in 0..l.len() {
        if !flat {
            m = gram(g.inverse(s), p, q);
        }
        acc += pointwise_inner(&m, &a.at_site(s), &b.at_site(s)) * weight.density().at(0, s);
    }
    Ok(acc * (l.cell_volume() * VOLUME_ELEMENT_FACTOR))
}

/// A flat Kähler background: constant `ĝ` and constant `Ω`.
#[derive(Clone, Debug)]
pub struct FlatKahler {
    metric: HermitianMetric,
    omega: HolVolForm,
    dilaton: f64,
    grams: Vec<Option<(DMatrix<C64>, DMatrix<C64>)>>,
}

impl FlatKahler {
    pub fn new(metric: &HermitianMetric, omega: HolVolForm) -> Result<FlatKahler> {
        let scale = metric.at(0).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if metric.variation() > 1e-14 * scale {
            return Err(Error::NonConstantBackground);
        }
        let dilaton = dilaton(metric, &omega)?.at(0, 0).re;
        let ginv = *metric.inverse(0);
        let grams = (0..16)
            .map(|i| {
                let (p, q) = (i / 4, i % 4);
                let m = gram(&ginv, p, q);
                let inv = m.clone().try_inverse()?;
                Some((m, inv))
            })
            .collect();
        Ok(FlatKahler { metric: metric.clone(), omega, dilaton, grams })
    }

    /// `ĝ = I`, `f = 1`.
    pub fn standard(lattice: Lattice) -> FlatKahler {
        FlatKahler::new(&HermitianMetric::identity(lattice), HolVolForm::unit()).expect("identity is flat")
    }

    pub fn lattice(&self) -> &Lattice {
        self.metric.lattice()
    }

    pub fn metric(&self) -> &HermitianMetric {
        &self.metric
    }

    pub fn g(&self) -> &Mat3 {
        self.metric.at(0)
    }

    pub fn ginv(&self) -> &Mat3 {
        self.metric.inverse(0)
    }

    pub fn det(&self) -> f64 {
        self.metric.det(0)
    }

    pub fn omega(&self) -> &HolVolForm {
        &self.omega
    }

    /// `|Ω|_ω̂`.
    pub fn dilaton(&self) -> f64 {
        self.dilaton
    }

    /// `ω̂³/3!`.
    pub fn volume_form(&self) -> TopForm {
        TopForm::constant(*self.lattice(), self.det())
    }

    /// `|Ω|_ω̂ ω̂³/3!`, the weight of the natural `L²` pairing.
    pub fn weight(&self) -> TopForm {
        TopForm::constant(*self.lattice(), self.dilaton * self.det())
    }

    /// Coefficients `i ĝ_{jk̄}` of `ω̂`.
    pub fn kahler_coeffs(&self) -> Vec<C64> {
        let g = self.g();
        (0..9).map(|c| I * g[(c / 3, c % 3)]).collect()
    }

    pub fn gram(&self, p: usize, q: usize) -> &DMatrix<C64> {
        &self.grams[4 * p + q].as_ref().expect("positive metric").0
    }

    fn gram_inv(&self, p: usize, q: usize) -> &DMatrix<C64> {
        &self.grams[4 * p + q].as_ref().expect("positive metric").1
    }

    /// Per-mode matrix of `∂†` from `(p,q)` to `(p−1,q)`.
    pub fn del_adjoint_symbol(&self, p: usize, q: usize, mode: &Mode) -> DMatrix<C64> {
        let d = hol_wedge_matrix(p - 1, q, mode.holo_vec());
        self.gram_inv(p - 1, q) * d.adjoint() * self.gram(p, q)
    }

    /// Per-mode matrix of `∂̄†` from `(p,q)` to `(p,q−1)`.
    pub fn dbar_adjoint_symbol(&self, p: usize, q: usize, mode: &Mode) -> DMatrix<C64> {
        let d = anti_wedge_matrix(p, q - 1, mode.antiholo_vec());
        self.gram_inv(p, q - 1) * d.adjoint() * self.gram(p, q)
    }

    /// `ω̂ ∧ ·` from `(p,q)` to `(p+1,q+1)`.
    pub fn lefschetz_matrix(&self, p: usize, q: usize) -> DMatrix<C64> {
        left_wedge_matrix(1, 1, &self.kahler_coeffs(), p, q)
    }

    /// Pointwise adjoint of `ω̂ ∧ ·`, from `(p,q)` to `(p−1,q−1)`.
    pub fn lambda_matrix(&self, p: usize, q: usize) -> DMatrix<C64> {
        let l = self.lefschetz_matrix(p - 1, q - 1);
        self.gram_inv(p - 1, q - 1) * l.adjoint() * self.gram(p, q)
    }

    pub fn del_adjoint(&self, psi: &FormField) -> Result<FormField> {
        let (p, q) = psi.bidegree();
        if p == 0 {
            return Err(Error::WrongBidegree { p, q });
        }
        psi.map_modes(p - 1, q, |m| self.del_adjoint_symbol(p, q, m))
    }

    pub fn dbar_adjoint(&self, psi: &FormField) -> Result<FormField> {
        let (p, q) = psi.bidegree();
        if q == 0 {
            return Err(Error::WrongBidegree { p, q });
        }
        psi.map_modes(p, q - 1, |m| self.dbar_adjoint_symbol(p, q, m))
    }

    pub fn lefschetz(&self, psi: &FormField) -> Result<FormField> {
        let (p, q) = psi.bidegree();
        if p == 3 || q == 3 {
            return Err(Error::BidegreeOverflow { p: p + 1, q: q + 1 });
        }
        let m = self.lefschetz_matrix(p, q);
        psi.map_modes(p + 1, q + 1, |_| m.clone())
    }

    /// The pointwise adjoint `Λ` of `L = ω̂ ∧ ·`.
    pub fn lambda(&self, psi: &FormField) -> Result<FormField> {
        let (p, q) = psi.bidegree();
        if p == 0 || q == 0 {
            return Err(Error::WrongBidegree { p, q });
        }
        let m = self.lambda_matrix(p, q);
        psi.map_modes(p - 1, q - 1, |_| m.clone())
    }

    /// Per-mode matrix of `Δ_∂ = ∂∂† + ∂†∂` on `(p,q)`-forms.
    pub fn laplacian_matrix(&self, p: usize, q: usize, mode: &Mode) -> DMatrix<C64> {
        let d = form_dim(p, q);
        let mut out = DMatrix::from_element(d, d, ZERO);
        if p > 0 {
            out += hol_wedge_matrix(p - 1, q, mode.holo_vec()) * self.del_adjoint_symbol(p, q, mode);
        }
        if p < 3 {
            out += self.del_adjoint_symbol(p + 1, q, mode) * hol_wedge_matrix(p, q, mode.holo_vec());
        }
        out
    }

    /// Scalar symbol `ĝ^{jk̄} a_j ā_k` of `Δ_∂` on a mode, with `a = ∂`-symbol.
    pub fn laplacian_symbol(&self, mode: &Mode) -> f64 {
        let a = mode.holo_vec();
        let ginv = self.ginv();
        let mut acc = ZERO;
        for j in 0..3 {
            for k in 0..3 {
                acc += ginv[(k, j)] * a[j] * a[k].conj();
            }
        }
        acc.re
    }

    pub fn hodge_laplacian(&self, psi: &FormField) -> FormField {
        let (p, q) = psi.bidegree();
        psi.map_modes(p, q, |m| self.laplacian_matrix(p, q, m)).expect("same bidegree")
    }

    /// `Δ⁻¹` on the resolved nonconstant modes (other modes are dropped).
    pub fn inverse_laplacian(&self, psi: &FormField) -> FormField {
        psi.map_symbol(|m| {
            if m.is_resolved_nonzero() {
                C64::new(1.0 / self.laplacian_symbol(m), 0.0)
            } else {
                ZERO
            }
        })
    }
}

/// `Δ = ∂∂† + ∂†∂` for a constant background metric.
pub fn hodge_laplacian_flat(g: &HermitianMetric, psi: &FormField) -> Result<FormField> {
    let flat = FlatKahler::new(g, HolVolForm::unit())?;
    Ok(flat.hodge_laplacian(psi))
}

