//! `(p,q)`-form fields.
//!
//! Components are stored on the monomials `dz^I ∧ dz̄^J` with `I`, `J`
//! strictly increasing (holomorphic block first). These coefficients equal
//! the fully antisymmetrized `Ψ_{IJ̄}` of the expansion
//! `Ψ = (1/(p!q!)) Ψ_{IJ̄} dz^I ∧ dz̄^J`. The interleaved four-index reading
//! used for `(2,2)`-forms lives in [`crate::hermitian`].

use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::basis::{self, form_dim, masks_of, merge_sign};
use crate::error::{Error, Result};
use crate::field::Field;
use crate::lattice::{Lattice, Mode};
use crate::hermitian::{raw_contraction_at, HermitianMetric};
use crate::math::{C64, I, ONE, ZERO};

fn check_bidegree(p: usize, q: usize) -> Result<()> {
    if p > 3 || q > 3 {
        Err(Error::BidegreeOverflow { p, q })
    } else {
        Ok(())
    }
}

/// Matrix of `η ↦ ξ ∧ η` on `(p,q)` coefficient vectors for a `(1,0)` covector `ξ`.
pub fn hol_wedge_matrix(p: usize, q: usize, xi: [C64; 3]) -> DMatrix<C64> {
    let mut m = DMatrix::from_element(form_dim(p + 1, q), form_dim(p, q), ZERO);
    for c in 0..form_dim(p, q) {
        let (hol, anti) = masks_of(p, q, c);
        for (j, x) in xi.iter().enumerate() {
            if let Some(s) = merge_sign(1 << j, hol) {
                let out = basis::component(p + 1, q, hol | (1 << j), anti);
                m[(out, c)] += x * s;
            }
        }
    }
    m
}

/// Matrix of `η ↦ ξ ∧ η` for a `(0,1)` covector `ξ = ξ_j dz̄^j`.
pub fn anti_wedge_matrix(p: usize, q: usize, xi: [C64; 3]) -> DMatrix<C64> {
    let mut m = DMatrix::from_element(form_dim(p, q + 1), form_dim(p, q), ZERO);
    let parity = if p % 2 == 0 { 1.0 } else { -1.0 };
    for c in 0..form_dim(p, q) {
        let (hol, anti) = masks_of(p, q, c);
        for (j, x) in xi.iter().enumerate() {
            if let Some(s) = merge_sign(1 << j, anti) {
                let out = basis::component(p, q + 1, hol, anti | (1 << j));
                m[(out, c)] += x * (s * parity);
            }
        }
    }
    m
}

/// Matrix of `η ↦ Φ ∧ η` for a constant form `Φ` of bidegree `(p1,q1)`.
pub fn left_wedge_matrix(p1: usize, q1: usize, phi: &[C64], p: usize, q: usize) -> DMatrix<C64> {
    let mut m = DMatrix::from_element(form_dim(p1 + p, q1 + q), form_dim(p, q), ZERO);
    for (c1, &v) in phi.iter().enumerate() {
        if v == ZERO {
            continue;
        }
        for c in 0..form_dim(p, q) {
            if let Some((out, s)) = basis::product(p1, q1, c1, p, q, c) {
                m[(out, c)] += v * s;
            }
        }
    }
    m
}

/// Apply a per-mode coefficient map to the spectrum of a form-valued field
/// whose fibre (inner block) has size `fiber`.
pub(crate) fn apply_mode_map(
    field: &Field,
    fiber: usize,
    out_dim: usize,
    map: impl Fn(&Mode) -> DMatrix<C64>,
) -> Field {
    let lattice = *field.lattice();
    let in_dim = field.ncomp() / fiber;
    let spec = field.spectrum();
    let mut out = Field::zeros(lattice, out_dim * fiber);
    let n = lattice.len();
    for (s, mode) in lattice.modes().iter().enumerate() {
        let m = map(mode);
        for f in 0..fiber {
            for r in 0..out_dim {
                let mut acc = ZERO;
                for c in 0..in_dim {
                    let w = m[(r, c)];
                    if w != ZERO {
                        acc += w * spec.data()[(c * fiber + f) * n + s];
                    }
                }
                out.data_mut()[(r * fiber + f) * n + s] = acc;
            }
        }
    }
    out.from_spectrum()
}

#[derive(Clone, Debug, PartialEq)]
pub struct FormField {
    p: usize,
    q: usize,
    field: Field,
}

impl FormField {
    pub fn zeros(lattice: Lattice, p: usize, q: usize) -> Result<FormField> {
        check_bidegree(p, q)?;
        Ok(FormField { p, q, field: Field::zeros(lattice, form_dim(p, q)) })
    }

    pub fn from_field(p: usize, q: usize, field: Field) -> Result<FormField> {
        check_bidegree(p, q)?;
        if field.ncomp() != form_dim(p, q) {
            return Err(Error::ShapeMismatch { expected: form_dim(p, q), found: field.ncomp() });
        }
        Ok(FormField { p, q, field })
    }

    /// Build from `f(hol_mask, anti_mask, coords)`.
    pub fn from_fn(
        lattice: Lattice,
        p: usize,
        q: usize,
        mut f: impl FnMut(u8, u8, [f64; 6]) -> C64,
    ) -> Result<FormField> {
        check_bidegree(p, q)?;
        let field = Field::from_fn(lattice, form_dim(p, q), |c, x| {
            let (h, a) = masks_of(p, q, c);
            f(h, a, x)
        });
        Ok(FormField { p, q, field })
    }

    /// Constant form with the given coefficient vector.
    pub fn constant(lattice: Lattice, p: usize, q: usize, coeffs: &[C64]) -> Result<FormField> {
        check_bidegree(p, q)?;
        if coeffs.len() != form_dim(p, q) {
            return Err(Error::ShapeMismatch { expected: form_dim(p, q), found: coeffs.len() });
        }
        Ok(FormField { p, q, field: Field::from_fn(lattice, coeffs.len(), |c, _| coeffs[c]) })
    }

    pub fn bidegree(&self) -> (usize, usize) {
        (self.p, self.q)
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn into_field(self) -> Field {
        self.field
    }

    pub fn lattice(&self) -> &Lattice {
        self.field.lattice()
    }

    pub fn component(&self, hol: u8, anti: u8) -> &[C64] {
        self.field.component(basis::component(self.p, self.q, hol, anti))
    }

    /// Coefficient vector at one site.
    pub fn at_site(&self, site: usize) -> Vec<C64> {
        (0..self.field.ncomp()).map(|c| self.field.at(c, site)).collect()
    }

    fn same_shape(&self, other: &FormField) -> Result<()> {
        if (self.p, self.q) != (other.p, other.q) {
            return Err(Error::WrongBidegree { p: self.p, q: self.q });
        }
        self.field.check_same(&other.field)
    }

    pub fn add(&self, other: &FormField) -> Result<FormField> {
        self.same_shape(other)?;
        Ok(FormField { p: self.p, q: self.q, field: self.field.add(&other.field) })
    }

    pub fn sub(&self, other: &FormField) -> Result<FormField> {
        self.same_shape(other)?;
        Ok(FormField { p: self.p, q: self.q, field: self.field.sub(&other.field) })
    }

    pub fn axpy(&self, a: C64, other: &FormField) -> Result<FormField> {
        self.same_shape(other)?;
        Ok(FormField { p: self.p, q: self.q, field: self.field.axpy(a, &other.field) })
    }

    pub fn scale(&self, a: C64) -> FormField {
        FormField { p: self.p, q: self.q, field: self.field.scale(a) }
    }

    pub fn scale_real(&self, a: f64) -> FormField {
        self.scale(C64::new(a, 0.0))
    }

    pub fn max_abs(&self) -> f64 {
        self.field.max_abs()
    }

    /// Apply a per-mode coefficient map of the given output bidegree.
    pub fn map_modes(&self, p: usize, q: usize, map: impl Fn(&Mode) -> DMatrix<C64>) -> Result<FormField> {
        check_bidegree(p, q)?;
        Ok(FormField { p, q, field: apply_mode_map(&self.field, 1, form_dim(p, q), map) })
    }

    /// Multiply every component's spectrum by a scalar symbol.
    pub fn map_symbol(&self, symbol: impl Fn(&Mode) -> C64) -> FormField {
        FormField { p: self.p, q: self.q, field: self.field.apply_symbol(symbol) }
    }

    pub fn del(&self) -> Result<FormField> {
        check_bidegree(self.p + 1, self.q)?;
        let (p, q) = (self.p, self.q);
        self.map_modes(p + 1, q, |m| hol_wedge_matrix(p, q, m.holo_vec()))
    }

    pub fn dbar(&self) -> Result<FormField> {
        check_bidegree(self.p, self.q + 1)?;
        let (p, q) = (self.p, self.q);
        self.map_modes(p, q + 1, |m| anti_wedge_matrix(p, q, m.antiholo_vec()))
    }

    /// Largest of `|∂Ψ|` and `|∂̄Ψ|` over the lattice (parts that exceed `(3,3)` vanish).
    pub fn closedness_defect(&self) -> f64 {
        let a = self.del().map(|f| f.max_abs()).unwrap_or(0.0);
        let b = self.dbar().map(|f| f.max_abs()).unwrap_or(0.0);
        a.max(b)
    }

    pub fn wedge(&self, other: &FormField) -> Result<FormField> {
        let (p, q) = (self.p + other.p, self.q + other.q);
        check_bidegree(p, q)?;
        if self.lattice() != other.lattice() {
            return Err(Error::LatticeMismatch);
        }
        let lattice = *self.lattice();
        let n = lattice.len();
        let mut out = Field::zeros(lattice, form_dim(p, q));
        for c1 in 0..self.field.ncomp() {
            for c2 in 0..other.field.ncomp() {
                if let Some((c, s)) = basis::product(self.p, self.q, c1, other.p, other.q, c2) {
                    let a = self.field.component(c1);
                    let b = other.field.component(c2);
                    let dst = &mut out.data_mut()[c * n..(c + 1) * n];
                    for ((d, x), y) in dst.iter_mut().zip(a).zip(b) {
                        *d += x * y * s;
                    }
                }
            }
        }
        Ok(FormField { p, q, field: out })
    }

    /// Complex conjugate form; a `(p,q)`-form becomes a `(q,p)`-form.
    pub fn conjugate(&self) -> FormField {
        let (p, q) = (self.p, self.q);
        let sign = if (p * q) % 2 == 0 { 1.0 } else { -1.0 };
        let lattice = *self.lattice();
        let mut out = Field::zeros(lattice, form_dim(q, p));
        for c in 0..self.field.ncomp() {
            let (h, a) = masks_of(p, q, c);
            let dst = basis::component(q, p, a, h);
            for s in 0..lattice.len() {
                out.set(dst, s, self.field.at(c, s).conj() * sign);
            }
        }
        FormField { p: q, q: p, field: out }
    }

    /// `max |Ψ̄ − Ψ|` for `p = q`.
    pub fn reality_defect(&self) -> f64 {
        debug_assert_eq!(self.p, self.q);
        self.conjugate().field.sub(&self.field).max_abs()
    }

    /// `(Ψ + Ψ̄)/2` for `p = q`.
    pub fn real_part(&self) -> FormField {
        FormField { p: self.p, q: self.q, field: self.field.add(&self.conjugate().field).scale_real(0.5) }
    }

    /// Drop the constant and Nyquist Fourier content.
    pub fn resolved_nonconstant(&self) -> FormField {
        FormField { p: self.p, q: self.q, field: self.field.resolved_nonconstant() }
    }

    pub fn shifted(&self, shift: &[usize]) -> FormField {
        FormField { p: self.p, q: self.q, field: self.field.shifted(shift) }
    }
}

/// `i∂∂̄β` for a real `(1,1)`-form `β`.
pub fn i_del_dbar(beta: &FormField) -> Result<FormField> {
    if beta.bidegree() != (1, 1) {
        return Err(Error::WrongBidegree { p: 1, q: 1 });
    }
    let scale = beta.max_abs().max(1.0);
    let defect = beta.reality_defect();
    if defect > 1e-10 * scale {
        return Err(Error::NotReal { defect });
    }
    Ok(beta.dbar()?.del()?.scale(I))
}

/// A real `(3,3)`-form stored as its density against
/// `dV = ∏_j (i dz^j ∧ dz̄^j)`, which is `8 d^6x`.
#[derive(Clone, Debug, PartialEq)]
pub struct TopForm {
    density: Field,
}

/// `dz¹dz²dz³ ∧ dz̄¹dz̄²dz̄³ = −i dV`.
const MONOMIAL_TO_DENSITY: C64 = C64 { re: 0.0, im: -1.0 };

/// `dV = 8 d^6x`.
pub const VOLUME_ELEMENT_FACTOR: f64 = 8.0;

impl TopForm {
    pub fn from_density(density: Field) -> Result<TopForm> {
        if density.ncomp() != 1 {
            return Err(Error::ShapeMismatch { expected: 1, found: density.ncomp() });
        }
        Ok(TopForm { density })
    }

    pub fn constant(lattice: Lattice, value: f64) -> TopForm {
        TopForm { density: Field::from_fn(lattice, 1, |_, _| C64::new(value, 0.0)) }
    }

    pub fn from_form(form: &FormField) -> Result<TopForm> {
        if form.bidegree() != (3, 3) {
            return Err(Error::WrongBidegree { p: 3, q: 3 });
        }
        Ok(TopForm { density: form.field().scale(MONOMIAL_TO_DENSITY) })
    }

    pub fn to_form(&self) -> FormField {
        FormField { p: 3, q: 3, field: self.density.scale(ONE / MONOMIAL_TO_DENSITY) }
    }

    pub fn density(&self) -> &Field {
        &self.density
    }

    pub fn lattice(&self) -> &Lattice {
        self.density.lattice()
    }
}

/// `∫_X T` by the trapezoidal rule (spectrally exact for periodic fields).
pub fn integrate(t: &TopForm) -> C64 {
    let l = t.lattice();
    let sum: C64 = t.density.component(0).iter().sum();
    sum * (l.cell_volume() * VOLUME_ELEMENT_FACTOR)
}

/// Matrix-valued `(p,q)`-form: each monomial carries an `r × r` complex matrix
/// (row-major), e.g. a curvature `F = F_{jk̄} dz^j ∧ dz̄^k`.
#[derive(Clone, Debug, PartialEq)]
pub struct EndForm {
    p: usize,
    q: usize,
    rank: usize,
    field: Field,
}

impl EndForm {
    pub fn zeros(lattice: Lattice, p: usize, q: usize, rank: usize) -> Result<EndForm> {
        check_bidegree(p, q)?;
        Ok(EndForm { p, q, rank, field: Field::zeros(lattice, form_dim(p, q) * rank * rank) })
    }

    pub fn from_field(p: usize, q: usize, rank: usize, field: Field) -> Result<EndForm> {
        check_bidegree(p, q)?;
        if field.ncomp() != form_dim(p, q) * rank * rank {
            return Err(Error::ShapeMismatch { expected: form_dim(p, q) * rank * rank, found: field.ncomp() });
        }
        Ok(EndForm { p, q, rank, field })
    }

    /// `Σ_c φ_c ⊗ T_c` for constant scalar forms `φ_c` and constant matrices `T_c`.
    pub fn constant(lattice: Lattice, p: usize, q: usize, terms: &[(Vec<C64>, DMatrix<C64>)]) -> Result<EndForm> {
        let rank = terms.first().map(|t| t.1.nrows()).unwrap_or(1);
        let mut out = EndForm::zeros(lattice, p, q, rank)?;
        for (phi, t) in terms {
            for (c, &v) in phi.iter().enumerate() {
                for a in 0..rank {
                    for b in 0..rank {
                        let k = (c * rank + a) * rank + b;
                        for s in 0..lattice.len() {
                            let cur = out.field.at(k, s);
                            out.field.set(k, s, cur + v * t[(a, b)]);
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn bidegree(&self) -> (usize, usize) {
        (self.p, self.q)
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn lattice(&self) -> &Lattice {
        self.field.lattice()
    }

    pub fn matrix(&self, comp: usize, site: usize) -> DMatrix<C64> {
        let r = self.rank;
        DMatrix::from_fn(r, r, |a, b| self.field.at((comp * r + a) * r + b, site))
    }

    pub fn set_matrix(&mut self, comp: usize, site: usize, m: &DMatrix<C64>) {
        let r = self.rank;
        for a in 0..r {
            for b in 0..r {
                self.field.set((comp * r + a) * r + b, site, m[(a, b)]);
            }
        }
    }

    pub fn scale(&self, a: C64) -> EndForm {
        EndForm { p: self.p, q: self.q, rank: self.rank, field: self.field.scale(a) }
    }

    pub fn add(&self, other: &EndForm) -> Result<EndForm> {
        if (self.p, self.q, self.rank) != (other.p, other.q, other.rank) {
            return Err(Error::WrongBidegree { p: other.p, q: other.q });
        }
        self.field.check_same(&other.field)?;
        Ok(EndForm { p: self.p, q: self.q, rank: self.rank, field: self.field.add(&other.field) })
    }

    pub fn sub(&self, other: &EndForm) -> Result<EndForm> {
        self.field.check_same(&other.field)?;
        Ok(EndForm { p: self.p, q: self.q, rank: self.rank, field: self.field.sub(&other.field) })
    }

    pub fn max_abs(&self) -> f64 {
        self.field.max_abs()
    }

    pub fn del(&self) -> Result<EndForm> {
        let (p, q) = (self.p, self.q);
        check_bidegree(p + 1, q)?;
        let fiber = self.rank * self.rank;
        let field = apply_mode_map(&self.field, fiber, form_dim(p + 1, q), |m| hol_wedge_matrix(p, q, m.holo_vec()));
        Ok(EndForm { p: p + 1, q, rank: self.rank, field })
    }

    pub fn dbar(&self) -> Result<EndForm> {
        let (p, q) = (self.p, self.q);
        check_bidegree(p, q + 1)?;
        let fiber = self.rank * self.rank;
        let field =
            apply_mode_map(&self.field, fiber, form_dim(p, q + 1), |m| anti_wedge_matrix(p, q, m.antiholo_vec()));
        Ok(EndForm { p, q: q + 1, rank: self.rank, field })
    }

    /// Trace of each monomial's matrix, as a scalar form.
    pub fn trace(&self) -> FormField {
        let lattice = *self.lattice();
        let r = self.rank;
        let dim = form_dim(self.p, self.q);
        let field = Field::from_fn(lattice, dim, |_, _| ZERO);
        let mut field = field;
        for c in 0..dim {
            for s in 0..lattice.len() {
                let t: C64 = (0..r).map(|a| self.field.at((c * r + a) * r + a, s)).sum();
                field.set(c, s, t);
            }
        }
        FormField { p: self.p, q: self.q, field }
    }

    /// `Φ ∧ Ψ` with matrix multiplication in the fibre.
    pub fn wedge(&self, other: &EndForm) -> Result<EndForm> {
        let (p, q) = (self.p + other.p, self.q + other.q);
        check_bidegree(p, q)?;
        let lattice = *self.lattice();
        let mut out = EndForm::zeros(lattice, p, q, self.rank)?;
        for site in 0..lattice.len() {
            let mut acc: Vec<DMatrix<C64>> =
                (0..form_dim(p, q)).map(|_| DMatrix::from_element(self.rank, self.rank, ZERO)).collect();
            for c1 in 0..form_dim(self.p, self.q) {
                let a = self.matrix(c1, site);
                for c2 in 0..form_dim(other.p, other.q) {
                    if let Some((c, s)) = basis::product(self.p, self.q, c1, other.p, other.q, c2) {
                        acc[c] += (&a * other.matrix(c2, site)) * C64::new(s, 0.0);
                    }
                }
            }
            for (c, m) in acc.iter().enumerate() {
                out.set_matrix(c, site, m);
            }
        }
        Ok(out)
    }

    /// `φ ∧ Ψ` for a scalar form `φ` on the left.
    pub fn wedge_scalar_left(phi: &FormField, psi: &EndForm) -> Result<EndForm> {
        let (pp, pq) = phi.bidegree();
        let (p, q) = (pp + psi.p, pq + psi.q);
        check_bidegree(p, q)?;
        let lattice = *psi.lattice();
        let r2 = psi.rank * psi.rank;
        let n = lattice.len();
        let mut out = EndForm::zeros(lattice, p, q, psi.rank)?;
        for c1 in 0..form_dim(pp, pq) {
            for c2 in 0..form_dim(psi.p, psi.q) {
                if let Some((c, s)) = basis::product(pp, pq, c1, psi.p, psi.q, c2) {
                    for f in 0..r2 {
                        for site in 0..n {
                            let v = phi.field().at(c1, site) * psi.field.at(c2 * r2 + f, site) * s;
                            let cur = out.field.at(c * r2 + f, site);
                            out.field.set(c * r2 + f, site, cur + v);
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

/// `Tr(Φ ∧ Ψ)` for matrix-valued forms.
pub fn trace_wedge(a: &EndForm, b: &EndForm) -> Result<FormField> {
    let (p, q) = (a.p + b.p, a.q + b.q);
    check_bidegree(p, q)?;
    if a.rank != b.rank {
        return Err(Error::ShapeMismatch { expected: a.rank, found: b.rank });
    }
    let lattice = *a.lattice();
    let r = a.rank;
    let n = lattice.len();
    let mut out = Field::zeros(lattice, form_dim(p, q));
    for c1 in 0..form_dim(a.p, a.q) {
        for c2 in 0..form_dim(b.p, b.q) {
            if let Some((c, s)) = basis::product(a.p, a.q, c1, b.p, b.q, c2) {
                for site in 0..n {
                    let mut t = ZERO;
                    for i in 0..r {
                        for k in 0..r {
                            t += a.field.at((c1 * r + i) * r + k, site) * b.field.at((c2 * r + k) * r + i, site);
                        }
                    }
                    let cur = out.at(c, site);
                    out.set(c, site, cur + t * s);
                }
            }
        }
    }
    Ok(FormField { p, q, field: out })
}

/// Raw index contraction `g^{ab̄} Ψ_{ab̄jk̄}` of a `(2,2)`-form, returned as
/// nine row-major components `(j,k)`.
pub fn raw_contraction(g: &HermitianMetric, psi: &FormField) -> Result<Field> {
    if psi.bidegree() != (2, 2) {
        return Err(Error::WrongBidegree { p: 2, q: 2 });
    }
    if g.lattice() != psi.lattice() {
        return Err(Error::LatticeMismatch);
    }
    let l = *psi.lattice();
    let mut out = Field::zeros(l, 9);
    for s in 0..l.len() {
        let m = raw_contraction_at(g.inverse(s), &psi.at_site(s));
        for j in 0..3 {
            for k in 0..3 {
                out.set(3 * j + k, s, m[(j, k)]);
            }
        }
    }
    Ok(out)
}

/// The form-valued contraction `Λ_ω Ψ`, a `(1,1)`-form normalized so that
/// `Λ_ω(ω²) = 4ω`. Its metric reading `−i (Λ_ωΨ)_{jk̄}` is minus the raw
/// contraction.
pub fn contract_lambda(g: &HermitianMetric, psi: &FormField) -> Result<FormField> {
    let raw = raw_contraction(g, psi)?;
    FormField::from_field(1, 1, raw.scale(-I))
}
