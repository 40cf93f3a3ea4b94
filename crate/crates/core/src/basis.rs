//! Strictly increasing multi-indices over `{1,2,3}` encoded as 3-bit masks,
//! and the signs of wedge products of basis monomials `dz^I ∧ dz̄^J`.

/// Masks of each degree in lexicographic order of the sorted index tuple.
const MASKS: [&[u8]; 4] = [&[0b000], &[0b001, 0b010, 0b100], &[0b011, 0b101, 0b110], &[0b111]];

pub fn masks(deg: usize) -> &'static [u8] {
    MASKS[deg]
}

pub fn dim(deg: usize) -> usize {
    MASKS[deg].len()
}

pub fn position(mask: u8) -> usize {
    let deg = mask.count_ones() as usize;
    MASKS[deg].iter().position(|&m| m == mask).expect("valid mask")
}

/// Sign of `dz^A ∧ dz^B` relative to the sorted monomial, `None` on overlap.
pub fn merge_sign(a: u8, b: u8) -> Option<f64> {
    if a & b != 0 {
        return None;
    }
    let mut swaps = 0;
    for j in 0..3 {
        if b & (1 << j) != 0 {
            swaps += (a >> (j + 1)).count_ones();
        }
    }
    Some(if swaps % 2 == 0 { 1.0 } else { -1.0 })
}

/// Number of components of a `(p,q)`-form.
pub fn form_dim(p: usize, q: usize) -> usize {
    dim(p) * dim(q)
}

/// Component index of `dz^I ∧ dz̄^J`.
pub fn component(p: usize, q: usize, hol: u8, anti: u8) -> usize {
    debug_assert_eq!(hol.count_ones() as usize, p);
    debug_assert_eq!(anti.count_ones() as usize, q);
    position(hol) * dim(q) + position(anti)
}

/// Holomorphic and antiholomorphic masks of a component index.
pub fn masks_of(p: usize, q: usize, c: usize) -> (u8, u8) {
    (MASKS[p][c / dim(q)], MASKS[q][c % dim(q)])
}

/// `(dz^I dz̄^J) ∧ (dz^K dz̄^L) = sign · dz^{I∪K} dz̄^{J∪L}`; returns the
/// output component index and sign.
pub fn product(p1: usize, q1: usize, c1: usize, p2: usize, q2: usize, c2: usize) -> Option<(usize, f64)> {
    let (i, j) = masks_of(p1, q1, c1);
    let (k, l) = masks_of(p2, q2, c2);
    let s1 = merge_sign(i, k)?;
    let s2 = merge_sign(j, l)?;
    // move dz^K past dz̄^J
    let s3 = if (q1 * p2) % 2 == 0 { 1.0 } else { -1.0 };
    Some((component(p1 + p2, q1 + q2, i | k, j | l), s1 * s2 * s3))
}

/// Complement of a single index `k` (0-based) in `{0,1,2}`.
pub fn complement_of(k: usize) -> u8 {
    0b111 ^ (1 << k)
}
