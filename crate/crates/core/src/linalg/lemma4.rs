//! Exhaustive check of the (q^h + 1)-witness property: there is a set of
//! q^h + 1 vectors such that every subspace K of dimension at most h has at
//! least one of them in K^⊥. Equivalently, a node that knows every witness has
//! received at least h + 1 independent coefficient vectors.

use alloc::vec;
use alloc::vec::Vec;

use super::{FVector, LinalgError, RowSpace};
use crate::field::{FieldElement, FieldSpec};

/// Maximum number of candidate subspaces enumerated by the verifier.
pub const SUBSPACE_GUARD: u128 = 1 << 24;

#[derive(Debug, Clone)]
pub struct Lemma4Outcome {
    pub q: u32,
    pub ambient_dim: usize,
    pub h: usize,
    pub witnesses: Vec<FVector>,
    pub subspaces_checked: u64,
    /// Basis of a subspace of dimension ≤ h whose complement misses every
    /// witness, if one was found.
    pub counterexample: Option<Vec<FVector>>,
    pub verified: bool,
}

/// Witness set: all q^h vectors of the coordinate subspace spanned by
/// e_0..e_{h-1}, plus e_h, which is orthogonal to all of them.
fn coordinate_witnesses(field: &FieldSpec, dim: usize, h: usize, with_zero: bool) -> Vec<FVector> {
    let q = field.order() as u64;
    let mut out = Vec::new();
    for code in 0..q.pow(h as u32) {
        let mut x = code;
        let mut w = FVector::zero(dim);
        for slot in w.iter_mut().take(h) {
            *slot = field.element((x % q) as u32).expect("digit < q");
            x /= q;
        }
        if with_zero || !w.is_zero() {
            out.push(w);
        }
    }
    out.push(FVector::unit(dim, h));
    out
}

/// Number of RREF patterns of dimension `d` in GF(q)^n, i.e. the Gaussian
/// binomial [n choose d]_q, saturating.
fn count_subspaces(q: u128, n: usize, d: usize) -> u128 {
    let mut total = 0u128;
    for_each_combination(n, d, &mut |pivots| {
        let free: u32 = free_count(n, pivots) as u32;
        total = total.saturating_add(q.saturating_pow(free));
    });
    total
}

fn free_count(n: usize, pivots: &[usize]) -> usize {
    let d = pivots.len();
    pivots
        .iter()
        .enumerate()
        .map(|(i, &c)| (n - 1 - c) - (d - 1 - i))
        .sum()
}

fn for_each_combination(n: usize, d: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(start: usize, n: usize, d: usize, cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        if cur.len() == d {
            f(cur);
            return;
        }
        for c in start..n {
            if n - c < d - cur.len() {
                break;
            }
            cur.push(c);
            rec(c + 1, n, d, cur, f);
            cur.pop();
        }
    }
    rec(0, n, d, &mut Vec::with_capacity(d), f);
}

/// Calls `f` with the RREF basis of every d-dimensional subspace.
fn for_each_subspace(
    field: &FieldSpec,
    n: usize,
    d: usize,
    f: &mut impl FnMut(&[Vec<FieldElement>]),
) {
    let q = field.order();
    for_each_combination(n, d, &mut |pivots| {
        // free slots: (row, column) pairs right of the row's pivot, off pivot columns
        let mut slots = Vec::new();
        for (i, &c) in pivots.iter().enumerate() {
            for j in c + 1..n {
                if !pivots.contains(&j) {
                    slots.push((i, j));
                }
            }
        }
        let mut rows = vec![vec![FieldElement::ZERO; n]; d];
        for (i, &c) in pivots.iter().enumerate() {
            rows[i][c] = FieldElement::ONE;
        }
        let mut digits = vec![0u32; slots.len()];
        loop {
            for (&(i, j), &dgt) in slots.iter().zip(&digits) {
                rows[i][j] = FieldElement::raw(dgt);
            }
            f(&rows);
            // mixed-radix increment
            let mut k = 0;
            while k < digits.len() {
                digits[k] += 1;
                if digits[k] < q {
                    break;
                }
                digits[k] = 0;
                k += 1;
            }
            if k == digits.len() {
                break;
            }
        }
    });
}

fn run(
    field: &FieldSpec,
    dim: usize,
    h: usize,
    with_zero: bool,
) -> Result<Lemma4Outcome, LinalgError> {
    assert!(h < dim, "h must be below the ambient dimension");
    let q = field.order() as u128;
    let candidates = (0..=h).fold(0u128, |acc, d| {
        acc.saturating_add(count_subspaces(q, dim, d))
    });
    if candidates > SUBSPACE_GUARD {
        return Err(LinalgError::TooLarge {
            candidates,
            guard: SUBSPACE_GUARD,
        });
    }
    let witnesses = coordinate_witnesses(field, dim, h, with_zero);
    let mut checked = 0u64;
    let mut counterexample = None;
    for d in 0..=h {
        for_each_subspace(field, dim, d, &mut |rows| {
            if counterexample.is_some() {
                return;
            }
            checked += 1;
            let k = RowSpace::spanned_by(field.clone(), dim, rows.iter().map(|r| r.as_slice()))
                .expect("rows have ambient length");
            debug_assert_eq!(k.rank(), d);
            let perp = k.orthogonal_complement();
            let hit = witnesses
                .iter()
                .any(|w| perp.contains(w).expect("witness has ambient length"));
            if !hit {
                counterexample = Some(rows.iter().cloned().map(FVector).collect());
            }
        });
    }
    Ok(Lemma4Outcome {
        q: field.order(),
        ambient_dim: dim,
        h,
        witnesses,
        subspaces_checked: checked,
        verified: counterexample.is_none(),
        counterexample,
    })
}

/// Builds the q^h + 1 witnesses and checks every subspace of dimension ≤ h.
pub fn verify_lemma4(
    field: &FieldSpec,
    ambient_dim: usize,
    h: usize,
) -> Result<Lemma4Outcome, LinalgError> {
    run(field, ambient_dim, h, true)
}

/// Same check with the zero vector dropped from the witness set. The zero
/// vector lies in every complement, so this is the variant that actually
/// exercises the non-zero witnesses.
pub fn verify_lemma4_excluding_zero(
    field: &FieldSpec,
    ambient_dim: usize,
    h: usize,
) -> Result<Lemma4Outcome, LinalgError> {
    run(field, ambient_dim, h, false)
}
