//! Vectors and incrementally reduced row spaces over GF(q).

mod lemma4;

pub use lemma4::{verify_lemma4, verify_lemma4_excluding_zero, Lemma4Outcome, SUBSPACE_GUARD};

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Deref, DerefMut};

use rand::Rng;
use thiserror::Error;

use crate::field::{FieldElement, FieldSpec};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LinalgError {
    #[error("vector of length {got} does not match ambient dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("exhaustive enumeration of {candidates} subspaces exceeds the guard of {guard}")]
    TooLarge { candidates: u128, guard: u128 },
}

/// A coefficient vector over GF(q).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct FVector(pub Vec<FieldElement>);

impl FVector {
    pub fn zero(len: usize) -> Self {
        FVector(vec![FieldElement::ZERO; len])
    }

    /// The i-th standard basis vector.
    pub fn unit(len: usize, i: usize) -> Self {
        let mut v = Self::zero(len);
        v.0[i] = FieldElement::ONE;
        v
    }

    pub fn random<R: Rng + ?Sized>(field: &FieldSpec, len: usize, rng: &mut R) -> Self {
        FVector((0..len).map(|_| field.random(rng)).collect())
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|x| x.is_zero())
    }

    pub fn into_inner(self) -> Vec<FieldElement> {
        self.0
    }
}

impl Deref for FVector {
    type Target = [FieldElement];
    fn deref(&self) -> &[FieldElement] {
        &self.0
    }
}

impl DerefMut for FVector {
    fn deref_mut(&mut self) -> &mut [FieldElement] {
        &mut self.0
    }
}

impl From<Vec<FieldElement>> for FVector {
    fn from(v: Vec<FieldElement>) -> Self {
        FVector(v)
    }
}

/// Bilinear form sum_i a_i b_i (no conjugation).
pub fn dot(field: &FieldSpec, a: &[FieldElement], b: &[FieldElement]) -> FieldElement {
    a.iter().zip(b).fold(FieldElement::ZERO, |acc, (&x, &y)| {
        field.add(acc, field.mul(x, y))
    })
}

/// `dst += c * src`
pub fn axpy(field: &FieldSpec, dst: &mut [FieldElement], c: FieldElement, src: &[FieldElement]) {
    if c.is_zero() {
        return;
    }
    for (d, &s) in dst.iter_mut().zip(src) {
        *d = field.add(*d, field.mul(c, s));
    }
}

/// `dst -= c * src`
fn sub_scaled(field: &FieldSpec, dst: &mut [FieldElement], c: FieldElement, src: &[FieldElement]) {
    if c.is_zero() {
        return;
    }
    for (d, &s) in dst.iter_mut().zip(src) {
        *d = field.sub(*d, field.mul(c, s));
    }
}

/// A subspace of GF(q)^dim kept in reduced row-echelon form.
///
/// Rows are sorted by pivot column, every pivot is 1, and each pivot column
/// is zero in every other row.
#[derive(Debug, Clone)]
pub struct RowSpace {
    field: FieldSpec,
    dim: usize,
    rows: Vec<Vec<FieldElement>>,
    pivots: Vec<usize>,
}

impl PartialEq for RowSpace {
    // RREF is canonical, so equal subspaces have equal bases.
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.rows == other.rows
    }
}

impl Eq for RowSpace {}

impl RowSpace {
    /// The zero subspace of GF(q)^dim.
    pub fn new(field: FieldSpec, dim: usize) -> Self {
        RowSpace {
            field,
            dim,
            rows: Vec::new(),
            pivots: Vec::new(),
        }
    }

    /// The whole ambient space.
    pub fn full(field: FieldSpec, dim: usize) -> Self {
        let rows = (0..dim).map(|i| FVector::unit(dim, i).0).collect();
        RowSpace {
            field,
            dim,
            rows,
            pivots: (0..dim).collect(),
        }
    }

    pub fn spanned_by<'a>(
        field: FieldSpec,
        dim: usize,
        vectors: impl IntoIterator<Item = &'a [FieldElement]>,
    ) -> Result<Self, LinalgError> {
        let mut space = RowSpace::new(field, dim);
        for v in vectors {
            space.insert(v)?;
        }
        Ok(space)
    }

    pub fn field(&self) -> &FieldSpec {
        &self.field
    }

    pub fn ambient_dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    pub fn is_full(&self) -> bool {
        self.rows.len() == self.dim
    }

    pub fn basis(&self) -> &[Vec<FieldElement>] {
        &self.rows
    }

    pub fn pivots(&self) -> &[usize] {
        &self.pivots
    }

    fn check_len(&self, v: &[FieldElement]) -> Result<(), LinalgError> {
        if v.len() != self.dim {
            return Err(LinalgError::DimensionMismatch {
                expected: self.dim,
                got: v.len(),
            });
        }
        Ok(())
    }

    /// Residue of `v` after elimination against the basis; zero iff `v` is
    /// in the span.
    fn reduce(&self, v: &[FieldElement]) -> Vec<FieldElement> {
        let mut r = v.to_vec();
        for (row, &p) in self.rows.iter().zip(&self.pivots) {
            let c = r[p];
            sub_scaled(&self.field, &mut r, c, row);
        }
        r
    }

    /// Adds `v` to the span. Returns whether the rank grew.
    pub fn insert(&mut self, v: &[FieldElement]) -> Result<bool, LinalgError> {
        self.check_len(v)?;
        if self.is_full() {
            return Ok(false);
        }
        let mut r = self.reduce(v);
        let Some(lead) = r.iter().position(|x| !x.is_zero()) else {
            return Ok(false);
        };
        let inv = self.field.inv(r[lead]).expect("lead is nonzero");
        for x in r.iter_mut() {
            *x = self.field.mul(*x, inv);
        }
        for row in self.rows.iter_mut() {
            let c = row[lead];
            sub_scaled(&self.field, row, c, &r);
        }
        let at = self.pivots.partition_point(|&p| p < lead);
        self.rows.insert(at, r);
        self.pivots.insert(at, lead);
        Ok(true)
    }

    pub fn contains(&self, v: &[FieldElement]) -> Result<bool, LinalgError> {
        self.check_len(v)?;
        Ok(self.reduce(v).iter().all(|x| x.is_zero()))
    }

    /// Whether some vector of the space has a nonzero inner product with `mu`.
    pub fn knows(&self, mu: &[FieldElement]) -> Result<bool, LinalgError> {
        self.check_len(mu)?;
        Ok(self
            .rows
            .iter()
            .any(|row| !dot(&self.field, row, mu).is_zero()))
    }

    /// { x : <c, x> = 0 for all c in the space }.
    pub fn orthogonal_complement(&self) -> RowSpace {
        let mut is_pivot = vec![false; self.dim];
        for &p in &self.pivots {
            is_pivot[p] = true;
        }
        let mut out = RowSpace::new(self.field.clone(), self.dim);
        for free in (0..self.dim).filter(|&j| !is_pivot[j]) {
            let mut x = vec![FieldElement::ZERO; self.dim];
            x[free] = FieldElement::ONE;
            for (row, &p) in self.rows.iter().zip(&self.pivots) {
                x[p] = self.field.neg(row[free]);
            }
            out.insert(&x).expect("length matches");
        }
        out
    }

    /// Uniformly random element of the space.
    pub fn random_member<R: Rng + ?Sized>(&self, rng: &mut R) -> FVector {
        let mut v = FVector::zero(self.dim);
        for row in &self.rows {
            let c = self.field.random(rng);
            axpy(&self.field, &mut v, c, row);
        }
        v
    }
}
