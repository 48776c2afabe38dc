//! Random binning, block layout and random linear network coding.
//!
//! A message `x_i` of length `l` is mapped by a keyed pseudorandom function to
//! a bin index of `h` symbols, zero-padded and cut into blocks of
//! `symbols_per_block` symbols each. Nodes exchange random linear combinations
//! of blocks; the header carries the coefficient on every block of every
//! message.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::field::{FieldElement, FieldSpec};
use crate::linalg::{axpy, FVector, LinalgError, RowSpace};
use crate::rng::mix64;
use crate::sources::{ceil_rate, JointSource, SourceError};

/// Largest candidate count `oracle_decode` will enumerate.
pub const ORACLE_GUARD: u128 = 1 << 20;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CodingError {
    #[error("length {got} does not match expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("{s_bits}-bit payload cannot carry one {bits:.3}-bit symbol")]
    PacketTooSmall { s_bits: u32, bits: f64 },
    #[error("{0} candidates exceed the oracle guard")]
    TooLarge(u128),
    #[error("delta must be positive and finite")]
    BadDelta,
    #[error("symbol {symbol} outside alphabet of size {alphabet}")]
    BadSymbol { symbol: u32, alphabet: u32 },
    #[error(transparent)]
    Source(#[from] SourceError),
}

impl From<LinalgError> for CodingError {
    fn from(e: LinalgError) -> Self {
        match e {
            LinalgError::DimensionMismatch { expected, got } => {
                CodingError::DimensionMismatch { expected, got }
            }
            LinalgError::TooLarge { candidates, .. } => CodingError::TooLarge(candidates),
        }
    }
}

/// Payload symbols per packet: ⌊s / log2 q⌋.
pub fn symbols_per_block(field: &FieldSpec, s_bits: u32) -> Result<usize, CodingError> {
    let bits = field.bits_per_symbol();
    let spb = libm::floor(s_bits as f64 / bits + 1e-9) as usize;
    if spb == 0 {
        return Err(CodingError::PacketTooSmall { s_bits, bits });
    }
    Ok(spb)
}

/// Shared random binning of one message.
#[derive(Debug, Clone)]
pub struct BinningCode {
    field: FieldSpec,
    source_index: usize,
    alphabet: u32,
    l: usize,
    h: usize,
    symbols_per_block: usize,
    block_count: usize,
    seed: u64,
}

impl BinningCode {
    /// Explicit construction from `H(X_i)` in bits.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        field: FieldSpec,
        source_index: usize,
        alphabet: u32,
        l: usize,
        s_bits: u32,
        entropy_bits: f64,
        delta: f64,
        seed: u64,
    ) -> Result<Self, CodingError> {
        if !(delta.is_finite() && delta > 0.0) {
            return Err(CodingError::BadDelta);
        }
        let spb = symbols_per_block(&field, s_bits)?;
        let h = if entropy_bits <= 0.0 {
            0
        } else {
            ceil_rate(l as f64 / field.bits_per_symbol() * (entropy_bits + delta))
        };
        Ok(BinningCode {
            field,
            source_index,
            alphabet,
            l,
            h,
            symbols_per_block: spb,
            block_count: h.div_ceil(spb),
            seed,
        })
    }

    /// Binning for message `i` of `source`, sized by its marginal entropy.
    pub fn for_source(
        field: FieldSpec,
        source: &JointSource,
        i: usize,
        l: usize,
        s_bits: u32,
        delta: f64,
        seed: u64,
    ) -> Result<Self, CodingError> {
        let entropy = source.message_entropy(i)?;
        let alphabet = source.message_alphabets()[i];
        Self::new(field, i, alphabet, l, s_bits, entropy, delta, seed)
    }

    pub fn field(&self) -> &FieldSpec {
        &self.field
    }

    pub fn source_index(&self) -> usize {
        self.source_index
    }

    pub fn block_length(&self) -> usize {
        self.l
    }

    /// Bin index length in symbols.
    pub fn h(&self) -> usize {
        self.h
    }

    pub fn symbols_per_block(&self) -> usize {
        self.symbols_per_block
    }

    pub fn block_count(&self) -> usize {
        self.block_count
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn prf(&self, x: &[u32]) -> ChaCha8Rng {
        let mut a = mix64(self.seed ^ 0x243F_6A88_85A3_08D3);
        let mut b = mix64(self.seed.rotate_left(32) ^ self.source_index as u64);
        for &sym in x {
            a = mix64(a ^ sym as u64);
            b = mix64(
                b.wrapping_add(sym as u64)
                    .wrapping_mul(0x9E37_79B9_7F4A_7C15),
            );
        }
        let mut key = [0u8; 32];
        for (chunk, word) in key.chunks_mut(8).zip([a, b, mix64(a ^ b), x.len() as u64]) {
            chunk.copy_from_slice(&word.to_le_bytes());
        }
        ChaCha8Rng::from_seed(key)
    }

    /// Bin index of `x`, zero-padded to `block_count * symbols_per_block`.
    pub fn bin_index(&self, x: &[u32]) -> Result<FVector, CodingError> {
        if x.len() != self.l {
            return Err(CodingError::DimensionMismatch {
                expected: self.l,
                got: x.len(),
            });
        }
        if let Some(&symbol) = x.iter().find(|&&s| s >= self.alphabet) {
            return Err(CodingError::BadSymbol {
                symbol,
                alphabet: self.alphabet,
            });
        }
        Ok(self.bin_index_unchecked(x))
    }

    fn bin_index_unchecked(&self, x: &[u32]) -> FVector {
        let mut out = FVector::zero(self.block_count * self.symbols_per_block);
        if self.h > 0 {
            let mut rng = self.prf(x);
            for slot in out.iter_mut().take(self.h) {
                *slot = self.field.random(&mut rng);
            }
        }
        out
    }

    /// The bin index cut into blocks.
    pub fn blocks(&self, x: &[u32]) -> Result<Vec<Vec<FieldElement>>, CodingError> {
        let index = self.bin_index(x)?;
        Ok(index
            .chunks(self.symbols_per_block)
            .map(<[_]>::to_vec)
            .collect())
    }
}

/// A coded packet: header coefficients on every block and the payload.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Packet {
    pub coeffs: FVector,
    pub payload: FVector,
}

impl Packet {
    pub fn zero(header_dim: usize, payload_len: usize) -> Self {
        Packet {
            coeffs: FVector::zero(header_dim),
            payload: FVector::zero(payload_len),
        }
    }
}

/// One stored linear equation on the blocks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Equation {
    pub coeffs: Vec<FieldElement>,
    pub payload: Vec<FieldElement>,
}

/// What a node holds: independent equations and their row space.
#[derive(Debug, Clone)]
pub struct NodeState {
    id: usize,
    field: FieldSpec,
    payload_len: usize,
    space: RowSpace,
    equations: Vec<Equation>,
}

impl NodeState {
    pub fn new(id: usize, field: FieldSpec, header_dim: usize, payload_len: usize) -> Self {
        NodeState {
            id,
            space: RowSpace::new(field.clone(), header_dim),
            field,
            payload_len,
            equations: Vec::new(),
        }
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn header_dim(&self) -> usize {
        self.space.ambient_dim()
    }

    pub fn payload_len(&self) -> usize {
        self.payload_len
    }

    pub fn space(&self) -> &RowSpace {
        &self.space
    }

    pub fn equations(&self) -> &[Equation] {
        &self.equations
    }

    pub fn rank(&self) -> usize {
        self.space.rank()
    }

    /// Store the node's own blocks as unit equations starting at header
    /// column `offset`.
    pub fn add_source_blocks(
        &mut self,
        offset: usize,
        blocks: &[Vec<FieldElement>],
    ) -> Result<(), CodingError> {
        for (j, block) in blocks.iter().enumerate() {
            let pkt = Packet {
                coeffs: FVector::unit(self.header_dim(), offset + j),
                payload: FVector(block.clone()),
            };
            self.receive(&pkt)?;
        }
        Ok(())
    }

    /// A uniformly random combination of everything stored.
    pub fn make_packet<R: Rng + ?Sized>(&self, rng: &mut R) -> Packet {
        let mut pkt = Packet::zero(self.header_dim(), self.payload_len);
        for eq in &self.equations {
            let c = self.field.random(rng);
            if !c.is_zero() {
                axpy(&self.field, &mut pkt.coeffs, c, &eq.coeffs);
                axpy(&self.field, &mut pkt.payload, c, &eq.payload);
            }
        }
        pkt
    }

    /// Insert a packet; returns whether the rank grew.
    pub fn receive(&mut self, pkt: &Packet) -> Result<bool, CodingError> {
        if pkt.payload.len() != self.payload_len {
            return Err(CodingError::DimensionMismatch {
                expected: self.payload_len,
                got: pkt.payload.len(),
            });
        }
        let innovative = self.space.insert(&pkt.coeffs)?;
        if innovative {
            self.equations.push(Equation {
                coeffs: pkt.coeffs.0.clone(),
                payload: pkt.payload.0.clone(),
            });
        }
        Ok(innovative)
    }

    pub fn can_decode_rank(&self, threshold: usize) -> bool {
        self.rank() >= threshold
    }

    /// Solve for every block once the space is full.
    pub fn solve(&self) -> Option<Vec<Vec<FieldElement>>> {
        let dim = self.header_dim();
        if self.rank() < dim {
            return None;
        }
        let f = &self.field;
        let mut rows: Vec<(Vec<FieldElement>, Vec<FieldElement>)> = self
            .equations
            .iter()
            .map(|e| (e.coeffs.clone(), e.payload.clone()))
            .collect();
        for col in 0..dim {
            let pivot = (col..rows.len()).find(|&r| !rows[r].0[col].is_zero())?;
            rows.swap(col, pivot);
            let inv = f.inv(rows[col].0[col]).ok()?;
            let (coeffs, payload) = &mut rows[col];
            for x in coeffs.iter_mut().chain(payload.iter_mut()) {
                *x = f.mul(*x, inv);
            }
            let prow = rows[col].clone();
            for (r, row) in rows.iter_mut().enumerate() {
                let c = row.0[col];
                if r != col && !c.is_zero() {
                    let neg = f.neg(c);
                    axpy(f, &mut row.0, neg, &prow.0);
                    axpy(f, &mut row.1, neg, &prow.1);
                }
            }
        }
        Some(rows.into_iter().take(dim).map(|(_, p)| p).collect())
    }
}

/// All true blocks, used to check packets against `payload = header · blocks`.
#[derive(Debug, Clone)]
pub struct GlobalView {
    field: FieldSpec,
    blocks: Vec<Vec<FieldElement>>,
}

impl GlobalView {
    pub fn new(field: FieldSpec, blocks: Vec<Vec<FieldElement>>) -> Self {
        GlobalView { field, blocks }
    }

    pub fn blocks(&self) -> &[Vec<FieldElement>] {
        &self.blocks
    }

    pub fn consistent(&self, pkt: &Packet) -> bool {
        if pkt.coeffs.len() != self.blocks.len() {
            return false;
        }
        let mut expect = vec![FieldElement::ZERO; pkt.payload.len()];
        for (&c, block) in pkt.coeffs.iter().zip(&self.blocks) {
            if block.len() != expect.len() {
                return false;
            }
            axpy(&self.field, &mut expect, c, block);
        }
        expect == pkt.payload.0
    }
}

/// Result of exhaustive decoding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OracleOutcome {
    Decoded(Vec<u32>),
    Ambiguous,
}

/// Exhaustive MAP decoding of message `code.source_index()` at node `node`.
///
/// Equation headers cover this message's blocks only. Among all sequences
/// whose bin index satisfies every equation, returns the one of highest joint
/// probability with `y` (or with nothing if `y` is `None`).
pub fn oracle_decode(
    code: &BinningCode,
    equations: &[Equation],
    y: Option<&[u32]>,
    source: &JointSource,
    node: usize,
) -> Result<OracleOutcome, CodingError> {
    let a = code.alphabet as u128;
    let candidates = (0..code.l).try_fold(1u128, |acc, _| {
        acc.checked_mul(a).filter(|&c| c <= ORACLE_GUARD)
    });
    let Some(candidates) = candidates else {
        return Err(CodingError::TooLarge(a.saturating_pow(code.l as u32)));
    };
    for eq in equations {
        if eq.coeffs.len() != code.block_count {
            return Err(CodingError::DimensionMismatch {
                expected: code.block_count,
                got: eq.coeffs.len(),
            });
        }
    }
    if let Some(y) = y {
        if y.len() != code.l {
            return Err(CodingError::DimensionMismatch {
                expected: code.l,
                got: y.len(),
            });
        }
    }
    let table = source.message_side_table(
        code.source_index,
        if y.is_some() { node } else { usize::MAX },
    )?;
    let ya = table.len() / code.alphabet as usize;
    let log_table: Vec<f64> = table
        .iter()
        .map(|&p| {
            if p > 0.0 {
                libm::log(p)
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect();

    let mut best: Option<(f64, Vec<u32>)> = None;
    let mut tied = false;
    let mut x = vec![0u32; code.l];
    for idx in 0..candidates {
        let mut rest = idx;
        for slot in x.iter_mut().rev() {
            *slot = (rest % a) as u32;
            rest /= a;
        }
        let score: f64 = match y {
            Some(y) => x
                .iter()
                .zip(y)
                .map(|(&xi, &yi)| log_table[xi as usize * ya + yi as usize])
                .sum(),
            None => x.iter().map(|&xi| log_table[xi as usize]).sum(),
        };
        if score == f64::NEG_INFINITY {
            continue;
        }
        if let Some((b, _)) = &best {
            if score < *b - 1e-9 {
                continue;
            }
        }
        let index = code.bin_index_unchecked(&x);
        let blocks: Vec<&[FieldElement]> = index.chunks(code.symbols_per_block).collect();
        let satisfied = equations.iter().all(|eq| {
            let mut lhs = vec![FieldElement::ZERO; code.symbols_per_block];
            for (&c, block) in eq.coeffs.iter().zip(&blocks) {
                axpy(&code.field, &mut lhs, c, block);
            }
            lhs == eq.payload
        });
        if !satisfied {
            continue;
        }
        match &best {
            Some((b, _)) if score <= *b + 1e-9 => tied = true,
            _ => {
                best = Some((score, x.clone()));
                tied = false;
            }
        }
    }
    Ok(match best {
        Some((_, x)) if !tied => OracleOutcome::Decoded(x),
        _ => OracleOutcome::Ambiguous,
    })
}

/// `sum_j coeffs_j * blocks_j`, the payload an equation should carry.
pub fn combine(
    field: &FieldSpec,
    coeffs: &[FieldElement],
    blocks: &[Vec<FieldElement>],
) -> Vec<FieldElement> {
    let len = blocks.first().map_or(0, Vec::len);
    let mut out = vec![FieldElement::ZERO; len];
    for (&c, b) in coeffs.iter().zip(blocks) {
        axpy(field, &mut out, c, b);
    }
    out
}
