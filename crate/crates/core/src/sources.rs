//! Correlated sources and side information, entropy queries and the
//! Slepian-Wolf sufficiency test.
//!
//! Message tuples `(x_1, …, x_k)` are indexed row-major with `x_1` most
//! significant. A source is either *factored* (a message pmf plus one channel
//! `P(y_v | x_1..x_k)` per node) or *dense* (one table over messages and all
//! side variables, `y_0` most significant after the messages).

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use thiserror::Error;

/// Largest joint table a source may expand to.
pub const CELL_GUARD: usize = 1 << 24;
/// Largest k for subset enumeration.
pub const MAX_SUBSET_K: usize = 20;

const SUM_TOLERANCE: f64 = 1e-12;
const RATE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SourceError {
    #[error("probabilities sum to {0}, not 1")]
    NotNormalized(f64),
    #[error("negative or non-finite probability {0}")]
    BadProbability(f64),
    #[error("table has {got} cells, expected {expected}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("joint table would need {0} cells")]
    TooLarge(u128),
    #[error("alphabets must be non-empty")]
    EmptyAlphabet,
    #[error("need at least one message")]
    NoMessages,
    #[error("2^{0} subsets exceed the enumeration guard")]
    KTooLarge(usize),
    #[error("capacity vector has {got} entries for {expected} messages")]
    CapacityLength { expected: usize, got: usize },
    #[error("message index {0} out of range")]
    BadMessage(usize),
}

/// Side information of one node.
#[derive(Debug, Clone, PartialEq)]
pub enum SideInfo {
    /// Nothing beyond a constant.
    None,
    /// `matrix[x * alphabet + y] = P(Y_v = y | message tuple x)`.
    Channel { alphabet: u32, matrix: Vec<f64> },
}

impl SideInfo {
    pub fn alphabet(&self) -> u32 {
        match self {
            SideInfo::None => 1,
            SideInfo::Channel { alphabet, .. } => *alphabet,
        }
    }

    fn prob(&self, x: usize, y: usize) -> f64 {
        match self {
            SideInfo::None => 1.0,
            SideInfo::Channel { alphabet, matrix } => matrix[x * *alphabet as usize + y],
        }
    }

    /// Binary symmetric channel from a single binary message.
    pub fn bsc(crossover: f64) -> Self {
        SideInfo::Channel {
            alphabet: 2,
            matrix: vec![1.0 - crossover, crossover, crossover, 1.0 - crossover],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Repr {
    Factored {
        message_pmf: Vec<f64>,
        side: Vec<SideInfo>,
    },
    Dense {
        side_alphabets: Vec<u32>,
        pmf: Vec<f64>,
    },
}

/// Joint distribution of messages X_1..X_k and side information Y_0..Y_{n-1}.
#[derive(Debug, Clone, PartialEq)]
pub struct JointSource {
    message_alphabets: Vec<u32>,
    repr: Repr,
}

/// `k` nonnegative rates, one per message.
#[derive(Debug, Clone, PartialEq)]
pub struct CapacityVector(pub Vec<f64>);

/// One draw of block length `l`: `x[i][j]` and `y[v][j]` share column `j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleBatch {
    pub l: usize,
    pub x: Vec<Vec<u32>>,
    pub y: Vec<Vec<u32>>,
}

fn product(alphabets: &[u32]) -> Result<usize, SourceError> {
    let mut cells: u128 = 1;
    for &a in alphabets {
        if a == 0 {
            return Err(SourceError::EmptyAlphabet);
        }
        cells = cells.saturating_mul(a as u128);
    }
    if cells > CELL_GUARD as u128 {
        return Err(SourceError::TooLarge(cells));
    }
    Ok(cells as usize)
}

fn check_pmf(pmf: &[f64]) -> Result<(), SourceError> {
    if let Some(&bad) = pmf.iter().find(|p| !p.is_finite() || **p < 0.0) {
        return Err(SourceError::BadProbability(bad));
    }
    let total: f64 = pmf.iter().sum();
    if (total - 1.0).abs() > SUM_TOLERANCE * (pmf.len() as f64).max(1.0) {
        return Err(SourceError::NotNormalized(total));
    }
    Ok(())
}

fn entropy_of(table: &[f64]) -> f64 {
    table
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * libm::log2(p))
        .sum()
}

fn digits(mut index: usize, alphabets: &[u32]) -> Vec<u32> {
    let mut out = vec![0; alphabets.len()];
    for (slot, &a) in out.iter_mut().zip(alphabets).rev() {
        *slot = (index % a as usize) as u32;
        index /= a as usize;
    }
    out
}

fn ceil_tol(x: f64) -> usize {
    let c = libm::ceil(x - RATE_TOLERANCE);
    if c <= 0.0 {
        0
    } else {
        c as usize
    }
}

/// `⌈x⌉` that ignores floating-point noise just above an integer.
pub fn ceil_rate(x: f64) -> usize {
    ceil_tol(x)
}

impl JointSource {
    pub fn factored(
        message_alphabets: Vec<u32>,
        message_pmf: Vec<f64>,
        side: Vec<SideInfo>,
    ) -> Result<Self, SourceError> {
        if message_alphabets.is_empty() {
            return Err(SourceError::NoMessages);
        }
        let cells = product(&message_alphabets)?;
        if message_pmf.len() != cells {
            return Err(SourceError::ShapeMismatch {
                expected: cells,
                got: message_pmf.len(),
            });
        }
        check_pmf(&message_pmf)?;
        for s in &side {
            if let SideInfo::Channel { alphabet, matrix } = s {
                product(&[*alphabet])?;
                let expected = cells * *alphabet as usize;
                if matrix.len() != expected {
                    return Err(SourceError::ShapeMismatch {
                        expected,
                        got: matrix.len(),
                    });
                }
                for row in matrix.chunks(*alphabet as usize) {
                    check_pmf(row)?;
                }
            }
        }
        Ok(JointSource {
            message_alphabets,
            repr: Repr::Factored { message_pmf, side },
        })
    }

    pub fn dense(
        message_alphabets: Vec<u32>,
        side_alphabets: Vec<u32>,
        pmf: Vec<f64>,
    ) -> Result<Self, SourceError> {
        if message_alphabets.is_empty() {
            return Err(SourceError::NoMessages);
        }
        let all: Vec<u32> = message_alphabets
            .iter()
            .chain(&side_alphabets)
            .copied()
            .collect();
        let cells = product(&all)?;
        if pmf.len() != cells {
            return Err(SourceError::ShapeMismatch {
                expected: cells,
                got: pmf.len(),
            });
        }
        check_pmf(&pmf)?;
        Ok(JointSource {
            message_alphabets,
            repr: Repr::Dense {
                side_alphabets,
                pmf,
            },
        })
    }

    /// k independent uniform messages, no side information.
    pub fn independent_uniform(k: usize, alphabet: u32, n: usize) -> Result<Self, SourceError> {
        let alphabets = vec![alphabet; k];
        let cells = product(&alphabets)?;
        Self::factored(
            alphabets,
            vec![1.0 / cells as f64; cells],
            vec![SideInfo::None; n],
        )
    }

    /// One uniform bit; node v sees it through BSC(crossover[v]) or not at all.
    pub fn dsbs(crossover: &[Option<f64>]) -> Result<Self, SourceError> {
        let side = crossover
            .iter()
            .map(|c| match c {
                Some(p) => SideInfo::bsc(*p),
                None => SideInfo::None,
            })
            .collect();
        Self::factored(vec![2], vec![0.5, 0.5], side)
    }

    /// X_i = Z xor N_i with Z a uniform bit and N_i ~ Bernoulli(flip), all
    /// independent; no side information.
    pub fn symmetric_bits(k: usize, flip: f64, n: usize) -> Result<Self, SourceError> {
        let alphabets = vec![2u32; k];
        let cells = product(&alphabets)?;
        let pmf = (0..cells)
            .map(|x| {
                let bits = digits(x, &alphabets);
                [0u32, 1]
                    .iter()
                    .map(|&z| {
                        bits.iter()
                            .map(|&b| if b == z { 1.0 - flip } else { flip })
                            .product::<f64>()
                            * 0.5
                    })
                    .sum()
            })
            .collect();
        Self::factored(alphabets, pmf, vec![SideInfo::None; n])
    }

    /// Deterministic messages.
    pub fn point_mass(
        message_alphabets: Vec<u32>,
        values: &[u32],
        n: usize,
    ) -> Result<Self, SourceError> {
        let cells = product(&message_alphabets)?;
        let index = values
            .iter()
            .zip(&message_alphabets)
            .fold(0usize, |acc, (&v, &a)| acc * a as usize + v as usize);
        let mut pmf = vec![0.0; cells];
        pmf[index] = 1.0;
        Self::factored(message_alphabets, pmf, vec![SideInfo::None; n])
    }

    /// Number of messages k.
    pub fn message_count(&self) -> usize {
        self.message_alphabets.len()
    }

    pub fn message_alphabets(&self) -> &[u32] {
        &self.message_alphabets
    }

    /// Number of nodes with a side-information variable.
    pub fn node_count(&self) -> usize {
        match &self.repr {
            Repr::Factored { side, .. } => side.len(),
            Repr::Dense { side_alphabets, .. } => side_alphabets.len(),
        }
    }

    pub fn side_alphabet(&self, v: usize) -> u32 {
        match &self.repr {
            Repr::Factored { side, .. } => side.get(v).map_or(1, SideInfo::alphabet),
            Repr::Dense { side_alphabets, .. } => side_alphabets.get(v).copied().unwrap_or(1),
        }
    }

    fn message_cells(&self) -> usize {
        self.message_alphabets.iter().map(|&a| a as usize).product()
    }

    /// `P(x_1..x_k, y_v)` as `[x * |Y_v| + y]`.
    pub fn pair_table(&self, v: usize) -> Vec<f64> {
        let cells = self.message_cells();
        let ya = self.side_alphabet(v) as usize;
        let mut out = vec![0.0; cells * ya];
        match &self.repr {
            Repr::Factored { message_pmf, side } => {
                let info = side.get(v).cloned().unwrap_or(SideInfo::None);
                for x in 0..cells {
                    for y in 0..ya {
                        out[x * ya + y] = message_pmf[x] * info.prob(x, y);
                    }
                }
            }
            Repr::Dense {
                side_alphabets,
                pmf,
            } => {
                let rest: usize = side_alphabets.iter().map(|&a| a as usize).product();
                if v >= side_alphabets.len() {
                    for (x, slot) in out.iter_mut().enumerate() {
                        *slot = pmf[x * rest..(x + 1) * rest].iter().sum();
                    }
                } else {
                    let inner: usize = side_alphabets[v + 1..]
                        .iter()
                        .map(|&a| a as usize)
                        .product();
                    for (cell, &p) in pmf.iter().enumerate() {
                        let x = cell / rest;
                        let y = (cell % rest) / inner % ya;
                        out[x * ya + y] += p;
                    }
                }
            }
        }
        out
    }

    /// `P(x_i, y_v)` as `[x_i * |Y_v| + y]`.
    pub fn message_side_table(&self, i: usize, v: usize) -> Result<Vec<f64>, SourceError> {
        if i >= self.message_count() {
            return Err(SourceError::BadMessage(i));
        }
        let ya = self.side_alphabet(v) as usize;
        let xa = self.message_alphabets[i] as usize;
        let mut out = vec![0.0; xa * ya];
        for (cell, &p) in self.pair_table(v).iter().enumerate() {
            let x = cell / ya;
            let xi = digits(x, &self.message_alphabets)[i] as usize;
            out[xi * ya + cell % ya] += p;
        }
        Ok(out)
    }

    /// H(X_S | X_{S̄}, Y_v) in bits; `subset` holds 0-based message indices.
    pub fn cond_entropy(&self, subset: &[usize], v: usize) -> Result<f64, SourceError> {
        let k = self.message_count();
        if let Some(&bad) = subset.iter().find(|&&i| i >= k) {
            return Err(SourceError::BadMessage(bad));
        }
        if subset.is_empty() {
            return Ok(0.0);
        }
        let table = self.pair_table(v);
        let ya = self.side_alphabet(v) as usize;
        // marginal over (X_{S̄}, Y_v)
        let rest: Vec<usize> = (0..k).filter(|i| !subset.contains(i)).collect();
        let rest_alph: Vec<u32> = rest.iter().map(|&i| self.message_alphabets[i]).collect();
        let rest_cells: usize = rest_alph.iter().map(|&a| a as usize).product();
        let mut marginal = vec![0.0; rest_cells * ya];
        for (cell, &p) in table.iter().enumerate() {
            let x = digits(cell / ya, &self.message_alphabets);
            let r = rest
                .iter()
                .zip(&rest_alph)
                .fold(0usize, |acc, (&i, &a)| acc * a as usize + x[i] as usize);
            marginal[r * ya + cell % ya] += p;
        }
        Ok((entropy_of(&table) - entropy_of(&marginal)).max(0.0))
    }

    /// H(X_i) in bits.
    pub fn message_entropy(&self, i: usize) -> Result<f64, SourceError> {
        let t = self.message_side_table(i, usize::MAX)?;
        Ok(entropy_of(&t))
    }

    /// Whether `cap` lies in the Slepian-Wolf region of node `v`.
    pub fn sw_sufficient(&self, v: usize, cap: &CapacityVector) -> Result<bool, SourceError> {
        let k = self.message_count();
        if k > MAX_SUBSET_K {
            return Err(SourceError::KTooLarge(k));
        }
        if cap.0.len() != k {
            return Err(SourceError::CapacityLength {
                expected: k,
                got: cap.0.len(),
            });
        }
        for mask in 1u32..(1 << k) {
            let subset: Vec<usize> = (0..k).filter(|i| mask >> i & 1 == 1).collect();
            let rate: f64 = subset.iter().map(|&i| cap.0[i]).sum();
            if rate + RATE_TOLERANCE < self.cond_entropy(&subset, v)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Rank node `v` must reach: ⌈(l/s)(H(X_1..X_k | Y_v) + k·δ)⌉.
    ///
    /// For one message this is ⌈(l/s)(H(X|Y_v) + δ)⌉, for two messages without
    /// side information ⌈(l/s)(H(X_1, X_2) + 2δ)⌉.
    pub fn decode_threshold(
        &self,
        v: usize,
        l: usize,
        s_bits: f64,
        delta: f64,
    ) -> Result<usize, SourceError> {
        let all: Vec<usize> = (0..self.message_count()).collect();
        let h = self.cond_entropy(&all, v)?;
        if h <= 0.0 {
            return Ok(0);
        }
        let k = self.message_count() as f64;
        Ok(ceil_tol(l as f64 / s_bits * (h + k * delta)))
    }

    /// `l` i.i.d. columns from the joint distribution.
    pub fn sample_iid<R: Rng + ?Sized>(&self, l: usize, rng: &mut R) -> SampleBatch {
        let k = self.message_count();
        let n = self.node_count();
        let mut x = vec![Vec::with_capacity(l); k];
        let mut y = vec![Vec::with_capacity(l); n];
        match &self.repr {
            Repr::Factored { message_pmf, side } => {
                let cdf = cumulative(message_pmf);
                for _ in 0..l {
                    let cell = draw(&cdf, rng);
                    for (i, d) in digits(cell, &self.message_alphabets)
                        .into_iter()
                        .enumerate()
                    {
                        x[i].push(d);
                    }
                    for (v, info) in side.iter().enumerate() {
                        let yv = match info {
                            SideInfo::None => 0,
                            SideInfo::Channel { alphabet, matrix } => {
                                let a = *alphabet as usize;
                                draw_row(&matrix[cell * a..(cell + 1) * a], rng) as u32
                            }
                        };
                        y[v].push(yv);
                    }
                }
            }
            Repr::Dense {
                side_alphabets,
                pmf,
            } => {
                let cdf = cumulative(pmf);
                let all: Vec<u32> = self
                    .message_alphabets
                    .iter()
                    .chain(side_alphabets)
                    .copied()
                    .collect();
                for _ in 0..l {
                    let d = digits(draw(&cdf, rng), &all);
                    for i in 0..k {
                        x[i].push(d[i]);
                    }
                    for v in 0..n {
                        y[v].push(d[k + v]);
                    }
                }
            }
        }
        SampleBatch { l, x, y }
    }
}

fn cumulative(pmf: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    pmf.iter()
        .map(|&p| {
            acc += p;
            acc
        })
        .collect()
}

fn draw<R: Rng + ?Sized>(cdf: &[f64], rng: &mut R) -> usize {
    let total = *cdf.last().unwrap();
    let u: f64 = rng.gen::<f64>() * total;
    let i = cdf.partition_point(|&c| c <= u);
    // never land on a zero-probability cell past the end
    i.min(cdf.len() - 1)
}

fn draw_row<R: Rng + ?Sized>(row: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &p) in row.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    row.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::binary_entropy;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-9
    }

    #[test]
    fn entropy_examples() {
        let ind = JointSource::independent_uniform(2, 2, 1).unwrap();
        assert!(close(ind.cond_entropy(&[0, 1], 0).unwrap(), 2.0));
        assert!(close(ind.cond_entropy(&[0], 0).unwrap(), 1.0));
        assert_eq!(ind.cond_entropy(&[], 0).unwrap(), 0.0);

        let copy = JointSource::dsbs(&[Some(0.0)]).unwrap();
        assert!(close(copy.cond_entropy(&[0], 0).unwrap(), 0.0));

        let d = JointSource::dsbs(&[Some(0.11)]).unwrap();
        let h = d.cond_entropy(&[0], 0).unwrap();
        assert!(close(h, binary_entropy(0.11)));
        assert!((h - 0.49993).abs() < 5e-5);
    }

    #[test]
    fn sw_examples() {
        let ind = JointSource::independent_uniform(2, 2, 1).unwrap();
        assert!(ind
            .sw_sufficient(0, &CapacityVector(vec![1.0, 1.0]))
            .unwrap());
        assert!(!ind
            .sw_sufficient(0, &CapacityVector(vec![0.9, 1.0]))
            .unwrap());
        let sym = JointSource::symmetric_bits(3, 0.2, 1).unwrap();
        assert!(sym.sw_sufficient(0, &CapacityVector(vec![1.0; 3])).unwrap());
        assert_eq!(
            sym.sw_sufficient(0, &CapacityVector(vec![1.0; 2])),
            Err(SourceError::CapacityLength {
                expected: 3,
                got: 2
            })
        );
    }

    #[test]
    fn threshold_examples() {
        let point = JointSource::point_mass(vec![2], &[1], 1).unwrap();
        assert_eq!(point.decode_threshold(0, 100, 10.0, 0.1).unwrap(), 0);

        let bit = JointSource::dsbs(&[None]).unwrap();
        assert_eq!(bit.decode_threshold(0, 100, 10.0, 0.1).unwrap(), 11);

        let d = JointSource::dsbs(&[Some(0.11)]).unwrap();
        assert_eq!(d.decode_threshold(0, 100, 10.0, 0.1).unwrap(), 6);
    }

    #[test]
    fn sampling_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let point = JointSource::point_mass(vec![3, 5], &[2, 4], 2).unwrap();
        let b = point.sample_iid(50, &mut rng);
        assert!(b.x[0].iter().all(|&v| v == 2) && b.x[1].iter().all(|&v| v == 4));

        let bit = JointSource::dsbs(&[None]).unwrap();
        let b = bit.sample_iid(10_000, &mut rng);
        let ones = b.x[0].iter().filter(|&&v| v == 1).count() as f64 / 1e4;
        assert!((0.48..=0.52).contains(&ones));

        let d = JointSource::dsbs(&[Some(0.2), None]).unwrap();
        let b = d.sample_iid(10_000, &mut rng);
        let flips = b.x[0].iter().zip(&b.y[0]).filter(|(a, c)| a != c).count() as f64;
        let sd = (1e4f64 * 0.2 * 0.8).sqrt();
        assert!((flips - 2000.0).abs() < 3.0 * sd);
        assert!(b.y[1].iter().all(|&v| v == 0));
    }

    #[test]
    fn dense_matches_factored() {
        // a factored DSBS with two nodes written out densely
        let f = JointSource::dsbs(&[Some(0.1), Some(0.3)]).unwrap();
        let mut pmf = Vec::new();
        for x in 0..2u32 {
            for y0 in 0..2u32 {
                for y1 in 0..2u32 {
                    let c0 = if x == y0 { 0.9 } else { 0.1 };
                    let c1 = if x == y1 { 0.7 } else { 0.3 };
                    pmf.push(0.5 * c0 * c1);
                }
            }
        }
        let d = JointSource::dense(vec![2], vec![2, 2], pmf).unwrap();
        for v in 0..2 {
            let a = f.cond_entropy(&[0], v).unwrap();
            let b = d.cond_entropy(&[0], v).unwrap();
            assert!(close(a, b), "node {v}: {a} vs {b}");
        }
    }

    #[test]
    fn construction_errors() {
        assert!(matches!(
            JointSource::factored(vec![2], vec![0.5, 0.6], vec![]),
            Err(SourceError::NotNormalized(_))
        ));
        assert!(matches!(
            JointSource::factored(vec![2], vec![1.5, -0.5], vec![]),
            Err(SourceError::BadProbability(_))
        ));
        assert!(matches!(
            JointSource::dense(vec![2], vec![2], vec![0.25; 3]),
            Err(SourceError::ShapeMismatch { .. })
        ));
        assert!(matches!(
            JointSource::independent_uniform(25, 2, 0),
            Err(SourceError::TooLarge(_))
        ));
        assert_eq!(
            JointSource::factored(vec![], vec![], vec![]).unwrap_err(),
            SourceError::NoMessages
        );
    }
}
