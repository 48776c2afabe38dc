//! Round-based gossip simulation: every node emits a coded packet, the
//! network model picks the active edges, packets are delivered, and decode
//! rounds are recorded once a node's rank reaches its threshold.

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::coding::{symbols_per_block, BinningCode, CodingError, GlobalView, NodeState};
use crate::field::{FieldElement, FieldSpec};
use crate::flooding::FloodParams;
use crate::netmodel::ModelSpec;
use crate::rng::{child_seed, stream, Domain};
use crate::sources::{JointSource, SourceError};
use crate::stats;

/// Minimum trial count for [`stopping_time_distribution`].
pub const MIN_TRIALS: usize = 100;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("at least one message is required")]
    NoMessages,
    #[error("placement lists {got} messages, setup has {expected}")]
    PlacementLength { expected: usize, got: usize },
    #[error("message {0} is not placed at any node")]
    Unplaced(usize),
    #[error("node {node} out of range for {n} nodes")]
    NodeOutOfRange { node: usize, n: usize },
    #[error("source describes {described} nodes, model has {model}")]
    NodeCountMismatch { described: usize, model: usize },
    #[error("need at least {min} trials, got {got}")]
    TooFewTrials { min: usize, got: usize },
    #[error("packet from {from} to {to} in round {round} disagrees with the true blocks")]
    Inconsistent { round: u32, from: usize, to: usize },
    #[error(transparent)]
    Coding(#[from] CodingError),
    #[error(transparent)]
    Source(#[from] SourceError),
}

/// What is being spread.
#[derive(Debug, Clone)]
pub enum MessageSetup {
    /// Independent messages of the given block counts with uniform payloads.
    /// A node decodes once it holds every block.
    Plain { blocks: Vec<usize>, s_bits: u32 },
    /// Messages drawn from `source`, randomly binned; node `v` decodes once its
    /// rank reaches the entropy threshold for its side information.
    Binned {
        source: JointSource,
        l: usize,
        s_bits: u32,
        delta: f64,
    },
}

impl MessageSetup {
    pub fn message_count(&self) -> usize {
        match self {
            MessageSetup::Plain { blocks, .. } => blocks.len(),
            MessageSetup::Binned { source, .. } => source.message_count(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopRule {
    AllNodes,
    Node(usize),
}

#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub field: FieldSpec,
    pub model: ModelSpec,
    pub messages: MessageSetup,
    /// `placement[i]` lists the nodes that start with message `i`.
    pub placement: Vec<Vec<usize>>,
    pub stop: StopRule,
    pub max_rounds: u32,
    pub trials: usize,
    pub seed: u64,
    /// Nodes whose rank is recorded after every round.
    pub trace_nodes: Vec<usize>,
}

/// Outcome of one trial.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrialResult {
    pub trial: usize,
    /// Round at which each node first reached its threshold.
    pub decode_round: Vec<Option<u32>>,
    /// `rank_trace[j][t]`: rank of `trace_nodes[j]` after round `t`.
    pub rank_trace: Vec<Vec<u32>>,
    pub rounds_run: u32,
}

impl TrialResult {
    /// Stopping time under `rule`; `None` if it never happened.
    pub fn stopping_time(&self, rule: StopRule) -> Option<u32> {
        match rule {
            StopRule::Node(v) => self.decode_round[v],
            StopRule::AllNodes => self
                .decode_round
                .iter()
                .try_fold(0u32, |acc, r| r.map(|r| acc.max(r))),
        }
    }
}

/// A validated experiment with its block layout and thresholds.
#[derive(Debug, Clone)]
pub struct Experiment {
    spec: ExperimentSpec,
    block_counts: Vec<usize>,
    offsets: Vec<usize>,
    payload_len: usize,
    thresholds: Vec<usize>,
}

impl Experiment {
    pub fn new(spec: ExperimentSpec) -> Result<Self, EngineError> {
        let n = spec.model.node_count();
        let k = spec.messages.message_count();
        if k == 0 {
            return Err(EngineError::NoMessages);
        }
        if spec.placement.len() != k {
            return Err(EngineError::PlacementLength {
                expected: k,
                got: spec.placement.len(),
            });
        }
        for (i, holders) in spec.placement.iter().enumerate() {
            if holders.is_empty() {
                return Err(EngineError::Unplaced(i));
            }
        }
        let stop_node = match spec.stop {
            StopRule::Node(v) => Some(v),
            StopRule::AllNodes => None,
        };
        for &node in spec
            .placement
            .iter()
            .flatten()
            .chain(&spec.trace_nodes)
            .chain(&stop_node)
        {
            if node >= n {
                return Err(EngineError::NodeOutOfRange { node, n });
            }
        }

        let (block_counts, payload_len, thresholds) = match &spec.messages {
            MessageSetup::Plain { blocks, s_bits } => {
                let spb = symbols_per_block(&spec.field, *s_bits)?;
                let total = blocks.iter().sum();
                (blocks.clone(), spb, vec![total; n])
            }
            MessageSetup::Binned {
                source,
                l,
                s_bits,
                delta,
            } => {
                if source.node_count() != n {
                    return Err(EngineError::NodeCountMismatch {
                        described: source.node_count(),
                        model: n,
                    });
                }
                let mut counts = Vec::with_capacity(k);
                let mut spb = 1;
                for i in 0..k {
                    let code = BinningCode::for_source(
                        spec.field.clone(),
                        source,
                        i,
                        *l,
                        *s_bits,
                        *delta,
                        0,
                    )?;
                    spb = code.symbols_per_block();
                    counts.push(code.block_count());
                }
                let total: usize = counts.iter().sum();
                let thresholds = (0..n)
                    .map(|v| {
                        source
                            .decode_threshold(v, *l, *s_bits as f64, *delta)
                            .map(|t| t.min(total))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                (counts, spb, thresholds)
            }
        };
        let offsets = block_counts
            .iter()
            .scan(0, |acc, &b| {
                let o = *acc;
                *acc += b;
                Some(o)
            })
            .collect();
        Ok(Experiment {
            spec,
            block_counts,
            offsets,
            payload_len,
            thresholds,
        })
    }

    pub fn spec(&self) -> &ExperimentSpec {
        &self.spec
    }

    pub fn block_counts(&self) -> &[usize] {
        &self.block_counts
    }

    pub fn header_dim(&self) -> usize {
        self.block_counts.iter().sum()
    }

    pub fn payload_len(&self) -> usize {
        self.payload_len
    }

    /// Rank each node must reach.
    pub fn thresholds(&self) -> &[usize] {
        &self.thresholds
    }

    pub fn trial_seed(&self, trial: usize) -> u64 {
        child_seed(self.spec.seed, Domain::Trial, trial as u64)
    }

    /// True blocks of every message for one trial, in header order.
    fn blocks(&self, seed: u64) -> Result<Vec<Vec<FieldElement>>, EngineError> {
        let field = &self.spec.field;
        let mut rng = stream(seed, Domain::Source, 0);
        match &self.spec.messages {
            MessageSetup::Plain { .. } => Ok((0..self.header_dim())
                .map(|_| {
                    (0..self.payload_len)
                        .map(|_| field.random(&mut rng))
                        .collect()
                })
                .collect()),
            MessageSetup::Binned {
                source,
                l,
                s_bits,
                delta,
            } => {
                let batch = source.sample_iid(*l, &mut rng);
                let mut all = Vec::with_capacity(self.header_dim());
                for (i, x) in batch.x.iter().enumerate() {
                    let bin_seed = child_seed(seed, Domain::Binning, i as u64);
                    let code = BinningCode::for_source(
                        field.clone(),
                        source,
                        i,
                        *l,
                        *s_bits,
                        *delta,
                        bin_seed,
                    )?;
                    all.extend(code.blocks(x)?);
                }
                Ok(all)
            }
        }
    }

    fn stopped(&self, decode: &[Option<u32>]) -> bool {
        match self.spec.stop {
            StopRule::AllNodes => decode.iter().all(Option::is_some),
            StopRule::Node(v) => decode[v].is_some(),
        }
    }

    /// One trial; deterministic in `(spec.seed, trial)`.
    pub fn run_trial(&self, trial: usize) -> Result<TrialResult, EngineError> {
        let n = self.spec.model.node_count();
        let seed = self.trial_seed(trial);
        let field = &self.spec.field;
        let blocks = self.blocks(seed)?;
        let view = GlobalView::new(field.clone(), blocks);

        let mut nodes: Vec<NodeState> = (0..n)
            .map(|v| NodeState::new(v, field.clone(), self.header_dim(), self.payload_len))
            .collect();
        for (i, holders) in self.spec.placement.iter().enumerate() {
            let own = &view.blocks()[self.offsets[i]..self.offsets[i] + self.block_counts[i]];
            for &v in holders {
                nodes[v].add_source_blocks(self.offsets[i], own)?;
            }
        }
        let mut coding: Vec<_> = (0..n)
            .map(|v| stream(seed, Domain::Coding, v as u64))
            .collect();
        let mut rounds = self.spec.model.rounds(child_seed(seed, Domain::Round, 0));

        let mut decode: Vec<Option<u32>> = nodes
            .iter()
            .zip(&self.thresholds)
            .map(|(s, &th)| s.can_decode_rank(th).then_some(0))
            .collect();
        let mut trace: Vec<Vec<u32>> = self
            .spec
            .trace_nodes
            .iter()
            .map(|&v| vec![nodes[v].rank() as u32])
            .collect();

        let mut t = 0;
        while t < self.spec.max_rounds && !self.stopped(&decode) {
            t += 1;
            let packets: Vec<_> = nodes
                .iter()
                .zip(&mut coding)
                .map(|(s, rng)| s.make_packet(rng))
                .collect();
            let active = rounds.next_round();
            for &(u, v) in &active.edges {
                let (u, v) = (u as usize, v as usize);
                if cfg!(debug_assertions) && !view.consistent(&packets[u]) {
                    return Err(EngineError::Inconsistent {
                        round: t,
                        from: u,
                        to: v,
                    });
                }
                nodes[v].receive(&packets[u])?;
            }
            for (v, slot) in decode.iter_mut().enumerate() {
                if slot.is_none() && nodes[v].can_decode_rank(self.thresholds[v]) {
                    *slot = Some(t);
                }
            }
            for (row, &v) in trace.iter_mut().zip(&self.spec.trace_nodes) {
                row.push(nodes[v].rank() as u32);
            }
        }
        Ok(TrialResult {
            trial,
            decode_round: decode,
            rank_trace: trace,
            rounds_run: t,
        })
    }

    /// Every trial, in order.
    pub fn run_all(&self) -> Result<Vec<TrialResult>, EngineError> {
        (0..self.spec.trials).map(|i| self.run_trial(i)).collect()
    }
}

/// Quantiles and bound exceedance of a stopping-time sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub trials: usize,
    pub timeouts: usize,
    /// `(p, quantile)`; `None` when the quantile falls among timeouts.
    pub quantiles: Vec<(f64, Option<u32>)>,
    pub bound: Option<f64>,
    /// Fraction of trials strictly above `bound`.
    pub exceedance: Option<f64>,
}

pub fn summarize(times: &[Option<u32>], probs: &[f64], bound: Option<f64>) -> Summary {
    Summary {
        trials: times.len(),
        timeouts: times.iter().filter(|t| t.is_none()).count(),
        quantiles: probs
            .iter()
            .map(|&p| (p, stats::quantile(times, p)))
            .collect(),
        bound,
        exceedance: bound.map(|b| stats::exceedance(times, b)),
    }
}

/// Runs every trial and collects stopping times under the experiment's stop rule.
pub fn stopping_time_distribution(
    exp: &Experiment,
) -> Result<(Vec<TrialResult>, Vec<Option<u32>>), EngineError> {
    if exp.spec.trials < MIN_TRIALS {
        return Err(EngineError::TooFewTrials {
            min: MIN_TRIALS,
            got: exp.spec.trials,
        });
    }
    let results = exp.run_all()?;
    let times = results
        .iter()
        .map(|r| r.stopping_time(exp.spec.stop))
        .collect();
    Ok((results, times))
}

/// T + (1/α)(k + log_q ε⁻¹): spreading k independent blocks.
pub fn spreading_bound(params: &FloodParams, k: f64, eps: f64) -> f64 {
    params.rounds_for(k + stats::log_q(1.0 / eps, params.q as f64))
}

/// T + (1/α)(r + log_q ε⁻¹ + 3) where `r` is the block requirement: the
/// unrounded (l/s)(H(X|Y_v)+δ) for one source, or the rounded joint
/// threshold for two.
pub fn coded_bound(params: &FloodParams, r: f64, eps: f64) -> f64 {
    params.rounds_for(r + stats::log_q(1.0 / eps, params.q as f64) + 3.0)
}
