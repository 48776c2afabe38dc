//! The faulty flooding process over an oblivious network model and the
//! Monte Carlo estimate of its flooding time `T` and throughput `alpha`.
//!
//! Indexing: `S_1` is the start set and `S_{t+1}` is obtained from `S_t` by
//! the surviving edges of round `t`. The stopping time is the first `t` with
//! `S_t = V`; a start set equal to `V` stops at 1.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use thiserror::Error;

use crate::netmodel::ModelSpec;
use crate::nodeset::NodeSet;
use crate::rng::{self, child_seed, Domain};
use crate::stats;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FloodError {
    #[error("flooding did not reach every node within {rounds} rounds ({informed} informed)")]
    Timeout { rounds: u32, informed: usize },
    #[error("start set is empty")]
    EmptyStart,
    #[error("fault probability {0} is outside [0, 1]")]
    BadProbability(f64),
    #[error("start set universe {got} does not match the model's {expected} nodes")]
    UniverseMismatch { expected: usize, got: usize },
    #[error("at least {min} trials are required, got {got}")]
    TooFewTrials { min: usize, got: usize },
}

/// `S_1 ⊆ S_2 ⊆ …` up to absorption.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FloodTrajectory {
    pub sets: Vec<NodeSet>,
    pub stop_time: u32,
}

impl FloodTrajectory {
    pub fn sizes(&self) -> impl Iterator<Item = usize> + '_ {
        self.sets.iter().map(NodeSet::len)
    }
}

fn check_inputs(model: &ModelSpec, p_fault: f64, start: &NodeSet) -> Result<(), FloodError> {
    if !(0.0..=1.0).contains(&p_fault) {
        return Err(FloodError::BadProbability(p_fault));
    }
    if start.universe() != model.node_count() {
        return Err(FloodError::UniverseMismatch {
            expected: model.node_count(),
            got: start.universe(),
        });
    }
    if start.is_empty() {
        return Err(FloodError::EmptyStart);
    }
    Ok(())
}

/// Runs the process, calling `visit` with every `S_t`. Returns the stop time
/// or `None` after `max_rounds` sets without absorption.
///
/// Round edge sets come from `model.rounds(seed)`; fault coins from a separate
/// stream with one coin per edge in edge order, so two runs with the same seed
/// and nested start sets are coupled.
fn run(
    model: &ModelSpec,
    p_fault: f64,
    start: &NodeSet,
    max_rounds: u32,
    seed: u64,
    mut visit: impl FnMut(&NodeSet),
) -> Option<u32> {
    let mut informed = start.clone();
    visit(&informed);
    if informed.is_full() {
        return Some(1);
    }
    let mut rounds = model.rounds(seed);
    let mut faults = rng::stream(seed, Domain::Fault, 0);
    for t in 1..max_rounds {
        let edges = rounds.next_round();
        let mut next = informed.clone();
        for &(u, v) in &edges.edges {
            let survives = !faults.gen_bool(p_fault);
            if survives && informed.contains(u as usize) {
                next.insert(v as usize);
            }
        }
        informed = next;
        visit(&informed);
        if informed.is_full() {
            return Some(t + 1);
        }
    }
    None
}

/// Floods from `start` with per-edge fault probability `p_fault`.
pub fn flood(
    model: &ModelSpec,
    p_fault: f64,
    start: &NodeSet,
    max_rounds: u32,
    seed: u64,
) -> Result<FloodTrajectory, FloodError> {
    check_inputs(model, p_fault, start)?;
    let mut sets = Vec::new();
    match run(model, p_fault, start, max_rounds, seed, |s| {
        sets.push(s.clone())
    }) {
        Some(stop_time) => Ok(FloodTrajectory { sets, stop_time }),
        None => Err(FloodError::Timeout {
            rounds: max_rounds,
            informed: sets.last().map_or(0, NodeSet::len),
        }),
    }
}

/// Stopping time only; `None` on timeout.
pub fn stop_time(
    model: &ModelSpec,
    p_fault: f64,
    start: &NodeSet,
    max_rounds: u32,
    seed: u64,
) -> Result<Option<u32>, FloodError> {
    check_inputs(model, p_fault, start)?;
    Ok(run(model, p_fault, start, max_rounds, seed, |_| {}))
}

/// Settings for [`estimate_flood_params`].
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateConfig {
    /// Trials per start node.
    pub trials: usize,
    pub max_rounds: u32,
    /// Exponent reported when the observed tail is too short to fit.
    pub alpha_cap: f64,
    /// Use at most this many start nodes (evenly spaced); all when `None`.
    pub max_starts: Option<usize>,
    /// Family-wise confidence of the per-point tail upper bounds.
    pub confidence: f64,
    pub seed: u64,
}

impl Default for EstimateConfig {
    fn default() -> Self {
        EstimateConfig {
            trials: 1000,
            max_rounds: 10_000,
            alpha_cap: 16.0,
            max_starts: None,
            confidence: 0.95,
            seed: 0,
        }
    }
}

/// Minimum trial count accepted by the estimator.
pub const MIN_TRIALS: usize = 1000;

/// Flooding time and throughput estimated at field size `q`.
#[derive(Debug, Clone, PartialEq)]
pub struct FloodParams {
    pub t: u32,
    pub alpha: f64,
    pub q: u32,
    pub trials: usize,
    /// Least-squares slope of `-log_q P[S_F ≥ T + k]` against `k`.
    pub fitted_slope: f64,
    /// RMS residual of that fit.
    pub residual: f64,
    /// Number of `k ≥ 1` with a nonzero empirical tail.
    pub tail_points: usize,
    /// Set when the tail was too short and `alpha` is the configured cap.
    pub alpha_capped: bool,
    /// Worst-case empirical tail: `(t, max_v P[S_F ≥ t])` for every `t` from
    /// the smallest observed stop time to the largest.
    pub tail: Vec<(u32, f64)>,
}

impl FloodParams {
    /// T + (1/alpha)(load), the shape shared by every stopping-time bound.
    pub fn rounds_for(&self, load: f64) -> f64 {
        self.t as f64 + load / self.alpha
    }
}

/// Start nodes used by the estimator.
pub fn estimation_starts(n: usize, max_starts: Option<usize>) -> Vec<usize> {
    match max_starts {
        Some(m) if m < n && m > 0 => (0..m).map(|i| i * n / m).collect(),
        _ => (0..n).collect(),
    }
}

/// Seed of trial `i` from start node `v`.
pub fn trial_seed(seed: u64, v: usize, i: usize) -> u64 {
    child_seed(
        child_seed(seed, Domain::Trial, v as u64),
        Domain::Trial,
        i as u64,
    )
}

/// Stop times from one start node, `None` for timeouts.
pub fn sample_stop_times(
    model: &ModelSpec,
    q: u32,
    v: usize,
    config: &EstimateConfig,
) -> Vec<Option<u32>> {
    let start = NodeSet::from_nodes(model.node_count(), [v]);
    let p_fault = 1.0 / q as f64;
    (0..config.trials)
        .map(|i| {
            let seed = trial_seed(config.seed, v, i);
            run(model, p_fault, &start, config.max_rounds, seed, |_| {})
        })
        .collect()
}

/// Turns per-start stop-time samples into `(T, alpha)`.
///
/// `T` is the smallest `t` whose worst-case exceedance `P[S_F > t]` is at
/// most `1/q`. `alpha` is the largest exponent for which the upper confidence
/// bound of every observed tail point still satisfies
/// `P[S_F ≥ T + k] < q^{-alpha k}`, further limited by the lower confidence
/// bound of the least-squares slope and by `alpha_cap`.
pub fn fit_flood_params(
    samples: &[Vec<Option<u32>>],
    q: u32,
    config: &EstimateConfig,
) -> FloodParams {
    let qf = q as f64;
    let trials = samples.first().map_or(0, Vec::len);
    let horizon = config.max_rounds + 1;
    // counts[v][t] = #{S_F ≥ t}, timeouts counted everywhere
    let counts: Vec<Vec<u64>> = samples
        .iter()
        .map(|s| {
            let mut hist = vec![0u64; horizon as usize + 2];
            for x in s {
                let t = x.unwrap_or(horizon) as usize;
                hist[t] += 1;
            }
            let mut ge = vec![0u64; hist.len() + 1];
            for t in (0..hist.len()).rev() {
                ge[t] = ge[t + 1] + hist[t];
            }
            ge
        })
        .collect();
    let worst = |t: u32| -> u64 {
        counts
            .iter()
            .map(|c| c.get(t as usize).copied().unwrap_or(0))
            .max()
            .unwrap_or(0)
    };
    let n = trials as f64;
    let min_stop = samples
        .iter()
        .flatten()
        .map(|x| x.unwrap_or(horizon))
        .min()
        .unwrap_or(1);
    let max_stop = samples
        .iter()
        .flatten()
        .map(|x| x.unwrap_or(horizon))
        .max()
        .unwrap_or(1);
    let tail: Vec<(u32, f64)> = (min_stop..=max_stop)
        .map(|t| (t, worst(t) as f64 / n))
        .collect();

    let mut t_hat = min_stop;
    while t_hat < max_stop && (worst(t_hat + 1) as f64 / n) > 1.0 / qf {
        t_hat += 1;
    }

    let observed: Vec<u32> = (1..)
        .map(|k| (k, worst(t_hat + k)))
        .take_while(|&(_, c)| c > 0)
        .map(|(k, _)| k)
        .collect();
    let tail_points = observed.len();
    if tail_points < 3 {
        return FloodParams {
            t: t_hat,
            alpha: config.alpha_cap,
            q,
            trials,
            fitted_slope: f64::NAN,
            residual: f64::NAN,
            tail_points,
            alpha_capped: true,
            tail,
        };
    }

    let points: Vec<(f64, f64)> = observed
        .iter()
        .map(|&k| (k as f64, -stats::log_q(worst(t_hat + k) as f64 / n, qf)))
        .collect();
    let (slope, se, residual) = stats::slope_through_origin(&points);
    let one_sided = stats::normal_quantile(config.confidence);
    let slope_lower = slope - one_sided * se;

    // Bonferroni over tail points and start nodes for the envelope.
    let families = (tail_points * samples.len()) as f64;
    let z = stats::normal_quantile(1.0 - (1.0 - config.confidence) / families);
    let envelope = observed
        .iter()
        .map(|&k| {
            let upper = samples
                .iter()
                .zip(&counts)
                .map(|(s, c)| {
                    let hits = c.get((t_hat + k) as usize).copied().unwrap_or(0);
                    stats::wilson_upper(hits, s.len() as u64, z)
                })
                .fold(0.0f64, f64::max);
            -stats::log_q(upper, qf) / k as f64
        })
        .fold(f64::INFINITY, f64::min);

    let alpha = envelope.min(slope_lower).min(config.alpha_cap);
    FloodParams {
        t: t_hat,
        alpha: alpha.max(f64::MIN_POSITIVE),
        q,
        trials,
        fitted_slope: slope,
        residual,
        tail_points,
        alpha_capped: false,
        tail,
    }
}

/// Sequential estimator: samples every start node and fits `(T, alpha)`.
pub fn estimate_flood_params(
    model: &ModelSpec,
    q: u32,
    config: &EstimateConfig,
) -> Result<FloodParams, FloodError> {
    if config.trials < MIN_TRIALS {
        return Err(FloodError::TooFewTrials {
            min: MIN_TRIALS,
            got: config.trials,
        });
    }
    let samples: Vec<_> = estimation_starts(model.node_count(), config.max_starts)
        .into_iter()
        .map(|v| sample_stop_times(model, q, v, config))
        .collect();
    Ok(fit_flood_params(&samples, q, config))
}
