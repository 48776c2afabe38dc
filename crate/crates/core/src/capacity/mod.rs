//! Time-expanded graphs and fractional capacity between sources and a sink.
//!
//! A path over rounds `1..=T` is a node sequence `v_0, …, v_T` where each step
//! either stays put or follows an edge active in that round. Weighted paths
//! are valid when, in every round, the weights crossing any active edge sum
//! to at most one. Feasibility of rational demands is decided exactly by
//! scaling with the common denominator and running integral max-flow.

mod maxflow;
mod oracle;

pub use maxflow::{FlowNetwork, UNBOUNDED};
pub use oracle::brute_force_feasible;

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use num_integer::Integer;
use num_rational::Ratio;
use thiserror::Error;

use crate::flooding::FloodParams;
use crate::netmodel::{ActiveEdgeSet, Edge, ModelSpec};
use crate::sources::{ceil_rate, CapacityVector, JointSource, SourceError};
use crate::stats;

/// Exact nonnegative rate.
pub type Rate = Ratio<u64>;

/// Largest common denominator accepted unless configured otherwise.
pub const DEFAULT_MAX_DENOMINATOR: u64 = 1024;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CapacityError {
    #[error("common denominator {den} exceeds {max}")]
    DenominatorTooLarge { den: u64, max: u64 },
    #[error("node {node} out of range for {n} nodes")]
    NodeOutOfRange { node: usize, n: usize },
    #[error("{sources} sources but {demands} demands")]
    DemandLength { sources: usize, demands: usize },
    #[error("not feasible within {rounds} rounds")]
    Timeout { rounds: u32 },
    #[error("capacity vector lies outside the Slepian-Wolf region of node {0}")]
    InsufficientCapacity(usize),
    #[error("epsilon must lie in (0, 1)")]
    BadEpsilon,
    #[error(transparent)]
    Source(#[from] SourceError),
}

/// Layers `0..=T` of node copies joined by the active edges of rounds `1..=T`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimeExpandedGraph {
    n: usize,
    rounds: Vec<Vec<Edge>>,
}

impl TimeExpandedGraph {
    pub fn new(n: usize, rounds: Vec<Vec<Edge>>) -> Result<Self, CapacityError> {
        let mut g = TimeExpandedGraph {
            n,
            rounds: Vec::new(),
        };
        for edges in rounds {
            g.push_round(edges)?;
        }
        Ok(g)
    }

    pub fn from_active(n: usize, rounds: &[ActiveEdgeSet]) -> Result<Self, CapacityError> {
        Self::new(n, rounds.iter().map(|r| r.edges.clone()).collect())
    }

    /// Appends round `T + 1`.
    pub fn push_round(&mut self, mut edges: Vec<Edge>) -> Result<(), CapacityError> {
        for &(u, v) in &edges {
            for node in [u, v] {
                if node as usize >= self.n {
                    return Err(CapacityError::NodeOutOfRange {
                        node: node as usize,
                        n: self.n,
                    });
                }
            }
        }
        edges.sort_unstable();
        edges.dedup();
        self.rounds.push(edges);
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    /// Number of rounds T.
    pub fn horizon(&self) -> usize {
        self.rounds.len()
    }

    /// `rounds()[t - 1]` is E_t.
    pub fn rounds(&self) -> &[Vec<Edge>] {
        &self.rounds
    }

    /// Communication arcs plus memory arcs.
    pub fn arc_count(&self) -> usize {
        self.rounds.iter().map(Vec::len).sum::<usize>() + self.n * self.horizon()
    }
}

/// Demands `c_i` from `sources[i]` to `sink`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CapacityDemand {
    pub sources: Vec<usize>,
    pub demands: Vec<Rate>,
    pub sink: usize,
}

impl CapacityDemand {
    pub fn new(
        sources: Vec<usize>,
        demands: Vec<Rate>,
        sink: usize,
    ) -> Result<Self, CapacityError> {
        if sources.len() != demands.len() {
            return Err(CapacityError::DemandLength {
                sources: sources.len(),
                demands: demands.len(),
            });
        }
        Ok(CapacityDemand {
            sources,
            demands,
            sink,
        })
    }

    /// Same demand `c` from every source.
    pub fn uniform(sources: Vec<usize>, c: Rate, sink: usize) -> Self {
        let demands = vec![c; sources.len()];
        CapacityDemand {
            sources,
            demands,
            sink,
        }
    }

    fn check(&self, n: usize) -> Result<(), CapacityError> {
        if self.sources.len() != self.demands.len() {
            return Err(CapacityError::DemandLength {
                sources: self.sources.len(),
                demands: self.demands.len(),
            });
        }
        for &node in self.sources.iter().chain([&self.sink]) {
            if node >= n {
                return Err(CapacityError::NodeOutOfRange { node, n });
            }
        }
        Ok(())
    }

    /// Least common denominator of the demands.
    pub fn denominator(&self) -> u64 {
        self.demands.iter().fold(1, |acc, c| acc.lcm(c.denom()))
    }
}

/// A path `nodes[t]` at layer `t`, carrying `weight` for source `source_index`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightedPath {
    pub source_index: usize,
    pub nodes: Vec<u32>,
    pub weight: Rate,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Feasibility {
    pub feasible: bool,
    /// Common denominator used for scaling.
    pub scale: u64,
    /// Max-flow value in units of `1 / scale`.
    pub flow: u64,
    pub required: u64,
    /// Flow decomposition; covers every demand when feasible.
    pub paths: Vec<WeightedPath>,
}

/// Decides whether every demand can be met simultaneously by valid weighted
/// paths, and returns such paths when it can.
pub fn feasible(
    graph: &TimeExpandedGraph,
    demand: &CapacityDemand,
    max_denominator: u64,
) -> Result<Feasibility, CapacityError> {
    let n = graph.n;
    demand.check(n)?;
    let scale = demand.denominator();
    if scale > max_denominator {
        return Err(CapacityError::DenominatorTooLarge {
            den: scale,
            max: max_denominator,
        });
    }
    let horizon = graph.horizon();
    let id = |t: usize, v: usize| t * n + v;
    let source = (horizon + 1) * n;
    let sink = id(horizon, demand.sink);
    let mut net = FlowNetwork::new(source + 1);

    let units: Vec<u64> = demand
        .demands
        .iter()
        .map(|c| (c * scale).to_integer())
        .collect();
    let supply: Vec<usize> = demand
        .sources
        .iter()
        .zip(&units)
        .map(|(&s, &u)| net.add_arc(source, id(0, s), u))
        .collect();
    for (t, edges) in graph.rounds.iter().enumerate() {
        for v in 0..n {
            net.add_arc(id(t, v), id(t + 1, v), UNBOUNDED);
        }
        for &(u, v) in edges {
            net.add_arc(id(t, u as usize), id(t + 1, v as usize), scale);
        }
    }
    let required: u64 = units.iter().sum();
    let flow = net.max_flow(source, sink, required);

    let mut remaining: Vec<u64> = (0..net.arc_count())
        .map(|a| if a % 2 == 0 { net.flow(a) } else { 0 })
        .collect();
    let mut paths = Vec::new();
    for (i, &arc) in supply.iter().enumerate() {
        while remaining[arc] > 0 {
            let mut arcs = vec![arc];
            let mut u = net.head(arc);
            while u != sink {
                let next = net
                    .out_arcs(u)
                    .find(|&a| remaining[a] > 0)
                    .expect("flow conservation");
                arcs.push(next);
                u = net.head(next);
            }
            let b = arcs.iter().map(|&a| remaining[a]).min().unwrap();
            for &a in &arcs {
                remaining[a] -= b;
            }
            let nodes = arcs.iter().map(|&a| (net.head(a) % n) as u32).collect();
            paths.push(WeightedPath {
                source_index: i,
                nodes,
                weight: Ratio::new(b, scale),
            });
        }
    }
    Ok(Feasibility {
        feasible: flow == required,
        scale,
        flow,
        required,
        paths,
    })
}

/// Checks path legality, per-round edge loads and per-source totals.
pub fn validate_paths(
    paths: &[WeightedPath],
    graph: &TimeExpandedGraph,
    demand: &CapacityDemand,
) -> bool {
    if demand.check(graph.n).is_err() {
        return false;
    }
    let horizon = graph.horizon();
    let mut load: BTreeMap<(usize, u32, u32), Rate> = BTreeMap::new();
    let mut delivered = vec![Rate::from_integer(0); demand.sources.len()];
    for p in paths {
        if p.source_index >= demand.sources.len()
            || p.nodes.len() != horizon + 1
            || p.nodes[0] as usize != demand.sources[p.source_index]
            || p.nodes[horizon] as usize != demand.sink
        {
            return false;
        }
        for t in 1..=horizon {
            let (u, v) = (p.nodes[t - 1], p.nodes[t]);
            if u == v {
                continue;
            }
            if graph.rounds[t - 1].binary_search(&(u, v)).is_err() {
                return false;
            }
            *load.entry((t, u, v)).or_insert(Rate::from_integer(0)) += p.weight;
        }
        delivered[p.source_index] += p.weight;
    }
    load.values().all(|w| *w <= Rate::from_integer(1))
        && delivered.iter().zip(&demand.demands).all(|(d, c)| d >= c)
}

/// Samples rounds from `model` and returns the first horizon at which the
/// demand becomes feasible, together with the witness.
pub fn first_feasible_time(
    model: &ModelSpec,
    demand: &CapacityDemand,
    max_rounds: u32,
    seed: u64,
    max_denominator: u64,
) -> Result<(u32, Feasibility), CapacityError> {
    let mut graph = TimeExpandedGraph::new(model.node_count(), Vec::new())?;
    let mut rounds = model.rounds(seed);
    loop {
        let f = feasible(&graph, demand, max_denominator)?;
        if f.feasible {
            return Ok((graph.horizon() as u32, f));
        }
        if graph.horizon() as u32 >= max_rounds {
            return Err(CapacityError::Timeout { rounds: max_rounds });
        }
        graph.push_round(rounds.next_round().edges)?;
    }
}

/// Reweights per-source bundles of unit paths by `c_i / total`, where each
/// bundle holds `total` units of valid single-source flow.
pub fn share_capacity(
    bundles: &[Vec<WeightedPath>],
    demands: &[Rate],
    total: u64,
) -> Vec<WeightedPath> {
    bundles
        .iter()
        .zip(demands)
        .enumerate()
        .flat_map(|(i, (bundle, &c))| {
            bundle.iter().map(move |p| WeightedPath {
                source_index: i,
                nodes: p.nodes.clone(),
                weight: p.weight * c / Rate::from_integer(total.max(1)),
            })
        })
        .collect()
}

/// Rounds after which node `v` decodes every message when `cap` is in its
/// Slepian-Wolf region:
/// T + (1/α)(⌈(l/s) Σ c_i + δ_in⌉ + log_q k + log_q ε⁻¹ + δ_out).
#[allow(clippy::too_many_arguments)]
pub fn capacity_bound(
    params: &FloodParams,
    source: &JointSource,
    v: usize,
    cap: &CapacityVector,
    l: usize,
    s_bits: f64,
    eps: f64,
    delta_inner: f64,
    delta_outer: f64,
) -> Result<f64, CapacityError> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(CapacityError::BadEpsilon);
    }
    if !source.sw_sufficient(v, cap)? {
        return Err(CapacityError::InsufficientCapacity(v));
    }
    let q = params.q as f64;
    let k = source.message_count() as f64;
    let rate: f64 = cap.0.iter().sum();
    let blocks = ceil_rate(l as f64 / s_bits * rate + delta_inner) as f64;
    Ok(params.rounds_for(blocks + stats::log_q(k, q) + stats::log_q(1.0 / eps, q) + delta_outer))
}
