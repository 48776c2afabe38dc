//! Oblivious network models: per-round active edge sets that depend only on
//! the round index, earlier edge sets and fresh randomness, never on what the
//! nodes hold.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use thiserror::Error;

use crate::rng::{self, Domain};

/// A directed edge `(sender, receiver)`.
pub type Edge = (u32, u32);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("edge ({0}, {1}) is a self-loop")]
    SelfLoop(u32, u32),
    #[error("edge ({u}, {v}) references a node outside 0..{n}")]
    NodeOutOfRange { u: u32, v: u32, n: usize },
    #[error("probability {0} is outside [0, 1]")]
    BadProbability(f64),
    #[error("graph has {graph} nodes but the model has {n}")]
    GraphSize { graph: usize, n: usize },
    #[error("model needs at least one node")]
    Empty,
}

/// The directed edges over which packets are delivered in round `t`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActiveEdgeSet {
    pub t: u32,
    /// Sorted, without duplicates.
    pub edges: Vec<Edge>,
}

impl ActiveEdgeSet {
    pub fn new(t: u32, mut edges: Vec<Edge>) -> Self {
        edges.sort_unstable();
        edges.dedup();
        ActiveEdgeSet { t, edges }
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn contains(&self, e: Edge) -> bool {
        self.edges.binary_search(&e).is_ok()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GossipMode {
    Push,
    Pull,
    Exchange,
}

/// Out-neighbour lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    neighbors: Vec<Vec<u32>>,
}

impl Graph {
    /// Builds a simple graph. Undirected input contributes both arcs.
    pub fn from_edges(n: usize, edges: &[Edge], directed: bool) -> Result<Self, ModelError> {
        validate_edges(n, edges)?;
        let mut neighbors = vec![Vec::new(); n];
        for &(u, v) in edges {
            neighbors[u as usize].push(v);
            if !directed {
                neighbors[v as usize].push(u);
            }
        }
        for list in &mut neighbors {
            list.sort_unstable();
            list.dedup();
        }
        Ok(Graph { neighbors })
    }

    pub fn complete(n: usize) -> Self {
        let neighbors = (0..n as u32)
            .map(|u| (0..n as u32).filter(|&v| v != u).collect())
            .collect();
        Graph { neighbors }
    }

    pub fn node_count(&self) -> usize {
        self.neighbors.len()
    }

    pub fn neighbors(&self, u: usize) -> &[u32] {
        &self.neighbors[u]
    }

    pub fn edges(&self) -> Vec<Edge> {
        self.neighbors
            .iter()
            .enumerate()
            .flat_map(|(u, list)| list.iter().map(move |&v| (u as u32, v)))
            .collect()
    }
}

/// All n(n-1) ordered pairs.
pub fn complete_edges(n: usize) -> Vec<Edge> {
    Graph::complete(n).edges()
}

/// Directed path 0 → 1 → … → n-1.
pub fn path_edges(n: usize) -> Vec<Edge> {
    (1..n as u32).map(|v| (v - 1, v)).collect()
}

fn validate_edges(n: usize, edges: &[Edge]) -> Result<(), ModelError> {
    for &(u, v) in edges {
        if u == v {
            return Err(ModelError::SelfLoop(u, v));
        }
        if u as usize >= n || v as usize >= n {
            return Err(ModelError::NodeOutOfRange { u, v, n });
        }
    }
    Ok(())
}

fn validate_probability(p: f64) -> Result<(), ModelError> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(ModelError::BadProbability(p))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelVariant {
    /// Every node picks a uniformly random out-neighbour of `graph`.
    UniformGossip { graph: Graph, mode: GossipMode },
    /// Uniform gossip on the complete graph.
    RandomPhoneCall { mode: GossipMode },
    /// The same edge set every round.
    StaticGraph { edges: Vec<Edge> },
    /// Each absent ordered pair appears with `p_birth`, each present one
    /// disappears with `p_death`; round 1 is `initial`.
    EdgeMarkovian {
        p_birth: f64,
        p_death: f64,
        initial: Vec<Edge>,
    },
    /// Drops each edge of `inner` independently with probability `loss`.
    Lossy { inner: Box<ModelVariant>, loss: f64 },
}

impl ModelVariant {
    fn validate(&self, n: usize) -> Result<(), ModelError> {
        match self {
            ModelVariant::UniformGossip { graph, .. } => {
                if graph.node_count() != n {
                    return Err(ModelError::GraphSize {
                        graph: graph.node_count(),
                        n,
                    });
                }
                Ok(())
            }
            ModelVariant::RandomPhoneCall { .. } => Ok(()),
            ModelVariant::StaticGraph { edges } => validate_edges(n, edges),
            ModelVariant::EdgeMarkovian {
                p_birth,
                p_death,
                initial,
            } => {
                validate_probability(*p_birth)?;
                validate_probability(*p_death)?;
                validate_edges(n, initial)
            }
            ModelVariant::Lossy { inner, loss } => {
                validate_probability(*loss)?;
                inner.validate(n)
            }
        }
    }

    fn is_iid(&self) -> bool {
        match self {
            ModelVariant::EdgeMarkovian { .. } => false,
            ModelVariant::Lossy { inner, .. } => inner.is_iid(),
            _ => true,
        }
    }

    fn initial_state(&self, n: usize) -> ModelState {
        match self {
            ModelVariant::EdgeMarkovian { .. } => ModelState {
                latent: Some(vec![false; n * n]),
            },
            ModelVariant::Lossy { inner, .. } => inner.initial_state(n),
            _ => ModelState { latent: None },
        }
    }
}

/// A validated oblivious network model on `n` nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    n: usize,
    variant: ModelVariant,
    seed: u64,
}

/// Whatever a model remembers between rounds: for edge-Markovian graphs the
/// latent edge set, otherwise nothing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelState {
    latent: Option<Vec<bool>>,
}

impl ModelSpec {
    pub fn new(n: usize, variant: ModelVariant, seed: u64) -> Result<Self, ModelError> {
        if n == 0 {
            return Err(ModelError::Empty);
        }
        variant.validate(n)?;
        Ok(ModelSpec { n, variant, seed })
    }

    pub fn random_phone_call(n: usize, mode: GossipMode, seed: u64) -> Self {
        Self::new(n, ModelVariant::RandomPhoneCall { mode }, seed)
            .expect("phone call model is always valid")
    }

    pub fn static_graph(n: usize, edges: Vec<Edge>, seed: u64) -> Result<Self, ModelError> {
        Self::new(n, ModelVariant::StaticGraph { edges }, seed)
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn variant(&self) -> &ModelVariant {
        &self.variant
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        ModelSpec {
            seed,
            ..self.clone()
        }
    }

    /// Whether E_t is drawn independently every round.
    pub fn is_iid(&self) -> bool {
        self.variant.is_iid()
    }

    pub fn initial_state(&self) -> ModelState {
        self.variant.initial_state(self.n)
    }

    /// Draws E_t for round `t ≥ 1`, advancing `state`.
    pub fn sample_round<R: Rng + ?Sized>(
        &self,
        t: u32,
        state: &mut ModelState,
        rng: &mut R,
    ) -> ActiveEdgeSet {
        debug_assert!(t >= 1);
        let mut edges = Vec::new();
        sample_variant(&self.variant, self.n, t, state, rng, &mut edges);
        ActiveEdgeSet::new(t, edges)
    }

    /// Rounds 1, 2, … with per-round generators derived from `seed`, so the
    /// edge sequence is a pure function of `(seed, t)`.
    pub fn rounds(&self, seed: u64) -> RoundSampler<'_> {
        RoundSampler {
            model: self,
            seed,
            t: 0,
            state: self.initial_state(),
        }
    }
}

fn pick_partner<R: Rng + ?Sized>(n: usize, u: usize, rng: &mut R) -> Option<u32> {
    if n < 2 {
        return None;
    }
    let w = rng.gen_range(0..n - 1);
    Some(if w >= u { w + 1 } else { w } as u32)
}

fn emit(mode: GossipMode, u: u32, w: u32, out: &mut Vec<Edge>) {
    match mode {
        GossipMode::Push => out.push((u, w)),
        GossipMode::Pull => out.push((w, u)),
        GossipMode::Exchange => {
            out.push((u, w));
            out.push((w, u));
        }
    }
}

fn sample_variant<R: Rng + ?Sized>(
    variant: &ModelVariant,
    n: usize,
    t: u32,
    state: &mut ModelState,
    rng: &mut R,
    out: &mut Vec<Edge>,
) {
    match variant {
        ModelVariant::UniformGossip { graph, mode } => {
            for u in 0..n {
                let nb = graph.neighbors(u);
                // isolated nodes stay silent
                if nb.is_empty() {
                    continue;
                }
                let w = nb[rng.gen_range(0..nb.len())];
                emit(*mode, u as u32, w, out);
            }
        }
        ModelVariant::RandomPhoneCall { mode } => {
            for u in 0..n {
                if let Some(w) = pick_partner(n, u, rng) {
                    emit(*mode, u as u32, w, out);
                }
            }
        }
        ModelVariant::StaticGraph { edges } => out.extend_from_slice(edges),
        ModelVariant::EdgeMarkovian {
            p_birth,
            p_death,
            initial,
        } => {
            let latent = state.latent.as_mut().expect("markovian state");
            if t == 1 {
                latent.iter_mut().for_each(|x| *x = false);
                for &(u, v) in initial {
                    latent[u as usize * n + v as usize] = true;
                }
            } else {
                for u in 0..n {
                    for v in 0..n {
                        if u == v {
                            continue;
                        }
                        let cell = &mut latent[u * n + v];
                        *cell = if *cell {
                            !rng.gen_bool(*p_death)
                        } else {
                            rng.gen_bool(*p_birth)
                        };
                    }
                }
            }
            for u in 0..n {
                for v in 0..n {
                    if latent[u * n + v] {
                        out.push((u as u32, v as u32));
                    }
                }
            }
        }
        ModelVariant::Lossy { inner, loss } => {
            let mut raw = Vec::new();
            sample_variant(inner, n, t, state, rng, &mut raw);
            raw.sort_unstable();
            raw.dedup();
            out.extend(raw.into_iter().filter(|_| !rng.gen_bool(*loss)));
        }
    }
}

/// Iterator over E_1, E_2, … for one seed.
#[derive(Debug, Clone)]
pub struct RoundSampler<'a> {
    model: &'a ModelSpec,
    seed: u64,
    t: u32,
    state: ModelState,
}

impl RoundSampler<'_> {
    /// Index of the most recently produced round (0 before the first).
    pub fn round(&self) -> u32 {
        self.t
    }

    pub fn next_round(&mut self) -> ActiveEdgeSet {
        self.t += 1;
        let mut rng = rng::stream(self.seed, Domain::Round, self.t as u64);
        self.model.sample_round(self.t, &mut self.state, &mut rng)
    }
}

impl Iterator for RoundSampler<'_> {
    type Item = ActiveEdgeSet;

    fn next(&mut self) -> Option<ActiveEdgeSet> {
        Some(self.next_round())
    }
}
