//! Simulation and verification toolkit for network-coded gossip with
//! correlated data.
//!
//! The crate is `no_std` (it needs `alloc`): everything here is pure
//! computation over explicit seeds. File formats, threading and the command
//! line live in the companion `ncgossip-cli` crate.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod capacity;
pub mod coding;
pub mod engine;
pub mod field;
pub mod flooding;
pub mod linalg;
pub mod netmodel;
pub mod nodeset;
pub mod rng;
pub mod sources;
pub mod stats;

pub use capacity::{CapacityDemand, CapacityError, Rate, TimeExpandedGraph, WeightedPath};
pub use coding::{BinningCode, CodingError, NodeState, Packet};
pub use engine::{EngineError, Experiment, ExperimentSpec, MessageSetup, StopRule, TrialResult};
pub use field::{FieldElement, FieldError, FieldSpec};
pub use flooding::{EstimateConfig, FloodError, FloodParams};
pub use linalg::{FVector, LinalgError, RowSpace};
pub use netmodel::{ActiveEdgeSet, Edge, GossipMode, Graph, ModelSpec, ModelVariant};
pub use nodeset::NodeSet;
pub use sources::{CapacityVector, JointSource, SideInfo, SourceError};
