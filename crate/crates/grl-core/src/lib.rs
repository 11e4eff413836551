//! Core library for probing what graph embeddings preserve.
//!
//! The pipeline: generate or load a graph, compute per-node topological
//! properties, train an embedding (random-walk skip-gram or a graph neural
//! encoder), then test how much of each property survives into the latent
//! space via link prediction, community classification and property
//! regression. Separate modules certify the random-walk and multiset
//! aggregator facts the whole approach leans on.

pub mod embedding;
pub mod eval;
pub mod forest;
pub mod generate;
pub mod gnn;
pub mod graph;
pub mod linalg;
pub mod metrics;
pub mod multiset;
pub mod report;
pub mod rng;
pub mod skipgram;
pub mod sweep;
pub mod walks;

pub use graph::{Graph, GraphError};
