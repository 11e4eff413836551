//! Shared fixtures for the benchmark suite. The crate exists to host
//! `benches/`; this library only builds the inputs they measure.

use grl_core::generate::{generate_ba, generate_er};
use grl_core::graph::Graph;

/// Scale-free benchmark graph: 1000 nodes, 5 edges per arrival.
pub fn ba_graph() -> Graph {
    generate_ba(1000, 5, 42).expect("valid generator arguments")
}

/// Dense-enough uniform graph for triangle and community workloads.
pub fn er_graph() -> Graph {
    generate_er(500, 0.03, 42).expect("valid generator arguments")
}
