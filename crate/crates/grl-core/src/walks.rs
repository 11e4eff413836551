//! Random walks and exact transition-matrix analysis.
//!
//! Two layers live here. The sampling layer produces walk corpora for the
//! skip-gram trainers: `uniform_walks` draws first-order walks, `biased_walks`
//! draws second-order walks where the unnormalized weight of moving from the
//! current node to neighbor j given previous node k is 1/p if j = k, 1 if j is
//! adjacent to k, and 1/q otherwise. The exact layer builds the dense row
//!-stochastic matrix P = D^{-1}A and certifies three facts about it
//! numerically: D_ii P^t_ij = D_jj P^t_ji for all t, P^t rows converge to the
//! degree-proportional stationary vector on connected non-bipartite graphs,
//! and the degree-symmetrized matrix S = D^{1/2} P D^{-1/2} has real spectrum
//! in [-1, 1] with top eigenvalue exactly 1.

use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::fs;
use std::io::Write as _;
use std::path::Path;
use thiserror::Error;

use crate::graph::{is_bipartite, is_connected, Graph};
use crate::linalg::symmetric_eigenvalues;
use crate::rng::stream_rng;

/// Graphs above this size are refused by the dense-matrix operations.
/// The facts those operations certify do not depend on graph size.
pub const DENSE_CAP: usize = 2000;

#[derive(Debug, Error)]
pub enum WalkError {
    #[error("graph with {0} nodes exceeds the dense-matrix cap of {1}")]
    GraphTooLarge(usize, usize),
    #[error("graph has no edges")]
    EdgelessGraph,
    #[error("graph is not connected: transition powers do not mix across components")]
    NotConnected,
    #[error("graph is bipartite: walk distribution oscillates and has no limit")]
    Bipartite,
    #[error("bias parameters must be positive, got p={p} q={q}")]
    NonpositiveBias { p: f64, q: f64 },
}

/// Dense row-stochastic walk matrix, P[i][j] = A[i][j] / degree(i).
#[derive(Debug, Clone)]
pub struct TransitionMatrix {
    p: Array2<f64>,
}

impl TransitionMatrix {
    pub fn matrix(&self) -> &Array2<f64> {
        &self.p
    }

    pub fn num_nodes(&self) -> usize {
        self.p.nrows()
    }
}

/// Sampling parameters for one corpus.
///
/// `walk_length` counts steps, so a finished walk holds `walk_length + 1`
/// nodes. `p_return = q_inout = 1` makes the biased sampler coincide with the
/// uniform one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WalkParams {
    pub num_walks: usize,
    pub walk_length: usize,
    pub p_return: f64,
    pub q_inout: f64,
    pub seed: u64,
}

impl WalkParams {
    pub fn uniform(num_walks: usize, walk_length: usize, seed: u64) -> WalkParams {
        WalkParams {
            num_walks,
            walk_length,
            p_return: 1.0,
            q_inout: 1.0,
            seed,
        }
    }
}

/// A bag of walks plus enough metadata to tie it back to its origin.
#[derive(Debug, Clone)]
pub struct WalkCorpus {
    pub walks: Vec<Vec<u32>>,
    pub num_nodes: usize,
    pub graph_fingerprint: u64,
    pub params: WalkParams,
}

impl WalkCorpus {
    /// One walk per line, space-separated node ids.
    pub fn write_to(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        let mut f = std::io::BufWriter::new(fs::File::create(path)?);
        for walk in &self.walks {
            let mut first = true;
            for &node in walk {
                if first {
                    write!(f, "{node}")?;
                    first = false;
                } else {
                    write!(f, " {node}")?;
                }
            }
            writeln!(f)?;
        }
        f.flush()
    }

    pub fn total_tokens(&self) -> usize {
        self.walks.iter().map(Vec::len).sum()
    }
}

/// P = D^{-1} A as a dense matrix; rows of isolated nodes are all zero.
pub fn transition_matrix(g: &Graph) -> Result<TransitionMatrix, WalkError> {
    let n = g.num_nodes();
    if n > DENSE_CAP {
        return Err(WalkError::GraphTooLarge(n, DENSE_CAP));
    }
    let mut p = Array2::zeros((n, n));
    for u in 0..n as u32 {
        let d = g.degree(u);
        if d == 0 {
            continue;
        }
        let w = 1.0 / d as f64;
        for &v in g.neighbors(u) {
            p[(u as usize, v as usize)] = w;
        }
    }
    Ok(TransitionMatrix { p })
}

/// P^t by sequential multiplication, t >= 1.
pub fn matrix_power_transition(p: &TransitionMatrix, t: usize) -> Array2<f64> {
    assert!(t >= 1, "power must be at least 1");
    let mut acc = p.p.clone();
    for _ in 1..t {
        acc = acc.dot(&p.p);
    }
    acc
}

/// Max over t <= t_max and all pairs of |D_ii P^t_ij - D_jj P^t_ji|.
///
/// Zero in exact arithmetic for every undirected graph; what comes back is the
/// floating-point residue of that identity.
pub fn verify_degree_balance(g: &Graph, t_max: usize) -> Result<f64, WalkError> {
    let pm = transition_matrix(g)?;
    let n = g.num_nodes();
    let deg: Vec<f64> = (0..n).map(|u| g.degree(u as u32) as f64).collect();
    let mut acc = pm.p.clone();
    let mut worst = 0.0f64;
    for t in 1..=t_max {
        for i in 0..n {
            for j in 0..n {
                let dev = (deg[i] * acc[(i, j)] - deg[j] * acc[(j, i)]).abs();
                if dev > worst {
                    worst = dev;
                }
            }
        }
        if t < t_max {
            acc = acc.dot(&pm.p);
        }
    }
    Ok(worst)
}

/// Degree-proportional limit distribution, pi_j = D_jj / sum_k D_kk.
pub fn stationary_distribution(g: &Graph) -> Result<Vec<f64>, WalkError> {
    if g.num_edges() == 0 {
        return Err(WalkError::EdgelessGraph);
    }
    let total = 2.0 * g.num_edges() as f64;
    Ok((0..g.num_nodes())
        .map(|u| g.degree(u as u32) as f64 / total)
        .collect())
}

/// Max over start nodes of the L1 gap between the t-step row and pi.
///
/// Requires a connected non-bipartite graph; on anything else the rows do not
/// converge and the call refuses rather than reporting a meaningless gap.
pub fn verify_convergence(g: &Graph, t: usize) -> Result<f64, WalkError> {
    if !is_connected(g) {
        return Err(WalkError::NotConnected);
    }
    if is_bipartite(g) {
        return Err(WalkError::Bipartite);
    }
    let pi = stationary_distribution(g)?;
    let pm = transition_matrix(g)?;
    let pt = matrix_power_transition(&pm, t);
    let n = g.num_nodes();
    let mut worst = 0.0f64;
    for i in 0..n {
        let gap: f64 = (0..n).map(|j| (pt[(i, j)] - pi[j]).abs()).sum();
        if gap > worst {
            worst = gap;
        }
    }
    Ok(worst)
}

/// Eigenvalues of S = D^{1/2} P D^{-1/2} plus the stationary vector.
#[derive(Debug, Clone)]
pub struct SpectralSummary {
    /// Sorted descending; equals the spectrum of P itself since S and P are similar.
    pub eigenvalues: Vec<f64>,
    pub stationary: Vec<f64>,
}

impl SpectralSummary {
    /// 1 - lambda_2, the quantity controlling how fast walk rows mix.
    pub fn spectral_gap(&self) -> f64 {
        if self.eigenvalues.len() < 2 {
            return 0.0;
        }
        1.0 - self.eigenvalues[1]
    }
}

/// Spectrum of the symmetrized walk matrix on a connected graph.
pub fn spectral_summary(g: &Graph) -> Result<SpectralSummary, WalkError> {
    let n = g.num_nodes();
    if n > DENSE_CAP {
        return Err(WalkError::GraphTooLarge(n, DENSE_CAP));
    }
    if g.num_edges() == 0 {
        return Err(WalkError::EdgelessGraph);
    }
    if !is_connected(g) {
        return Err(WalkError::NotConnected);
    }
    // S_ij = A_ij / sqrt(d_i d_j); connectivity implies every degree >= 1
    let inv_sqrt: Vec<f64> = (0..n)
        .map(|u| 1.0 / (g.degree(u as u32) as f64).sqrt())
        .collect();
    let mut s = Array2::zeros((n, n));
    for &(u, v) in g.edges() {
        let w = inv_sqrt[u as usize] * inv_sqrt[v as usize];
        s[(u as usize, v as usize)] = w;
        s[(v as usize, u as usize)] = w;
    }
    let eigenvalues = symmetric_eigenvalues(s, 1e-13);
    let stationary = stationary_distribution(g)?;
    Ok(SpectralSummary {
        eigenvalues,
        stationary,
    })
}

fn uniform_step(rng: &mut ChaCha8Rng, neighbors: &[u32]) -> u32 {
    let r: f64 = rng.random();
    let idx = ((r * neighbors.len() as f64) as usize).min(neighbors.len() - 1);
    neighbors[idx]
}

fn biased_step(
    rng: &mut ChaCha8Rng,
    g: &Graph,
    prev: u32,
    cur: u32,
    inv_p: f64,
    inv_q: f64,
    cumulative: &mut Vec<f64>,
) -> u32 {
    let ns = g.neighbors(cur);
    cumulative.clear();
    let mut total = 0.0;
    for &j in ns {
        let w = if j == prev {
            inv_p
        } else if g.has_edge(prev, j) {
            1.0
        } else {
            inv_q
        };
        total += w;
        cumulative.push(total);
    }
    let target = rng.random::<f64>() * total;
    let idx = cumulative
        .iter()
        .position(|&c| c > target)
        .unwrap_or(ns.len() - 1);
    ns[idx]
}

/// Exact next-step distribution of the biased walk at (prev, cur).
///
/// Returned as (neighbor, probability) pairs in neighbor order; used by the
/// lemma certifier to compare empirical second-order frequencies against.
pub fn biased_step_distribution(
    g: &Graph,
    prev: u32,
    cur: u32,
    p_return: f64,
    q_inout: f64,
) -> Vec<(u32, f64)> {
    let ns = g.neighbors(cur);
    let weights: Vec<f64> = ns
        .iter()
        .map(|&j| {
            if j == prev {
                1.0 / p_return
            } else if g.has_edge(prev, j) {
                1.0
            } else {
                1.0 / q_inout
            }
        })
        .collect();
    let total: f64 = weights.iter().sum();
    ns.iter()
        .zip(weights)
        .map(|(&j, w)| (j, w / total))
        .collect()
}

fn walks_from_source(
    g: &Graph,
    source: u32,
    params: &WalkParams,
    biased: bool,
) -> Vec<Vec<u32>> {
    let mut rng = stream_rng(params.seed, source as u64);
    let inv_p = 1.0 / params.p_return;
    let inv_q = 1.0 / params.q_inout;
    let mut cumulative = Vec::new();
    (0..params.num_walks)
        .map(|_| {
            let mut walk = Vec::with_capacity(params.walk_length + 1);
            walk.push(source);
            let mut cur = source;
            let mut prev: Option<u32> = None;
            for _ in 0..params.walk_length {
                let ns = g.neighbors(cur);
                if ns.is_empty() {
                    break;
                }
                let next = match prev {
                    Some(k) if biased => {
                        biased_step(&mut rng, g, k, cur, inv_p, inv_q, &mut cumulative)
                    }
                    _ => uniform_step(&mut rng, ns),
                };
                walk.push(next);
                prev = Some(cur);
                cur = next;
            }
            walk
        })
        .collect()
}

fn generate_walks(g: &Graph, params: &WalkParams, biased: bool) -> WalkCorpus {
    let n = g.num_nodes();
    // per-source RNG streams keep the corpus independent of worker scheduling
    let per_source: Vec<Vec<Vec<u32>>> = (0..n as u32)
        .into_par_iter()
        .map(|source| walks_from_source(g, source, params, biased))
        .collect();
    // interleave into passes so consumers see every source once per pass
    let mut walks = Vec::with_capacity(n * params.num_walks);
    for w in 0..params.num_walks {
        for blocks in &per_source {
            walks.push(blocks[w].clone());
        }
    }
    WalkCorpus {
        walks,
        num_nodes: n,
        graph_fingerprint: g.fingerprint(),
        params: *params,
    }
}

/// First-order walks: next node uniform over the current node's neighbors.
pub fn uniform_walks(g: &Graph, params: &WalkParams) -> WalkCorpus {
    generate_walks(g, params, false)
}

/// Second-order walks biased by the return and in-out parameters.
///
/// The first step from each source is uniform; later steps weight each
/// candidate by its relation to the previous node. With p = q = 1 the corpus
/// is identical to `uniform_walks` under the same seed.
pub fn biased_walks(g: &Graph, params: &WalkParams) -> Result<WalkCorpus, WalkError> {
    if params.p_return <= 0.0 || params.q_inout <= 0.0 {
        return Err(WalkError::NonpositiveBias {
            p: params.p_return,
            q: params.q_inout,
        });
    }
    Ok(generate_walks(g, params, true))
}
