//! Evaluation harness: edge/node holdout splits, exact link-prediction AUC,
//! and post-hoc property prediction (regression R², classification micro-F1)
//! with a random-forest predictor searched over a small fixed grid.

use std::collections::HashSet;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::EmbeddingMatrix;
use crate::forest::{fit_classifier, fit_regressor, ForestConfig, ForestError};
use crate::graph::Graph;
use crate::metrics::PropertyTable;
use crate::rng::{derive_seed, stream_rng};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("graph has {edges} edges; splitting requires at least {min}")]
    GraphTooSmall { edges: usize, min: usize },
    #[error(
        "cannot hold out {wanted} edges without isolating a node; only {found} removable"
    )]
    SplitImpossible { wanted: usize, found: usize },
    #[error("graph has only {available} non-adjacent pairs, {needed} negatives requested")]
    NegativesExhausted { needed: usize, available: usize },
    #[error("invalid split: {0}")]
    BadSplit(String),
    #[error("inputs have mismatched lengths: {a} vs {b}")]
    LengthMismatch { a: usize, b: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("community task skipped: training labels contain a single community")]
    SingleCommunity,
    #[error("{0} is not a property-prediction task")]
    NotAPropertyTask(String),
    #[error("embedding covers {emb} nodes but the property table has {table}")]
    TableMismatch { emb: usize, table: usize },
    #[error(transparent)]
    Forest(#[from] ForestError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitKind {
    Edge,
    Node,
}

/// Holdout specification: which objects are split, the train fraction, and
/// the RNG seed that fixes the draw.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub kind: SplitKind,
    pub train_fraction: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn edge(seed: u64) -> SplitSpec {
        SplitSpec {
            kind: SplitKind::Edge,
            train_fraction: 0.9,
            seed,
        }
    }

    pub fn node(seed: u64) -> SplitSpec {
        SplitSpec {
            kind: SplitKind::Node,
            train_fraction: 0.9,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(EvalError::BadSplit(format!(
                "train_fraction must lie strictly between 0 and 1, got {}",
                self.train_fraction
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    LinkPrediction,
    Degree,
    AvgNeighborDegree,
    Triangles,
    ClusteringCoefficient,
    Closeness,
    Community,
}

impl Task {
    pub const PROPERTY_TASKS: [Task; 6] = [
        Task::Degree,
        Task::AvgNeighborDegree,
        Task::Triangles,
        Task::ClusteringCoefficient,
        Task::Closeness,
        Task::Community,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Task::LinkPrediction => "link_prediction",
            Task::Degree => "degree",
            Task::AvgNeighborDegree => "avg_neighbor_degree",
            Task::Triangles => "triangles",
            Task::ClusteringCoefficient => "clustering_coefficient",
            Task::Closeness => "closeness",
            Task::Community => "community",
        }
    }

    /// Regression targets on heavy-tailed counts are log1p-transformed;
    /// the two [0,1]-bounded properties stay raw.
    pub fn log_transformed(self) -> bool {
        matches!(
            self,
            Task::Degree | Task::AvgNeighborDegree | Task::Triangles
        )
    }
}

impl std::str::FromStr for Task {
    type Err = String;
    fn from_str(s: &str) -> Result<Task, String> {
        match s {
            "link_prediction" => Ok(Task::LinkPrediction),
            "degree" => Ok(Task::Degree),
            "avg_neighbor_degree" => Ok(Task::AvgNeighborDegree),
            "triangles" => Ok(Task::Triangles),
            "clustering_coefficient" => Ok(Task::ClusteringCoefficient),
            "closeness" => Ok(Task::Closeness),
            "community" => Ok(Task::Community),
            other => Err(format!("unknown task '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Auc,
    R2,
    MicroF1,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Auc => "auc",
            Metric::R2 => "r2",
            Metric::MicroF1 => "micro_f1",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskResult {
    pub task: Task,
    pub metric: Metric,
    pub value: f64,
    /// JSON of the winning predictor configuration and target transform.
    pub config_fingerprint: String,
    pub seed: u64,
}

/// Result of an edge holdout: the graph with held-out edges removed, the
/// held-out edges themselves, and an equal number of sampled non-edges.
#[derive(Debug, Clone)]
pub struct EdgeSplit {
    pub train: Graph,
    pub positives: Vec<(u32, u32)>,
    pub negatives: Vec<(u32, u32)>,
}

const MIN_SPLIT_EDGES: usize = 10;

/// Hold out `1 - train_fraction` of the edges (floor), never removing an
/// edge that would drop an endpoint to degree zero, and sample an equal
/// number of uniformly random node pairs that are edges in neither set.
pub fn edge_split(g: &Graph, spec: &SplitSpec) -> Result<EdgeSplit, EvalError> {
    spec.validate()?;
    let m = g.num_edges();
    if m < MIN_SPLIT_EDGES {
        return Err(EvalError::GraphTooSmall {
            edges: m,
            min: MIN_SPLIT_EDGES,
        });
    }
    // the epsilon keeps binary rounding of (1 − fraction) from dragging an
    // exact multiple below its integer (0.1 × 10 is 0.999… in f64)
    let n_held = ((1.0 - spec.train_fraction) * m as f64 + 1e-9).floor() as usize;
    let mut rng = stream_rng(spec.seed, 0);
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(&mut rng);
    // scan a uniformly shuffled edge order, taking an edge only while both
    // endpoints keep positive residual degree. A rejected edge can never
    // become acceptable later (degrees only shrink), so rejection without
    // replacement matches the re-draw rule.
    let edges = g.edges();
    let mut residual = g.degrees();
    let mut held = vec![false; m];
    let mut taken = 0usize;
    for &e in &order {
        if taken == n_held {
            break;
        }
        let (u, v) = edges[e];
        if residual[u as usize] >= 2 && residual[v as usize] >= 2 {
            residual[u as usize] -= 1;
            residual[v as usize] -= 1;
            held[e] = true;
            taken += 1;
        }
    }
    if taken < n_held {
        return Err(EvalError::SplitImpossible {
            wanted: n_held,
            found: taken,
        });
    }
    let positives: Vec<(u32, u32)> = (0..m).filter(|&e| held[e]).map(|e| edges[e]).collect();
    let train_edges: Vec<(u32, u32)> = (0..m).filter(|&e| !held[e]).map(|e| edges[e]).collect();
    let negatives = sample_non_edges(g, n_held, &mut rng)?;
    Ok(EdgeSplit {
        train: Graph::from_edges(g.num_nodes(), &train_edges),
        positives,
        negatives,
    })
}

/// Uniformly sample `count` distinct unordered node pairs that are not
/// edges of `g`. Falls back to full enumeration when non-edges are scarce.
fn sample_non_edges(
    g: &Graph,
    count: usize,
    rng: &mut impl Rng,
) -> Result<Vec<(u32, u32)>, EvalError> {
    let n = g.num_nodes();
    let total_pairs = n * n.saturating_sub(1) / 2;
    let available = total_pairs - g.num_edges();
    if available < count {
        return Err(EvalError::NegativesExhausted {
            needed: count,
            available,
        });
    }
    if count == 0 {
        return Ok(Vec::new());
    }
    if available <= 4 * count {
        // dense graph: enumerate every non-edge and sample without replacement
        let mut pool: Vec<(u32, u32)> = Vec::with_capacity(available);
        for u in 0..n as u32 {
            for v in (u + 1)..n as u32 {
                if !g.has_edge(u, v) {
                    pool.push((u, v));
                }
            }
        }
        let (chosen, _) = pool.partial_shuffle(rng, count);
        let mut chosen = chosen.to_vec();
        chosen.sort_unstable();
        return Ok(chosen);
    }
    let mut seen: HashSet<(u32, u32)> = HashSet::with_capacity(count);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let a = rng.random_range(0..n as u32);
        let b = rng.random_range(0..n as u32);
        if a == b {
            continue;
        }
        let pair = (a.min(b), a.max(b));
        if g.has_edge(pair.0, pair.1) || !seen.insert(pair) {
            continue;
        }
        out.push(pair);
    }
    Ok(out)
}

/// Seeded node holdout: returns (train indices, test indices); the held-out
/// count is floor(n · (1 − train_fraction)).
pub fn node_split(n: usize, spec: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>), EvalError> {
    spec.validate()?;
    if n < 2 {
        return Err(EvalError::EmptyInput);
    }
    let held = ((((1.0 - spec.train_fraction) * n as f64 + 1e-9).floor() as usize).max(1)).min(n - 1);
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = stream_rng(spec.seed, 0);
    order.shuffle(&mut rng);
    let test = order[..held].to_vec();
    let train = order[held..].to_vec();
    Ok((train, test))
}

/// Exact AUC with ties counted one half, via midrank statistics:
/// AUC = (R⁺ − P(P+1)/2) / (P·N) where R⁺ is the summed midranks of the
/// positive scores in the pooled ordering.
pub fn auc_from_scores(pos: &[f64], neg: &[f64]) -> Result<f64, EvalError> {
    if pos.is_empty() || neg.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let mut pooled: Vec<(f64, bool)> = pos
        .iter()
        .map(|&s| (s, true))
        .chain(neg.iter().map(|&s| (s, false)))
        .collect();
    pooled.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
    let mut rank_sum_pos = 0.0;
    let mut i = 0usize;
    while i < pooled.len() {
        let mut j = i;
        while j < pooled.len() && pooled[j].0 == pooled[i].0 {
            j += 1;
        }
        // ranks are 1-based; every member of a tie block gets the midrank
        let midrank = (i + 1 + j) as f64 / 2.0;
        let pos_in_block = pooled[i..j].iter().filter(|p| p.1).count();
        rank_sum_pos += midrank * pos_in_block as f64;
        i = j;
    }
    let p = pos.len() as f64;
    let n = neg.len() as f64;
    Ok((rank_sum_pos - p * (p + 1.0) / 2.0) / (p * n))
}

/// Score held-out pairs by embedding dot products and return the exact AUC.
pub fn link_prediction_auc(
    emb: &EmbeddingMatrix,
    positives: &[(u32, u32)],
    negatives: &[(u32, u32)],
) -> Result<f64, EvalError> {
    let score = |pairs: &[(u32, u32)]| -> Vec<f64> {
        pairs
            .iter()
            .map(|&(u, v)| emb.dot(u as usize, v as usize))
            .collect()
    };
    auc_from_scores(&score(positives), &score(negatives))
}

/// Globally pooled micro-averaged F1: TP / (TP + ½(FP + FN)) summed over
/// classes. For single-label problems this equals accuracy.
pub fn micro_f1(truth: &[u32], pred: &[u32]) -> Result<f64, EvalError> {
    if truth.len() != pred.len() {
        return Err(EvalError::LengthMismatch {
            a: truth.len(),
            b: pred.len(),
        });
    }
    if truth.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fne = 0usize;
    for (&t, &p) in truth.iter().zip(pred) {
        if t == p {
            tp += 1;
        } else {
            // the wrong predicted class gains a false positive and the true
            // class a false negative
            fp += 1;
            fne += 1;
        }
    }
    Ok(tp as f64 / (tp as f64 + 0.5 * (fp + fne) as f64))
}

/// Coefficient of determination, 1 − SS_res/SS_tot; defined as 0 when the
/// truth has zero variance (recorded design choice: avoids 0/0).
pub fn r2(truth: &[f64], pred: &[f64]) -> Result<f64, EvalError> {
    if truth.len() != pred.len() {
        return Err(EvalError::LengthMismatch {
            a: truth.len(),
            b: pred.len(),
        });
    }
    if truth.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let mean = truth.iter().sum::<f64>() / truth.len() as f64;
    let ss_tot: f64 = truth.iter().map(|t| (t - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Ok(0.0);
    }
    let ss_res: f64 = truth
        .iter()
        .zip(pred)
        .map(|(t, p)| (t - p).powi(2))
        .sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// Fixed predictor search grid, held constant per dataset so that method
/// comparisons see the same predictor capacity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestGrid {
    pub n_trees: Vec<usize>,
    pub max_depths: Vec<usize>,
}

impl Default for ForestGrid {
    fn default() -> Self {
        ForestGrid {
            n_trees: vec![100, 300, 500],
            max_depths: vec![8, 10, 12],
        }
    }
}

impl ForestGrid {
    /// A single small cell, for quick evaluations and tests.
    pub fn small() -> Self {
        ForestGrid {
            n_trees: vec![100],
            max_depths: vec![10],
        }
    }
}

/// Explicit node holdout, for callers that need to control membership
/// (e.g. permutation-invariance checks). `train`/`test` are node ids.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSplit {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

fn gather_features(emb: &EmbeddingMatrix, nodes: &[usize]) -> Array2<f64> {
    Array2::from_shape_fn((nodes.len(), emb.dim()), |(i, j)| emb.row(nodes[i])[j])
}

/// Order rows canonically by (feature vector, target) so downstream fits
/// are independent of incoming node order; ties are identical rows, for
/// which order cannot matter.
fn canonical_order(x: &Array2<f64>, key: impl Fn(usize) -> f64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..x.nrows()).collect();
    idx.sort_by(|&a, &b| {
        let ra = x.row(a);
        let rb = x.row(b);
        for (va, vb) in ra.iter().zip(rb.iter()) {
            match va.total_cmp(vb) {
                std::cmp::Ordering::Equal => continue,
                other => return other,
            }
        }
        key(a).total_cmp(&key(b))
    });
    idx
}

fn regression_target(table: &PropertyTable, task: Task) -> Result<Vec<f64>, EvalError> {
    let raw: Vec<f64> = match task {
        Task::Degree => table.degree.iter().map(|&d| d as f64).collect(),
        Task::AvgNeighborDegree => table.avg_neighbor_degree.clone(),
        Task::Triangles => table.triangles.iter().map(|&t| t as f64).collect(),
        Task::ClusteringCoefficient => table.clustering.clone(),
        Task::Closeness => table.closeness.clone(),
        _ => return Err(EvalError::NotAPropertyTask(task.name().to_string())),
    };
    Ok(if task.log_transformed() {
        raw.iter().map(|v| v.ln_1p()).collect()
    } else {
        raw
    })
}

/// Property prediction with an explicit node split: fits the forest grid on
/// the training nodes and reports the best held-out score. Community labels
/// are classified (micro-F1); everything else is regressed (R²).
pub fn property_task_with_split(
    emb: &EmbeddingMatrix,
    table: &PropertyTable,
    task: Task,
    grid: &ForestGrid,
    split: &NodeSplit,
    seed: u64,
) -> Result<TaskResult, EvalError> {
    let n = emb.num_nodes();
    if table.num_nodes() != n {
        return Err(EvalError::TableMismatch {
            emb: n,
            table: table.num_nodes(),
        });
    }
    if split.train.len() < 2 || split.test.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let forest_seed = derive_seed(seed, 101);
    let xtr_raw = gather_features(emb, &split.train);
    let xte_raw = gather_features(emb, &split.test);
    let mut best: Option<(f64, String)> = None;
    let mut consider = |value: f64, cfg: &ForestConfig, transform: &str| {
        let fingerprint = format!(
            "{{\"n_trees\":{},\"max_depth\":{},\"feature_subset\":\"{:?}\",\"target_transform\":\"{}\"}}",
            cfg.n_trees,
            cfg.max_depth,
            cfg.feature_subset,
            transform
        )
        .to_lowercase();
        if best.as_ref().is_none_or(|(b, _)| value > *b) {
            best = Some((value, fingerprint));
        }
    };
    if task == Task::Community {
        let labels = &table.community;
        let ytr: Vec<u32> = split.train.iter().map(|&i| labels[i]).collect();
        let yte: Vec<u32> = split.test.iter().map(|&i| labels[i]).collect();
        let distinct: HashSet<u32> = ytr.iter().copied().collect();
        if distinct.len() < 2 {
            return Err(EvalError::SingleCommunity);
        }
        let order = canonical_order(&xtr_raw, |i| f64::from(ytr[i]));
        let xtr = Array2::from_shape_fn((order.len(), emb.dim()), |(i, j)| {
            xtr_raw[[order[i], j]]
        });
        let ytr_sorted: Vec<u32> = order.iter().map(|&i| ytr[i]).collect();
        for &n_trees in &grid.n_trees {
            for &max_depth in &grid.max_depths {
                let cfg = ForestConfig {
                    n_trees,
                    max_depth,
                    seed: forest_seed,
                    ..ForestConfig::classification()
                };
                let model = fit_classifier(xtr.view(), &ytr_sorted, &cfg)?;
                let pred = model.predict(xte_raw.view())?;
                consider(micro_f1(&yte, &pred)?, &cfg, "none");
            }
        }
        let (value, config_fingerprint) = best.expect("grid is nonempty");
        return Ok(TaskResult {
            task,
            metric: Metric::MicroF1,
            value,
            config_fingerprint,
            seed,
        });
    }
    let y = regression_target(table, task)?;
    let transform = if task.log_transformed() { "log1p" } else { "none" };
    let ytr: Vec<f64> = split.train.iter().map(|&i| y[i]).collect();
    let yte: Vec<f64> = split.test.iter().map(|&i| y[i]).collect();
    let order = canonical_order(&xtr_raw, |i| ytr[i]);
    let xtr = Array2::from_shape_fn((order.len(), emb.dim()), |(i, j)| xtr_raw[[order[i], j]]);
    let ytr_sorted: Vec<f64> = order.iter().map(|&i| ytr[i]).collect();
    for &n_trees in &grid.n_trees {
        for &max_depth in &grid.max_depths {
            let cfg = ForestConfig {
                n_trees,
                max_depth,
                seed: forest_seed,
                ..ForestConfig::regression()
            };
            let model = fit_regressor(xtr.view(), &ytr_sorted, &cfg)?;
            let pred = model.predict(xte_raw.view())?;
            consider(r2(&yte, &pred)?, &cfg, transform);
        }
    }
    let (value, config_fingerprint) = best.expect("grid is nonempty");
    Ok(TaskResult {
        task,
        metric: Metric::R2,
        value,
        config_fingerprint,
        seed,
    })
}

/// Property prediction with a seeded 90/10 node holdout.
pub fn property_task(
    emb: &EmbeddingMatrix,
    table: &PropertyTable,
    task: Task,
    grid: &ForestGrid,
    spec: &SplitSpec,
) -> Result<TaskResult, EvalError> {
    let (train, test) = node_split(emb.num_nodes(), spec)?;
    property_task_with_split(emb, table, task, grid, &NodeSplit { train, test }, spec.seed)
}
