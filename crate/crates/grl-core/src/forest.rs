//! Random-forest regression and classification, built from first principles.
//!
//! Trees are grown greedily (CART style): at each node a random subset of
//! features is scanned, candidate thresholds are midpoints between sorted
//! distinct values, and the split minimizing the summed child impurity is
//! taken (variance for regression, Gini for classification). Leaves predict
//! the sample mean or the majority class; the forest averages tree outputs
//! or takes a plurality vote with ties broken toward the smallest class id.
//!
//! Determinism: each tree draws its bootstrap sample and feature subsets
//! from an RNG derived from `(seed, tree_index)`, so a fixed seed yields an
//! identical forest regardless of how many threads do the growing.

use ndarray::ArrayView2;
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::stream_rng;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ForestError {
    #[error("invalid forest configuration: {0}")]
    BadConfig(String),
    #[error("empty training set")]
    EmptyData,
    #[error("feature matrix has {rows} rows but the target has {targets} entries")]
    ShapeMismatch { rows: usize, targets: usize },
    #[error("training requires at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("non-finite value in training data")]
    NonFinite,
    #[error("model was trained on {expected} features, prediction input has {got}")]
    FeatureMismatch { expected: usize, got: usize },
}

/// How many candidate features each node considers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureSubset {
    /// max(1, floor(sqrt(d))) — the usual classification default.
    Sqrt,
    /// max(1, floor(d/3)) — the usual regression default.
    Third,
    /// Every feature at every node.
    All,
}

impl FeatureSubset {
    fn count(self, d: usize) -> usize {
        match self {
            FeatureSubset::Sqrt => ((d as f64).sqrt().floor() as usize).max(1),
            FeatureSubset::Third => (d / 3).max(1),
            FeatureSubset::All => d,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub feature_subset: FeatureSubset,
    pub bootstrap: bool,
    pub seed: u64,
}

impl ForestConfig {
    /// Defaults for regression: d/3 feature subsets.
    pub fn regression() -> Self {
        ForestConfig {
            n_trees: 100,
            max_depth: 10,
            min_samples_split: 2,
            feature_subset: FeatureSubset::Third,
            bootstrap: true,
            seed: 0,
        }
    }

    /// Defaults for classification: sqrt(d) feature subsets.
    pub fn classification() -> Self {
        ForestConfig {
            feature_subset: FeatureSubset::Sqrt,
            ..ForestConfig::regression()
        }
    }

    pub fn validate(&self) -> Result<(), ForestError> {
        if self.n_trees == 0 {
            return Err(ForestError::BadConfig("n_trees must be at least 1".into()));
        }
        if self.max_depth == 0 {
            return Err(ForestError::BadConfig("max_depth must be at least 1".into()));
        }
        if self.min_samples_split < 2 {
            return Err(ForestError::BadConfig(
                "min_samples_split must be at least 2".into(),
            ));
        }
        Ok(())
    }
}

/// One grown decision tree. Leaves carry payload `L` (mean target for
/// regression, dense class index for classification); nodes are stored in
/// construction (preorder) order.
#[derive(Debug, Clone, PartialEq)]
enum Node<L> {
    Leaf(L),
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
struct Tree<L> {
    nodes: Vec<Node<L>>,
}

impl<L: Copy> Tree<L> {
    /// Route a row to its leaf. Values failing `v <= threshold` — including
    /// +inf and NaN — go right, -inf goes left, so any input lands on a leaf
    /// and the output is always one of the finite training-time payloads.
    fn predict_row(&self, row: &[f64]) -> L {
        let mut at = 0usize;
        loop {
            match self.nodes[at] {
                Node::Leaf(value) => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if row[feature] <= threshold { left } else { right };
                }
            }
        }
    }
}

fn validate_matrix(x: &ArrayView2<'_, f64>, targets: usize) -> Result<(), ForestError> {
    if x.nrows() != targets {
        return Err(ForestError::ShapeMismatch {
            rows: x.nrows(),
            targets,
        });
    }
    if x.nrows() == 0 {
        return Err(ForestError::EmptyData);
    }
    if x.nrows() < 2 {
        return Err(ForestError::TooFewSamples(x.nrows()));
    }
    if x.ncols() == 0 {
        return Err(ForestError::BadConfig("feature matrix has no columns".into()));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(ForestError::NonFinite);
    }
    Ok(())
}

/// Draw `k` distinct feature indices, returned in ascending order so the
/// split scan (and thus tie-breaking) is independent of draw order.
fn sample_features<R: Rng>(d: usize, k: usize, rng: &mut R) -> Vec<usize> {
    if k >= d {
        return (0..d).collect();
    }
    let mut pool: Vec<usize> = (0..d).collect();
    let (chosen, _) = pool.partial_shuffle(rng, k);
    let mut chosen = chosen.to_vec();
    chosen.sort_unstable();
    chosen
}

fn bootstrap_indices<R: Rng>(m: usize, rng: &mut R) -> Vec<usize> {
    (0..m).map(|_| rng.random_range(0..m)).collect()
}

/// Reorder `samples` so rows satisfying `pred` come first; returns the
/// boundary index.
fn partition_in_place(samples: &mut [usize], pred: impl Fn(usize) -> bool) -> usize {
    let mut lo = 0usize;
    for i in 0..samples.len() {
        if pred(samples[i]) {
            samples.swap(lo, i);
            lo += 1;
        }
    }
    lo
}

/// Best (feature, midpoint threshold, summed child SSE) for a regression
/// node, scanning features in ascending order and thresholds in ascending
/// value order, keeping the strictly best score seen.
fn best_split_variance(
    x: &ArrayView2<'_, f64>,
    y: &[f64],
    samples: &[usize],
    features: &[usize],
) -> Option<(usize, f64)> {
    let n = samples.len() as f64;
    let mut best: Option<(usize, f64, f64)> = None;
    let mut pairs: Vec<(f64, f64)> = Vec::with_capacity(samples.len());
    for &f in features {
        pairs.clear();
        pairs.extend(samples.iter().map(|&i| (x[[i, f]], y[i])));
        pairs.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
        let total_sum: f64 = pairs.iter().map(|p| p.1).sum();
        let total_sum2: f64 = pairs.iter().map(|p| p.1 * p.1).sum();
        let mut left_sum = 0.0;
        let mut left_sum2 = 0.0;
        for i in 1..pairs.len() {
            left_sum += pairs[i - 1].1;
            left_sum2 += pairs[i - 1].1 * pairs[i - 1].1;
            if pairs[i].0 == pairs[i - 1].0 {
                continue;
            }
            let nl = i as f64;
            let nr = n - nl;
            let sse_left = (left_sum2 - left_sum * left_sum / nl).max(0.0);
            let right_sum = total_sum - left_sum;
            let sse_right = ((total_sum2 - left_sum2) - right_sum * right_sum / nr).max(0.0);
            let score = sse_left + sse_right;
            if best.is_none_or(|(_, _, s)| score < s) {
                best = Some((f, 0.5 * (pairs[i - 1].0 + pairs[i].0), score));
            }
        }
    }
    best.map(|(f, t, _)| (f, t))
}

/// Best (feature, midpoint threshold) by summed child Gini impurity
/// (weighted by child size), same deterministic scan order as the
/// variance criterion.
fn best_split_gini(
    x: &ArrayView2<'_, f64>,
    y: &[usize],
    n_classes: usize,
    samples: &[usize],
    features: &[usize],
) -> Option<(usize, f64)> {
    let n = samples.len() as f64;
    let mut best: Option<(usize, f64, f64)> = None;
    let mut pairs: Vec<(f64, usize)> = Vec::with_capacity(samples.len());
    let mut total = vec![0usize; n_classes];
    for &i in samples {
        total[y[i]] += 1;
    }
    // n·Gini(counts) = n − Σ_c count_c²/n
    let weighted_gini = |counts: &[usize], n: f64| -> f64 {
        n - counts.iter().map(|&c| (c * c) as f64).sum::<f64>() / n
    };
    for &f in features {
        pairs.clear();
        pairs.extend(samples.iter().map(|&i| (x[[i, f]], y[i])));
        pairs.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
        let mut left = vec![0usize; n_classes];
        let mut right = total.clone();
        for i in 1..pairs.len() {
            left[pairs[i - 1].1] += 1;
            right[pairs[i - 1].1] -= 1;
            if pairs[i].0 == pairs[i - 1].0 {
                continue;
            }
            let nl = i as f64;
            let score = weighted_gini(&left, nl) + weighted_gini(&right, n - nl);
            if best.is_none_or(|(_, _, s)| score < s) {
                best = Some((f, 0.5 * (pairs[i - 1].0 + pairs[i].0), score));
            }
        }
    }
    best.map(|(f, t, _)| (f, t))
}

/// Shared recursive grower. `purity` reports whether a node is already
/// uniform, `split` proposes the best split, `leaf` builds the payload.
struct Grower<'a, L, R: Rng> {
    x: &'a ArrayView2<'a, f64>,
    cfg: &'a ForestConfig,
    rng: &'a mut R,
    nodes: Vec<Node<L>>,
}

impl<'a, L: Copy, R: Rng> Grower<'a, L, R> {
    fn grow(
        &mut self,
        samples: &mut [usize],
        depth: usize,
        pure: &impl Fn(&[usize]) -> bool,
        split: &impl Fn(&ArrayView2<'_, f64>, &[usize], &[usize]) -> Option<(usize, f64)>,
        leaf: &impl Fn(&[usize]) -> L,
    ) -> usize {
        let stop = depth >= self.cfg.max_depth
            || samples.len() < self.cfg.min_samples_split
            || pure(samples);
        let chosen = if stop {
            None
        } else {
            let d = self.x.ncols();
            let k = self.cfg.feature_subset.count(d);
            let features = sample_features(d, k, self.rng);
            split(self.x, samples, &features)
        };
        match chosen {
            None => {
                self.nodes.push(Node::Leaf(leaf(samples)));
                self.nodes.len() - 1
            }
            Some((feature, threshold)) => {
                let at = self.nodes.len();
                // placeholder; child indices are patched in below
                self.nodes.push(Node::Leaf(leaf(samples)));
                let mid = partition_in_place(samples, |i| self.x[[i, feature]] <= threshold);
                let (ls, rs) = samples.split_at_mut(mid);
                let left = self.grow(ls, depth + 1, pure, split, leaf);
                let right = self.grow(rs, depth + 1, pure, split, leaf);
                self.nodes[at] = Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                };
                at
            }
        }
    }
}

fn grow_tree<L: Copy>(
    x: &ArrayView2<'_, f64>,
    cfg: &ForestConfig,
    tree_index: usize,
    pure: &impl Fn(&[usize]) -> bool,
    split: &impl Fn(&ArrayView2<'_, f64>, &[usize], &[usize]) -> Option<(usize, f64)>,
    leaf: &impl Fn(&[usize]) -> L,
) -> Tree<L> {
    let mut rng = stream_rng(cfg.seed, tree_index as u64);
    let mut samples: Vec<usize> = if cfg.bootstrap {
        bootstrap_indices(x.nrows(), &mut rng)
    } else {
        (0..x.nrows()).collect()
    };
    let mut grower = Grower {
        x,
        cfg,
        rng: &mut rng,
        nodes: Vec::new(),
    };
    grower.grow(&mut samples, 0, pure, split, leaf);
    Tree {
        nodes: grower.nodes,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionForest {
    trees: Vec<Tree<f64>>,
    n_features: usize,
    pub config: ForestConfig,
}

pub fn fit_regressor(
    x: ArrayView2<'_, f64>,
    y: &[f64],
    config: &ForestConfig,
) -> Result<RegressionForest, ForestError> {
    config.validate()?;
    validate_matrix(&x, y.len())?;
    if y.iter().any(|v| !v.is_finite()) {
        return Err(ForestError::NonFinite);
    }
    let pure = |samples: &[usize]| {
        let first = y[samples[0]];
        samples.iter().all(|&i| y[i] == first)
    };
    let split = |x: &ArrayView2<'_, f64>, samples: &[usize], features: &[usize]| {
        best_split_variance(x, y, samples, features)
    };
    let leaf = |samples: &[usize]| {
        samples.iter().map(|&i| y[i]).sum::<f64>() / samples.len() as f64
    };
    let trees = (0..config.n_trees)
        .into_par_iter()
        .map(|t| grow_tree(&x, config, t, &pure, &split, &leaf))
        .collect();
    Ok(RegressionForest {
        trees,
        n_features: x.ncols(),
        config: config.clone(),
    })
}

impl RegressionForest {
    /// Average of the tree predictions for each row.
    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Vec<f64>, ForestError> {
        if x.ncols() != self.n_features {
            return Err(ForestError::FeatureMismatch {
                expected: self.n_features,
                got: x.ncols(),
            });
        }
        Ok(x.rows()
            .into_iter()
            .map(|row| {
                let row = row.to_slice().expect("row views of a standard-layout matrix are contiguous");
                let sum: f64 = self.trees.iter().map(|t| t.predict_row(row)).sum();
                sum / self.trees.len() as f64
            })
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationForest {
    trees: Vec<Tree<usize>>,
    /// Original class ids, ascending; tree leaves hold indices into this.
    classes: Vec<u32>,
    n_features: usize,
    /// True when the training set held a single class: the model is a
    /// constant predictor for that class.
    pub degenerate: bool,
    pub config: ForestConfig,
}

pub fn fit_classifier(
    x: ArrayView2<'_, f64>,
    y: &[u32],
    config: &ForestConfig,
) -> Result<ClassificationForest, ForestError> {
    config.validate()?;
    validate_matrix(&x, y.len())?;
    let mut classes: Vec<u32> = y.to_vec();
    classes.sort_unstable();
    classes.dedup();
    let dense: Vec<usize> = y
        .iter()
        .map(|label| classes.binary_search(label).expect("label from training set"))
        .collect();
    let n_classes = classes.len();
    let pure = |samples: &[usize]| {
        let first = dense[samples[0]];
        samples.iter().all(|&i| dense[i] == first)
    };
    let split = |x: &ArrayView2<'_, f64>, samples: &[usize], features: &[usize]| {
        best_split_gini(x, &dense, n_classes, samples, features)
    };
    let leaf = |samples: &[usize]| {
        let mut counts = vec![0usize; n_classes];
        for &i in samples {
            counts[dense[i]] += 1;
        }
        // majority class; ties go to the smallest class id
        let mut best = 0usize;
        for c in 1..n_classes {
            if counts[c] > counts[best] {
                best = c;
            }
        }
        best
    };
    let trees = (0..config.n_trees)
        .into_par_iter()
        .map(|t| grow_tree(&x, config, t, &pure, &split, &leaf))
        .collect();
    Ok(ClassificationForest {
        trees,
        degenerate: n_classes < 2,
        classes,
        n_features: x.ncols(),
        config: config.clone(),
    })
}

impl ClassificationForest {
    /// Plurality vote over the trees; ties break toward the smallest
    /// class id.
    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Vec<u32>, ForestError> {
        if x.ncols() != self.n_features {
            return Err(ForestError::FeatureMismatch {
                expected: self.n_features,
                got: x.ncols(),
            });
        }
        Ok(x.rows()
            .into_iter()
            .map(|row| {
                let row = row.to_slice().expect("row views of a standard-layout matrix are contiguous");
                let mut votes = vec![0usize; self.classes.len()];
                for t in &self.trees {
                    votes[t.predict_row(row)] += 1;
                }
                let mut best = 0usize;
                for c in 1..votes.len() {
                    if votes[c] > votes[best] {
                        best = c;
                    }
                }
                self.classes[best]
            })
            .collect())
    }
}
