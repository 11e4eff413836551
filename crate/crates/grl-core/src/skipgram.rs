//! Skip-gram with negative sampling over walk corpora.
//!
//! The shallow embedding trainer behind both walk-based methods: pair a
//! center node with every corpus neighbor inside the window, push their
//! vectors together, and push the center away from noise nodes drawn from a
//! degree-powered distribution. Training runs either fully deterministic on
//! one thread or hogwild-style over walk shards with lock-free updates.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use thiserror::Error;

use crate::embedding::EmbeddingMatrix;
use crate::graph::Graph;
use crate::rng::{seeded_rng, stream_rng};
use crate::walks::WalkCorpus;

#[derive(Debug, Error)]
pub enum SkipGramError {
    #[error("bad config: {0}")]
    BadConfig(String),
    #[error("corpus does not belong to this graph (fingerprint or node count mismatch)")]
    CorpusMismatch,
    #[error("corpus has no trainable pairs")]
    EmptyCorpus,
    #[error("training diverged; last finite mean pair loss was {last_finite_loss}")]
    Diverged { last_finite_loss: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainMode {
    Deterministic,
    Hogwild { workers: usize },
}

impl TrainMode {
    pub fn name(&self) -> &'static str {
        match self {
            TrainMode::Deterministic => "deterministic",
            TrainMode::Hogwild { .. } => "hogwild",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SkipGramConfig {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub ns_exponent: f64,
    /// 0 disables frequent-node subsampling.
    pub subsample_freq: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub mode: TrainMode,
}

impl Default for SkipGramConfig {
    fn default() -> SkipGramConfig {
        SkipGramConfig {
            dim: 128,
            window: 10,
            negatives: 5,
            ns_exponent: 0.75,
            subsample_freq: 0.0,
            epochs: 5,
            learning_rate: 0.025,
            seed: 0,
            mode: TrainMode::Deterministic,
        }
    }
}

impl SkipGramConfig {
    pub fn validate(&self) -> Result<(), SkipGramError> {
        if self.dim < 1 {
            return Err(SkipGramError::BadConfig("dim must be >= 1".into()));
        }
        if self.window < 1 {
            return Err(SkipGramError::BadConfig("window must be >= 1".into()));
        }
        if self.negatives < 1 {
            return Err(SkipGramError::BadConfig("negatives must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(SkipGramError::BadConfig("learning_rate must be > 0".into()));
        }
        if self.epochs < 1 {
            return Err(SkipGramError::BadConfig("epochs must be >= 1".into()));
        }
        Ok(())
    }
}

/// Categorical distribution over nodes as a cumulative-weight array.
#[derive(Debug, Clone)]
pub struct NodeDistribution {
    cum: Vec<f64>,
}

impl NodeDistribution {
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> u32 {
        let target = rng.random::<f64>() * self.cum[self.cum.len() - 1];
        self.cum.partition_point(|&c| c <= target) as u32
    }

    pub fn prob(&self, u: usize) -> f64 {
        let total = self.cum[self.cum.len() - 1];
        let prev = if u == 0 { 0.0 } else { self.cum[u - 1] };
        (self.cum[u] - prev) / total
    }
}

/// Noise distribution P(j) proportional to max(degree(j), 1)^ns_exponent.
pub fn negative_sampling_table(g: &Graph, ns_exponent: f64) -> NodeDistribution {
    let mut cum = Vec::with_capacity(g.num_nodes());
    let mut acc = 0.0f64;
    for u in 0..g.num_nodes() as u32 {
        let d = g.degree(u).max(1) as f64;
        acc += d.powf(ns_exponent);
        cum.push(acc);
    }
    NodeDistribution { cum }
}

/// Drop frequent nodes: each occurrence of node u with corpus frequency f(u)
/// survives with probability min(1, sqrt(threshold / f(u))). Walks split at
/// dropped tokens, so no window ever spans a removed position.
pub fn subsample_corpus(corpus: &WalkCorpus, threshold: f64, seed: u64) -> WalkCorpus {
    assert!(threshold > 0.0, "subsample threshold must be positive");
    let total = corpus.total_tokens() as f64;
    let mut count = vec![0usize; corpus.num_nodes];
    for walk in &corpus.walks {
        for &u in walk {
            count[u as usize] += 1;
        }
    }
    let keep: Vec<f64> = count
        .iter()
        .map(|&c| {
            if c == 0 {
                1.0
            } else {
                (threshold * total / c as f64).sqrt().min(1.0)
            }
        })
        .collect();
    let mut rng = seeded_rng(seed);
    let mut walks = Vec::new();
    for walk in &corpus.walks {
        let mut segment: Vec<u32> = Vec::new();
        for &u in walk {
            if rng.random::<f64>() < keep[u as usize] {
                segment.push(u);
            } else if !segment.is_empty() {
                walks.push(std::mem::take(&mut segment));
            }
        }
        if !segment.is_empty() {
            walks.push(segment);
        }
    }
    WalkCorpus {
        walks,
        num_nodes: corpus.num_nodes,
        graph_fingerprint: corpus.graph_fingerprint,
        params: corpus.params,
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// log(1 + e^x) without overflow.
#[inline]
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Negative-sampling loss of one pair: -log sigma(z . c_pos) - sum_k log sigma(-z . c_k).
pub fn pair_loss(z: &[f64], c_pos: &[f64], c_negs: &[&[f64]]) -> f64 {
    let mut loss = softplus(-dot(z, c_pos));
    for c in c_negs {
        loss += softplus(dot(z, c));
    }
    loss
}

/// Analytic gradients of [`pair_loss`] with respect to z, c_pos, and each negative.
pub fn pair_gradients(
    z: &[f64],
    c_pos: &[f64],
    c_negs: &[&[f64]],
) -> (Vec<f64>, Vec<f64>, Vec<Vec<f64>>) {
    let g_pos = sigmoid(dot(z, c_pos)) - 1.0;
    let mut dz: Vec<f64> = c_pos.iter().map(|c| g_pos * c).collect();
    let dc_pos: Vec<f64> = z.iter().map(|zi| g_pos * zi).collect();
    let mut dc_negs = Vec::with_capacity(c_negs.len());
    for c in c_negs {
        let g_neg = sigmoid(dot(z, c));
        for (d, ci) in dz.iter_mut().zip(*c) {
            *d += g_neg * ci;
        }
        dc_negs.push(z.iter().map(|zi| g_neg * zi).collect());
    }
    (dz, dc_pos, dc_negs)
}

/// Per-training-run diagnostics.
#[derive(Debug, Clone)]
pub struct TrainStats {
    pub epoch_mean_loss: Vec<f64>,
    pub total_pairs: usize,
    pub max_row_norm: f64,
    pub mode: &'static str,
}

fn count_pairs(walks: &[Vec<u32>], window: usize) -> usize {
    walks
        .iter()
        .map(|walk| {
            let len = walk.len();
            (0..len)
                .map(|i| (i + window).min(len - 1) - i.saturating_sub(window))
                .sum::<usize>()
        })
        .sum()
}

/// One SGD update on (center u, context v) plus drawn negatives.
/// Returns the pair loss at the pre-update parameters.
#[allow(clippy::too_many_arguments)]
fn update_pair(
    input: &mut [f64],
    context: &mut [f64],
    dim: usize,
    u: usize,
    v: usize,
    lr: f64,
    negatives: usize,
    num_nodes: usize,
    table: &NodeDistribution,
    rng: &mut ChaCha8Rng,
    delta: &mut [f64],
) -> f64 {
    let zi = u * dim;
    delta.fill(0.0);
    let mut loss;
    {
        let ci = v * dim;
        let d = dot(&input[zi..zi + dim], &context[ci..ci + dim]);
        loss = softplus(-d);
        let g = sigmoid(d) - 1.0;
        for k in 0..dim {
            delta[k] += g * context[ci + k];
            context[ci + k] -= lr * g * input[zi + k];
        }
    }
    for _ in 0..negatives {
        let mut neg = table.sample(rng) as usize;
        if num_nodes > 1 {
            while neg == v {
                neg = table.sample(rng) as usize;
            }
        }
        let ci = neg * dim;
        let d = dot(&input[zi..zi + dim], &context[ci..ci + dim]);
        loss += softplus(d);
        let g = sigmoid(d);
        for k in 0..dim {
            delta[k] += g * context[ci + k];
            context[ci + k] -= lr * g * input[zi + k];
        }
    }
    for k in 0..dim {
        input[zi + k] -= lr * delta[k];
    }
    loss
}

fn init_input(n: usize, dim: usize, seed: u64) -> Vec<f64> {
    let mut rng = stream_rng(seed, 0);
    let half = 0.5 / dim as f64;
    (0..n * dim).map(|_| rng.random_range(-half..half)).collect()
}

/// Train skip-gram embeddings over a walk corpus from `g`.
///
/// Applies frequent-node subsampling when configured, then runs SGD with a
/// learning rate decaying linearly to zero over all epochs. Returns the input
/// vectors plus loss diagnostics. Deterministic mode is bit-reproducible per
/// seed; hogwild mode shards walks across workers with lock-free updates and
/// reproduces only in distribution.
pub fn train_skipgram(
    g: &Graph,
    corpus: &WalkCorpus,
    config: &SkipGramConfig,
) -> Result<(EmbeddingMatrix, TrainStats), SkipGramError> {
    config.validate()?;
    if corpus.graph_fingerprint != g.fingerprint() || corpus.num_nodes != g.num_nodes() {
        return Err(SkipGramError::CorpusMismatch);
    }
    let subsampled;
    let walks: &[Vec<u32>] = if config.subsample_freq > 0.0 {
        subsampled = subsample_corpus(corpus, config.subsample_freq, config.seed ^ 0x5b5b);
        &subsampled.walks
    } else {
        &corpus.walks
    };
    let pairs_per_epoch = count_pairs(walks, config.window);
    if pairs_per_epoch == 0 {
        return Err(SkipGramError::EmptyCorpus);
    }
    let n = g.num_nodes();
    let dim = config.dim;
    let table = negative_sampling_table(g, config.ns_exponent);
    let total_pairs = pairs_per_epoch * config.epochs;

    let (input, epoch_mean_loss) = match config.mode {
        TrainMode::Deterministic => train_single_thread(
            walks,
            n,
            config,
            &table,
            pairs_per_epoch,
            total_pairs,
        )?,
        TrainMode::Hogwild { workers } => train_hogwild(
            walks,
            n,
            config,
            &table,
            total_pairs,
            workers.max(1),
        )?,
    };

    let mut emb = EmbeddingMatrix::zeros(n, dim);
    for u in 0..n {
        emb.row_mut(u).copy_from_slice(&input[u * dim..(u + 1) * dim]);
    }
    if !emb.is_finite() {
        return Err(SkipGramError::Diverged {
            last_finite_loss: last_finite(&epoch_mean_loss),
        });
    }
    emb.method = "skipgram".to_string();
    emb.config_json = serde_json::to_string(config).expect("config serializes");
    emb.graph_fingerprint = g.fingerprint();
    let stats = TrainStats {
        epoch_mean_loss,
        total_pairs,
        max_row_norm: emb.max_row_norm(),
        mode: config.mode.name(),
    };
    Ok((emb, stats))
}

fn last_finite(losses: &[f64]) -> f64 {
    losses.iter().rev().copied().find(|l| l.is_finite()).unwrap_or(0.0)
}

fn train_single_thread(
    walks: &[Vec<u32>],
    n: usize,
    config: &SkipGramConfig,
    table: &NodeDistribution,
    pairs_per_epoch: usize,
    total_pairs: usize,
) -> Result<(Vec<f64>, Vec<f64>), SkipGramError> {
    let dim = config.dim;
    let mut input = init_input(n, dim, config.seed);
    let mut context = vec![0.0f64; n * dim];
    let mut rng = stream_rng(config.seed, 1);
    let mut delta = vec![0.0f64; dim];
    let mut epoch_mean_loss = Vec::with_capacity(config.epochs);
    let mut k = 0usize;
    for _epoch in 0..config.epochs {
        let mut epoch_loss = 0.0f64;
        for walk in walks {
            let len = walk.len();
            for i in 0..len {
                let lo = i.saturating_sub(config.window);
                let hi = (i + config.window).min(len - 1);
                for j in lo..=hi {
                    if j == i {
                        continue;
                    }
                    let lr = config.learning_rate * (1.0 - k as f64 / total_pairs as f64);
                    epoch_loss += update_pair(
                        &mut input,
                        &mut context,
                        dim,
                        walk[i] as usize,
                        walk[j] as usize,
                        lr,
                        config.negatives,
                        n,
                        table,
                        &mut rng,
                        &mut delta,
                    );
                    k += 1;
                }
            }
        }
        let mean = epoch_loss / pairs_per_epoch as f64;
        if !mean.is_finite() {
            return Err(SkipGramError::Diverged {
                last_finite_loss: last_finite(&epoch_mean_loss),
            });
        }
        epoch_mean_loss.push(mean);
    }
    Ok((input, epoch_mean_loss))
}

#[inline]
fn aload(a: &AtomicU64) -> f64 {
    f64::from_bits(a.load(Ordering::Relaxed))
}

#[inline]
fn aadd(a: &AtomicU64, delta: f64) {
    // lost updates between load and store are acceptable: hogwild relies on
    // sparse, small, mostly-disjoint writes
    a.store((aload(a) + delta).to_bits(), Ordering::Relaxed);
}

fn train_hogwild(
    walks: &[Vec<u32>],
    n: usize,
    config: &SkipGramConfig,
    table: &NodeDistribution,
    total_pairs: usize,
    workers: usize,
) -> Result<(Vec<f64>, Vec<f64>), SkipGramError> {
    let dim = config.dim;
    let input: Vec<AtomicU64> = init_input(n, dim, config.seed)
        .into_iter()
        .map(|x| AtomicU64::new(x.to_bits()))
        .collect();
    let context: Vec<AtomicU64> = (0..n * dim).map(|_| AtomicU64::new(0)).collect();
    let clock = AtomicUsize::new(0);
    let epochs = config.epochs;

    // per-(worker, epoch) loss sums and pair counts
    let mut shard_losses: Vec<Vec<(f64, usize)>> = Vec::new();
    std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for w in 0..workers {
            let input = &input;
            let context = &context;
            let clock = &clock;
            let handle = scope.spawn(move || {
                let mut rng = stream_rng(config.seed, 1 + w as u64);
                let mut z = vec![0.0f64; dim];
                let mut delta = vec![0.0f64; dim];
                let mut per_epoch = Vec::with_capacity(epochs);
                for _epoch in 0..epochs {
                    let mut loss_sum = 0.0f64;
                    let mut pairs = 0usize;
                    for walk in walks.iter().skip(w).step_by(workers) {
                        let len = walk.len();
                        for i in 0..len {
                            let lo = i.saturating_sub(config.window);
                            let hi = (i + config.window).min(len - 1);
                            for j in lo..=hi {
                                if j == i {
                                    continue;
                                }
                                let k = clock.fetch_add(1, Ordering::Relaxed);
                                let lr = config.learning_rate
                                    * (1.0 - k as f64 / total_pairs as f64).max(0.0);
                                let u = walk[i] as usize;
                                let v = walk[j] as usize;
                                let zi = u * dim;
                                for t in 0..dim {
                                    z[t] = aload(&input[zi + t]);
                                }
                                delta.fill(0.0);
                                let mut loss;
                                {
                                    let ci = v * dim;
                                    let mut d = 0.0;
                                    for t in 0..dim {
                                        d += z[t] * aload(&context[ci + t]);
                                    }
                                    loss = softplus(-d);
                                    let gpos = sigmoid(d) - 1.0;
                                    for t in 0..dim {
                                        delta[t] += gpos * aload(&context[ci + t]);
                                        aadd(&context[ci + t], -lr * gpos * z[t]);
                                    }
                                }
                                for _ in 0..config.negatives {
                                    let mut neg = table.sample(&mut rng) as usize;
                                    if n > 1 {
                                        while neg == v {
                                            neg = table.sample(&mut rng) as usize;
                                        }
                                    }
                                    let ci = neg * dim;
                                    let mut d = 0.0;
                                    for t in 0..dim {
                                        d += z[t] * aload(&context[ci + t]);
                                    }
                                    loss += softplus(d);
                                    let gneg = sigmoid(d);
                                    for t in 0..dim {
                                        delta[t] += gneg * aload(&context[ci + t]);
                                        aadd(&context[ci + t], -lr * gneg * z[t]);
                                    }
                                }
                                for t in 0..dim {
                                    aadd(&input[zi + t], -lr * delta[t]);
                                }
                                loss_sum += loss;
                                pairs += 1;
                            }
                        }
                    }
                    per_epoch.push((loss_sum, pairs));
                }
                per_epoch
            });
            handles.push(handle);
        }
        for handle in handles {
            shard_losses.push(handle.join().expect("hogwild worker panicked"));
        }
    });

    let mut epoch_mean_loss = Vec::with_capacity(epochs);
    for e in 0..epochs {
        let (sum, pairs) = shard_losses
            .iter()
            .fold((0.0, 0usize), |(s, p), shard| {
                (s + shard[e].0, p + shard[e].1)
            });
        let mean = if pairs == 0 { 0.0 } else { sum / pairs as f64 };
        if !mean.is_finite() {
            return Err(SkipGramError::Diverged {
                last_finite_loss: last_finite(&epoch_mean_loss),
            });
        }
        epoch_mean_loss.push(mean);
    }
    let input: Vec<f64> = input.iter().map(aload).collect();
    Ok((input, epoch_mean_loss))
}
