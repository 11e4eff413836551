//! Sampled two-hop aggregation with concatenating combine and unit-norm
//! outputs.

use ndarray::{concatenate, Array2, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;

use super::{relu, GnnConfig, PairBatch, TruncatedAdj};
use crate::rng::stream_rng;

/// Element-wise mean; empty input aggregates to zero.
pub fn aggregate_mean(dim: usize, rows: &[&[f64]]) -> Vec<f64> {
    let mut out = vec![0.0f64; dim];
    if rows.is_empty() {
        return out;
    }
    for row in rows {
        for (o, x) in out.iter_mut().zip(*row) {
            *o += x;
        }
    }
    let inv = 1.0 / rows.len() as f64;
    for o in &mut out {
        *o *= inv;
    }
    out
}

/// Element-wise max over rectified pool-transformed rows; empty input
/// aggregates to zero.
pub fn aggregate_maxpool(rows: &[&[f64]], pool: &Array2<f64>) -> Vec<f64> {
    if rows.is_empty() {
        return vec![0.0; pool.ncols()];
    }
    maxpool_forward(rows, pool).out
}

struct MaxpoolState {
    /// pool-transformed rows before rectification, one row per input
    pre: Array2<f64>,
    out: Vec<f64>,
    /// winning input row per output dimension
    argmax: Vec<usize>,
}

fn maxpool_forward(rows: &[&[f64]], pool: &Array2<f64>) -> MaxpoolState {
    let p = pool.ncols();
    let k = rows.len();
    let mut pre = Array2::zeros((k, p));
    for (i, row) in rows.iter().enumerate() {
        for c in 0..p {
            let mut acc = 0.0;
            for (r, x) in row.iter().enumerate() {
                acc += x * pool[[r, c]];
            }
            pre[[i, c]] = acc;
        }
    }
    let mut out = vec![0.0f64; p];
    let mut argmax = vec![0usize; p];
    for c in 0..p {
        let mut best = f64::NEG_INFINITY;
        for i in 0..k {
            let v = pre[[i, c]].max(0.0);
            if v > best {
                best = v;
                argmax[c] = i;
            }
        }
        out[c] = best;
    }
    MaxpoolState { pre, out, argmax }
}

/// Lookup rows feed layer 1; weights consume the concatenation of a node's
/// own representation with its aggregated neighborhood.
#[derive(Debug, Clone)]
pub struct SageParams {
    pub lookup: Array2<f64>,
    pub w1: Array2<f64>,
    pub w2: Array2<f64>,
    pub pool1: Option<Array2<f64>>,
    pub pool2: Option<Array2<f64>>,
}

impl SageParams {
    pub fn init(n: usize, config: &GnnConfig) -> SageParams {
        let h = config.hidden_dim;
        let lookup = super::identity_features(n, h, config.seed);
        let mut rng = stream_rng(config.seed, 4);
        let w1 = super::glorot(&mut rng, 2 * h, h);
        let w2 = super::glorot(&mut rng, 2 * h, config.dim);
        let (pool1, pool2) = if config.arch == super::Arch::SageMaxpool {
            (
                Some(super::glorot(&mut rng, h, h)),
                Some(super::glorot(&mut rng, h, h)),
            )
        } else {
            (None, None)
        };
        SageParams {
            lookup,
            w1,
            w2,
            pool1,
            pool2,
        }
    }

    pub fn tensors(&self) -> Vec<&Array2<f64>> {
        let mut t = vec![&self.lookup, &self.w1, &self.w2];
        if let Some(p) = &self.pool1 {
            t.push(p);
        }
        if let Some(p) = &self.pool2 {
            t.push(p);
        }
        t
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Array2<f64>> {
        let mut t = vec![&mut self.lookup, &mut self.w1, &mut self.w2];
        if let Some(p) = &mut self.pool1 {
            t.push(p);
        }
        if let Some(p) = &mut self.pool2 {
            t.push(p);
        }
        t
    }
}

/// Sampled two-hop computation tree for one minibatch.
#[derive(Debug, Clone)]
pub struct SageTree {
    /// output nodes, in batch order
    pub nodes: Vec<u32>,
    /// position of each output node inside `layer1_nodes`
    pub self_pos: Vec<usize>,
    /// sampled depth-1 neighbors per output node, as `layer1_nodes` positions
    pub depth1: Vec<Vec<usize>>,
    /// all nodes needing a layer-1 representation, deduplicated
    pub layer1_nodes: Vec<u32>,
    /// sampled depth-2 neighbors per layer-1 node, as raw node ids
    pub depth2: Vec<Vec<u32>>,
}

fn sample_neighbors(row: &[u32], s: usize, rng: &mut ChaCha8Rng) -> Vec<u32> {
    if row.len() <= s {
        return row.to_vec();
    }
    let mut pool = row.to_vec();
    for i in 0..s {
        let j = rng.random_range(i..pool.len());
        pool.swap(i, j);
    }
    let mut kept = pool[..s].to_vec();
    kept.sort_unstable();
    kept
}

/// Draw the computation tree: every output node and sampled depth-1 neighbor
/// gets one shared depth-2 sample. Nodes with degree at most the sample size
/// keep their whole neighborhood.
pub fn sample_tree(
    adj: &TruncatedAdj,
    targets: &[u32],
    sample_sizes: (usize, usize),
    rng: &mut ChaCha8Rng,
) -> SageTree {
    let (s1, s2) = sample_sizes;
    let mut index: HashMap<u32, usize> = HashMap::new();
    let mut layer1_nodes: Vec<u32> = Vec::new();
    let intern = |x: u32, layer1_nodes: &mut Vec<u32>, index: &mut HashMap<u32, usize>| {
        *index.entry(x).or_insert_with(|| {
            layer1_nodes.push(x);
            layer1_nodes.len() - 1
        })
    };
    let mut self_pos = Vec::with_capacity(targets.len());
    let mut depth1 = Vec::with_capacity(targets.len());
    for &b in targets {
        self_pos.push(intern(b, &mut layer1_nodes, &mut index));
        let sampled = sample_neighbors(adj.row(b as usize), s1, rng);
        depth1.push(
            sampled
                .into_iter()
                .map(|v| intern(v, &mut layer1_nodes, &mut index))
                .collect(),
        );
    }
    let mut depth2 = Vec::with_capacity(layer1_nodes.len());
    for &x in &layer1_nodes {
        depth2.push(sample_neighbors(adj.row(x as usize), s2, rng));
    }
    SageTree {
        nodes: targets.to_vec(),
        self_pos,
        depth1,
        layer1_nodes,
        depth2,
    }
}

struct SageCompute {
    cat1: Array2<f64>,
    u1: Array2<f64>,
    h1: Array2<f64>,
    agg0_state: Vec<Option<MaxpoolState>>,
    cat2: Array2<f64>,
    norms: Vec<f64>,
    z: Array2<f64>,
    agg1_state: Vec<Option<MaxpoolState>>,
}

fn sage_compute(params: &SageParams, tree: &SageTree, mean: bool) -> SageCompute {
    let h = params.lookup.ncols();
    let l1 = tree.layer1_nodes.len();
    let b = tree.nodes.len();

    let mut x1 = Array2::zeros((l1, h));
    for (i, &x) in tree.layer1_nodes.iter().enumerate() {
        x1.row_mut(i).assign(&params.lookup.row(x as usize));
    }
    let mut agg0 = Array2::zeros((l1, h));
    let mut agg0_state: Vec<Option<MaxpoolState>> = Vec::with_capacity(l1);
    for i in 0..l1 {
        let rows: Vec<&[f64]> = tree.depth2[i]
            .iter()
            .map(|&y| params.lookup.row(y as usize).to_slice().unwrap())
            .collect();
        if rows.is_empty() {
            agg0_state.push(None);
            continue;
        }
        if mean {
            let m = aggregate_mean(h, &rows);
            agg0.row_mut(i).assign(&ndarray::ArrayView1::from(&m));
            agg0_state.push(None);
        } else {
            let state = maxpool_forward(&rows, params.pool1.as_ref().unwrap());
            agg0.row_mut(i)
                .assign(&ndarray::ArrayView1::from(&state.out));
            agg0_state.push(Some(state));
        }
    }
    let cat1 = concatenate![Axis(1), x1, agg0];
    let u1 = cat1.dot(&params.w1);
    let h1 = relu(&u1);

    let mut h1_self = Array2::zeros((b, h));
    for (bi, &pos) in tree.self_pos.iter().enumerate() {
        h1_self.row_mut(bi).assign(&h1.row(pos));
    }
    let mut agg1 = Array2::zeros((b, h));
    let mut agg1_state: Vec<Option<MaxpoolState>> = Vec::with_capacity(b);
    for bi in 0..b {
        let rows: Vec<&[f64]> = tree.depth1[bi]
            .iter()
            .map(|&pos| h1.row(pos).to_slice().unwrap())
            .collect();
        if rows.is_empty() {
            agg1_state.push(None);
            continue;
        }
        if mean {
            let m = aggregate_mean(h, &rows);
            agg1.row_mut(bi).assign(&ndarray::ArrayView1::from(&m));
            agg1_state.push(None);
        } else {
            let state = maxpool_forward(&rows, params.pool2.as_ref().unwrap());
            agg1.row_mut(bi)
                .assign(&ndarray::ArrayView1::from(&state.out));
            agg1_state.push(Some(state));
        }
    }
    let cat2 = concatenate![Axis(1), h1_self, agg1];
    let v = cat2.dot(&params.w2);
    let mut z = v.clone();
    let mut norms = Vec::with_capacity(b);
    for bi in 0..b {
        let norm = v.row(bi).iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            z.row_mut(bi).mapv_inplace(|x| x / norm);
        }
        norms.push(norm);
    }
    SageCompute {
        cat1,
        u1,
        h1,
        agg0_state,
        cat2,
        norms,
        z,
        agg1_state,
    }
}

/// Embed `targets` with freshly sampled neighborhoods.
pub fn sage_forward(
    params: &SageParams,
    adj: &TruncatedAdj,
    targets: &[u32],
    sample_sizes: (usize, usize),
    mean: bool,
    rng: &mut ChaCha8Rng,
) -> Array2<f64> {
    let tree = sample_tree(adj, targets, sample_sizes, rng);
    sage_compute(params, &tree, mean).z
}

/// Edge-objective loss and parameter gradients for a fixed computation tree;
/// pair indices address positions in `tree.nodes`.
pub fn sage_loss_grads(
    params: &SageParams,
    tree: &SageTree,
    batch: &PairBatch,
    mean: bool,
) -> (f64, Vec<Array2<f64>>) {
    let c = sage_compute(params, tree, mean);
    let (loss, dz) = super::batch_loss_dz(&c.z, batch);
    let h = params.lookup.ncols();
    let d = params.w2.ncols();
    let b = tree.nodes.len();
    let l1 = tree.layer1_nodes.len();

    // unit-norm backward: dv = (dz - z (z . dz)) / norm
    let mut dv = Array2::zeros((b, d));
    for bi in 0..b {
        if c.norms[bi] <= 1e-12 {
            continue;
        }
        let zdot: f64 = c.z.row(bi).iter().zip(dz.row(bi)).map(|(a, g)| a * g).sum();
        for k in 0..d {
            dv[[bi, k]] = (dz[[bi, k]] - c.z[[bi, k]] * zdot) / c.norms[bi];
        }
    }

    let dw2 = c.cat2.t().dot(&dv);
    let dcat2 = dv.dot(&params.w2.t());
    let mut dh1 = Array2::zeros((l1, h));
    let mut dpool2 = params.pool2.as_ref().map(|p| Array2::zeros(p.raw_dim()));
    for bi in 0..b {
        for k in 0..h {
            dh1[[tree.self_pos[bi], k]] += dcat2[[bi, k]];
        }
        let members = &tree.depth1[bi];
        if members.is_empty() {
            continue;
        }
        if mean {
            let inv = 1.0 / members.len() as f64;
            for &pos in members {
                for k in 0..h {
                    dh1[[pos, k]] += dcat2[[bi, h + k]] * inv;
                }
            }
        } else {
            let state = c.agg1_state[bi].as_ref().unwrap();
            let pool = params.pool2.as_ref().unwrap();
            let dpool = dpool2.as_mut().unwrap();
            for col in 0..h {
                let win = state.argmax[col];
                if state.pre[[win, col]] <= 0.0 {
                    continue;
                }
                let val = dcat2[[bi, h + col]];
                if val == 0.0 {
                    continue;
                }
                let y_pos = members[win];
                for r in 0..h {
                    dpool[[r, col]] += c.h1[[y_pos, r]] * val;
                    dh1[[y_pos, r]] += pool[[r, col]] * val;
                }
            }
        }
    }

    let mask = c.u1.mapv(|x| if x > 0.0 { 1.0 } else { 0.0 });
    let du1 = dh1 * mask;
    let dw1 = c.cat1.t().dot(&du1);
    let dcat1 = du1.dot(&params.w1.t());

    let n = params.lookup.nrows();
    let mut dlookup = Array2::zeros((n, h));
    let mut dpool1 = params.pool1.as_ref().map(|p| Array2::zeros(p.raw_dim()));
    for i in 0..l1 {
        let node = tree.layer1_nodes[i] as usize;
        for k in 0..h {
            dlookup[[node, k]] += dcat1[[i, k]];
        }
        let members = &tree.depth2[i];
        if members.is_empty() {
            continue;
        }
        if mean {
            let inv = 1.0 / members.len() as f64;
            for &y in members {
                for k in 0..h {
                    dlookup[[y as usize, k]] += dcat1[[i, h + k]] * inv;
                }
            }
        } else {
            let state = c.agg0_state[i].as_ref().unwrap();
            let pool = params.pool1.as_ref().unwrap();
            let dpool = dpool1.as_mut().unwrap();
            for col in 0..h {
                let win = state.argmax[col];
                if state.pre[[win, col]] <= 0.0 {
                    continue;
                }
                let val = dcat1[[i, h + col]];
                if val == 0.0 {
                    continue;
                }
                let y = members[win] as usize;
                for r in 0..h {
                    dpool[[r, col]] += params.lookup[[y, r]] * val;
                    dlookup[[y, r]] += pool[[r, col]] * val;
                }
            }
        }
    }

    let mut grads = vec![dlookup, dw1, dw2];
    if let Some(p) = dpool1 {
        grads.push(p);
    }
    if let Some(p) = dpool2 {
        grads.push(p);
    }
    (loss, grads)
}

/// Build the tree and index-remapped pair batch for one chunk of edges.
pub(super) fn batch_tree(
    adj: &TruncatedAdj,
    chunk: &[(u32, u32)],
    sample_sizes: (usize, usize),
    negatives: usize,
    n: usize,
    table: &crate::skipgram::NodeDistribution,
    rng: &mut ChaCha8Rng,
) -> (SageTree, PairBatch) {
    let mut order: Vec<u32> = Vec::new();
    let mut index: HashMap<u32, usize> = HashMap::new();
    let slot = |x: u32, order: &mut Vec<u32>, index: &mut HashMap<u32, usize>| {
        *index.entry(x).or_insert_with(|| {
            order.push(x);
            order.len() - 1
        })
    };
    let mut pairs = Vec::with_capacity(chunk.len());
    for &(u, v) in chunk {
        let pu = slot(u, &mut order, &mut index);
        let pv = slot(v, &mut order, &mut index);
        let mut negs = Vec::with_capacity(negatives);
        for _ in 0..negatives {
            let mut k = table.sample(rng);
            if n > 1 {
                while k == v {
                    k = table.sample(rng);
                }
            }
            negs.push(slot(k, &mut order, &mut index));
        }
        pairs.push((pu, pv, negs));
    }
    let tree = sample_tree(adj, &order, sample_sizes, rng);
    (tree, PairBatch { pairs })
}
