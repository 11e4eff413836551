//! Full-batch graph convolution with symmetric-normalized adjacency.

use ndarray::Array2;

use super::{relu, GnnConfig, GnnError, PairBatch, SparseAdj, TruncatedAdj};
use crate::graph::Graph;
use crate::rng::stream_rng;

/// Self-looped, degree-normalized adjacency: entry (u,v) is
/// 1/sqrt((deg_u+1)(deg_v+1)) for retained edges and the diagonal.
pub fn gcn_normalized_adjacency(adj: &TruncatedAdj) -> SparseAdj {
    let n = adj.num_nodes();
    let dt: Vec<f64> = (0..n).map(|u| (adj.row(u).len() + 1) as f64).collect();
    SparseAdj::from_rows(n, |u| {
        let mut entries: Vec<(u32, f64)> = Vec::with_capacity(adj.row(u).len() + 1);
        let mut pushed_self = false;
        for &v in adj.row(u) {
            if !pushed_self && v as usize > u {
                entries.push((u as u32, 1.0 / dt[u]));
                pushed_self = true;
            }
            entries.push((v, 1.0 / (dt[u] * dt[v as usize]).sqrt()));
        }
        if !pushed_self {
            entries.push((u as u32, 1.0 / dt[u]));
        }
        entries
    })
}

/// One convolution: sigma(A_hat H W) over the full, uncapped adjacency.
pub fn gcn_layer(h: &Array2<f64>, g: &Graph, w: &Array2<f64>) -> Result<Array2<f64>, GnnError> {
    if h.nrows() != g.num_nodes() {
        return Err(GnnError::ShapeMismatch(format!(
            "features have {} rows for {} nodes",
            h.nrows(),
            g.num_nodes()
        )));
    }
    if w.nrows() != h.ncols() {
        return Err(GnnError::ShapeMismatch(format!(
            "weights expect {} input columns, features have {}",
            w.nrows(),
            h.ncols()
        )));
    }
    let adj = gcn_normalized_adjacency(&TruncatedAdj::full(g));
    Ok(relu(&adj.matmul(h).dot(w)))
}

/// Lookup rows act as the first layer's weights; `weights[i]` drives layer i+2.
#[derive(Debug, Clone)]
pub struct GcnParams {
    pub lookup: Array2<f64>,
    pub weights: Vec<Array2<f64>>,
}

impl GcnParams {
    pub fn init(n: usize, config: &GnnConfig) -> GcnParams {
        let width = if config.layers == 1 {
            config.dim
        } else {
            config.hidden_dim
        };
        let lookup = super::identity_features(n, width, config.seed);
        let mut rng = stream_rng(config.seed, 4);
        let mut weights = Vec::new();
        for l in 2..=config.layers {
            let out = if l == config.layers {
                config.dim
            } else {
                config.hidden_dim
            };
            weights.push(super::glorot(&mut rng, config.hidden_dim, out));
        }
        GcnParams { lookup, weights }
    }

    pub fn tensors(&self) -> Vec<&Array2<f64>> {
        let mut t = vec![&self.lookup];
        t.extend(self.weights.iter());
        t
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Array2<f64>> {
        let mut t = vec![&mut self.lookup];
        t.extend(self.weights.iter_mut());
        t
    }
}

pub(super) struct GcnForward {
    /// A_hat H_{l-1} per weighted layer (index 0 unused for layer 1).
    spread: Vec<Option<Array2<f64>>>,
    /// pre-activation per layer
    pre: Vec<Array2<f64>>,
    pub output: Array2<f64>,
}

pub(super) fn gcn_forward(params: &GcnParams, adj: &SparseAdj) -> GcnForward {
    let layers = params.weights.len() + 1;
    let mut spread = Vec::with_capacity(layers);
    let mut pre = Vec::with_capacity(layers);
    let mut h = params.lookup.clone();
    for l in 1..=layers {
        let m = if l == 1 {
            spread.push(None);
            adj.matmul(&h)
        } else {
            let s = adj.matmul(&h);
            let m = s.dot(&params.weights[l - 2]);
            spread.push(Some(s));
            m
        };
        h = if l < layers { relu(&m) } else { m.clone() };
        pre.push(m);
    }
    GcnForward {
        spread,
        pre,
        output: h,
    }
}

/// Edge-objective loss and parameter gradients at the current weights.
pub fn gcn_loss_grads(
    params: &GcnParams,
    adj: &SparseAdj,
    adj_t: &SparseAdj,
    batch: &PairBatch,
) -> (f64, Vec<Array2<f64>>) {
    let fwd = gcn_forward(params, adj);
    let (loss, dz) = super::batch_loss_dz(&fwd.output, batch);
    let layers = params.weights.len() + 1;
    let mut d_weights: Vec<Array2<f64>> = params
        .weights
        .iter()
        .map(|w| Array2::zeros(w.raw_dim()))
        .collect();
    let mut dh = dz;
    for l in (1..=layers).rev() {
        let dm = if l == layers {
            dh
        } else {
            let mask = fwd.pre[l - 1].mapv(|x| if x > 0.0 { 1.0 } else { 0.0 });
            dh * mask
        };
        if l >= 2 {
            let s = fwd.spread[l - 1].as_ref().unwrap();
            d_weights[l - 2] = s.t().dot(&dm);
            let ds = dm.dot(&params.weights[l - 2].t());
            dh = adj_t.matmul(&ds);
        } else {
            dh = adj_t.matmul(&dm);
        }
    }
    let mut grads = vec![dh];
    grads.extend(d_weights);
    (loss, grads)
}
