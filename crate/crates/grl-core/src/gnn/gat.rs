//! Attention-weighted aggregation over closed neighborhoods.

use ndarray::{s, Array2};

use super::{relu, GnnConfig, GnnError, PairBatch};
use crate::graph::Graph;
use crate::rng::stream_rng;

const LEAKY_SLOPE: f64 = 0.2;

#[inline]
fn leaky(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        LEAKY_SLOPE * x
    }
}

#[inline]
fn leaky_grad(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        LEAKY_SLOPE
    }
}

/// Neighbor lists with the node itself appended last; attention always
/// includes the self edge and uses full, uncapped rows.
pub fn closed_neighborhoods(g: &Graph) -> Vec<Vec<u32>> {
    (0..g.num_nodes() as u32)
        .map(|u| {
            let mut row = g.neighbors(u).to_vec();
            row.push(u);
            row
        })
        .collect()
}

/// Layer-1 lookup doubles as the per-head projected features; layer 2 is a
/// single attention head over a dense projection.
#[derive(Debug, Clone)]
pub struct GatParams {
    pub lookup: Array2<f64>,
    pub a1_src: Array2<f64>,
    pub a1_dst: Array2<f64>,
    pub w2: Array2<f64>,
    pub a2_src: Array2<f64>,
    pub a2_dst: Array2<f64>,
    pub heads: usize,
}

impl GatParams {
    pub fn init(n: usize, config: &GnnConfig) -> GatParams {
        let heads = config.attention_heads;
        let dh = config.hidden_dim / heads;
        let lookup = super::identity_features(n, config.hidden_dim, config.seed);
        let mut rng = stream_rng(config.seed, 4);
        let attn_init = |rng: &mut rand_chacha::ChaCha8Rng, rows: usize, cols: usize| {
            let a = (6.0 / (cols + 1) as f64).sqrt();
            Array2::from_shape_fn((rows, cols), |_| rand::Rng::random_range(rng, -a..a))
        };
        let a1_src = attn_init(&mut rng, heads, dh);
        let a1_dst = attn_init(&mut rng, heads, dh);
        let w2 = super::glorot(&mut rng, config.hidden_dim, config.dim);
        let a2_src = attn_init(&mut rng, 1, config.dim);
        let a2_dst = attn_init(&mut rng, 1, config.dim);
        GatParams {
            lookup,
            a1_src,
            a1_dst,
            w2,
            a2_src,
            a2_dst,
            heads,
        }
    }

    pub fn tensors(&self) -> Vec<&Array2<f64>> {
        vec![
            &self.lookup,
            &self.a1_src,
            &self.a1_dst,
            &self.w2,
            &self.a2_src,
            &self.a2_dst,
        ]
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Array2<f64>> {
        vec![
            &mut self.lookup,
            &mut self.a1_src,
            &mut self.a1_dst,
            &mut self.w2,
            &mut self.a2_src,
            &mut self.a2_dst,
        ]
    }
}

struct HeadForward {
    out: Array2<f64>,
    /// softmax weights per node, aligned with the neighborhood rows
    attn: Vec<Vec<f64>>,
    /// logits before the leaky rectifier
    raw: Vec<Vec<f64>>,
}

fn head_forward(q: &Array2<f64>, rows: &[Vec<u32>], a_src: &[f64], a_dst: &[f64]) -> HeadForward {
    let n = rows.len();
    let dh = q.ncols();
    let mut out = Array2::zeros((n, dh));
    let mut attn = Vec::with_capacity(n);
    let mut raw = Vec::with_capacity(n);
    let dst_score: Vec<f64> = (0..n)
        .map(|v| {
            q.row(v)
                .iter()
                .zip(a_dst)
                .map(|(qk, ak)| qk * ak)
                .sum::<f64>()
        })
        .collect();
    for u in 0..n {
        let su: f64 = q
            .row(u)
            .iter()
            .zip(a_src)
            .map(|(qk, ak)| qk * ak)
            .sum::<f64>();
        let raw_u: Vec<f64> = rows[u]
            .iter()
            .map(|&v| su + dst_score[v as usize])
            .collect();
        let mut logits: Vec<f64> = raw_u.iter().map(|&x| leaky(x)).collect();
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for l in logits.iter_mut() {
            *l = (*l - max).exp();
            total += *l;
        }
        let alpha: Vec<f64> = logits.iter().map(|&e| e / total).collect();
        {
            let mut row = out.row_mut(u);
            for (&v, &a) in rows[u].iter().zip(&alpha) {
                row.scaled_add(a, &q.row(v as usize));
            }
        }
        attn.push(alpha);
        raw.push(raw_u);
    }
    HeadForward { out, attn, raw }
}

fn head_backward(
    dout: &Array2<f64>,
    q: &Array2<f64>,
    rows: &[Vec<u32>],
    a_src: &[f64],
    a_dst: &[f64],
    fwd: &HeadForward,
) -> (Array2<f64>, Vec<f64>, Vec<f64>) {
    let n = rows.len();
    let dh = q.ncols();
    let mut dq = Array2::zeros((n, dh));
    let mut da_src = vec![0.0f64; dh];
    let mut da_dst = vec![0.0f64; dh];
    for u in 0..n {
        let alpha = &fwd.attn[u];
        let raw = &fwd.raw[u];
        let dout_u = dout.row(u);
        // weighted-sum backward
        let dalpha: Vec<f64> = rows[u]
            .iter()
            .map(|&v| {
                dout_u
                    .iter()
                    .zip(q.row(v as usize))
                    .map(|(d, qk)| d * qk)
                    .sum::<f64>()
            })
            .collect();
        for (&v, &a) in rows[u].iter().zip(alpha) {
            let mut row = dq.row_mut(v as usize);
            row.scaled_add(a, &dout_u);
        }
        // softmax backward
        let s: f64 = alpha.iter().zip(&dalpha).map(|(a, d)| a * d).sum();
        let mut t_sum = 0.0;
        for ((&v, (&a, &da)), &r) in rows[u].iter().zip(alpha.iter().zip(&dalpha)).zip(raw) {
            let t = a * (da - s) * leaky_grad(r);
            t_sum += t;
            for k in 0..dh {
                da_dst[k] += t * q[[v as usize, k]];
            }
            let mut row = dq.row_mut(v as usize);
            for (slot, &ak) in row.iter_mut().zip(a_dst) {
                *slot += t * ak;
            }
        }
        for k in 0..dh {
            da_src[k] += t_sum * q[[u, k]];
        }
        let mut row = dq.row_mut(u);
        for (slot, &ak) in row.iter_mut().zip(a_src) {
            *slot += t_sum * ak;
        }
    }
    (dq, da_src, da_dst)
}

pub(super) struct GatForward {
    heads: Vec<HeadForward>,
    pre1: Array2<f64>,
    h1: Array2<f64>,
    q2: Array2<f64>,
    layer2: HeadForward,
    pub output: Array2<f64>,
}

pub(super) fn gat_forward(params: &GatParams, rows: &[Vec<u32>]) -> GatForward {
    let n = rows.len();
    let hidden = params.lookup.ncols();
    let dh = hidden / params.heads;
    let mut pre1 = Array2::zeros((n, hidden));
    let mut heads = Vec::with_capacity(params.heads);
    for h in 0..params.heads {
        let q = params.lookup.slice(s![.., h * dh..(h + 1) * dh]).to_owned();
        let fwd = head_forward(
            &q,
            rows,
            params.a1_src.row(h).as_slice().unwrap(),
            params.a1_dst.row(h).as_slice().unwrap(),
        );
        pre1.slice_mut(s![.., h * dh..(h + 1) * dh]).assign(&fwd.out);
        heads.push(fwd);
    }
    let h1 = relu(&pre1);
    let q2 = h1.dot(&params.w2);
    let layer2 = head_forward(
        &q2,
        rows,
        params.a2_src.row(0).as_slice().unwrap(),
        params.a2_dst.row(0).as_slice().unwrap(),
    );
    let output = layer2.out.clone();
    GatForward {
        heads,
        pre1,
        h1,
        q2,
        layer2,
        output,
    }
}

/// Edge-objective loss and parameter gradients at the current weights.
pub fn gat_loss_grads(
    params: &GatParams,
    rows: &[Vec<u32>],
    batch: &PairBatch,
) -> (f64, Vec<Array2<f64>>) {
    let fwd = gat_forward(params, rows);
    let (loss, dz) = super::batch_loss_dz(&fwd.output, batch);
    let hidden = params.lookup.ncols();
    let dh = hidden / params.heads;

    let (dq2, da2_src, da2_dst) = head_backward(
        &dz,
        &fwd.q2,
        rows,
        params.a2_src.row(0).as_slice().unwrap(),
        params.a2_dst.row(0).as_slice().unwrap(),
        &fwd.layer2,
    );
    let dw2 = fwd.h1.t().dot(&dq2);
    let dh1 = dq2.dot(&params.w2.t());
    let relu_mask = fwd.pre1.mapv(|x| if x > 0.0 { 1.0 } else { 0.0 });
    let dpre1 = dh1 * relu_mask;

    let n = rows.len();
    let mut dlookup = Array2::zeros((n, hidden));
    let mut da1_src = Array2::zeros((params.heads, dh));
    let mut da1_dst = Array2::zeros((params.heads, dh));
    for h in 0..params.heads {
        let q = params.lookup.slice(s![.., h * dh..(h + 1) * dh]).to_owned();
        let dout = dpre1.slice(s![.., h * dh..(h + 1) * dh]).to_owned();
        let (dq, dsrc, ddst) = head_backward(
            &dout,
            &q,
            rows,
            params.a1_src.row(h).as_slice().unwrap(),
            params.a1_dst.row(h).as_slice().unwrap(),
            &fwd.heads[h],
        );
        dlookup.slice_mut(s![.., h * dh..(h + 1) * dh]).assign(&dq);
        for k in 0..dh {
            da1_src[[h, k]] = dsrc[k];
            da1_dst[[h, k]] = ddst[k];
        }
    }
    let mut da2s = Array2::zeros((1, params.w2.ncols()));
    let mut da2d = Array2::zeros((1, params.w2.ncols()));
    for k in 0..params.w2.ncols() {
        da2s[[0, k]] = da2_src[k];
        da2d[[0, k]] = da2_dst[k];
    }
    (loss, vec![dlookup, da1_src, da1_dst, dw2, da2s, da2d])
}

/// One multi-head attention layer: per head, softmax-normalized leaky-rectified
/// logits over each closed neighborhood weight the projected features, heads
/// concatenate, then a rectifier applies.
pub fn gat_layer(
    h: &Array2<f64>,
    g: &Graph,
    heads: usize,
    w: &Array2<f64>,
    a_src: &Array2<f64>,
    a_dst: &Array2<f64>,
) -> Result<Array2<f64>, GnnError> {
    gat_layer_with_attention(h, g, heads, w, a_src, a_dst).map(|(out, _)| out)
}

/// Same as [`gat_layer`] but also returns attention weights per head per node.
pub fn gat_layer_with_attention(
    h: &Array2<f64>,
    g: &Graph,
    heads: usize,
    w: &Array2<f64>,
    a_src: &Array2<f64>,
    a_dst: &Array2<f64>,
) -> Result<(Array2<f64>, Vec<Vec<Vec<f64>>>), GnnError> {
    if heads == 0 || w.ncols() % heads != 0 {
        return Err(GnnError::ShapeMismatch(format!(
            "output width {} not divisible by {} heads",
            w.ncols(),
            heads
        )));
    }
    if h.nrows() != g.num_nodes() || w.nrows() != h.ncols() {
        return Err(GnnError::ShapeMismatch("feature/weight shapes".into()));
    }
    let dh = w.ncols() / heads;
    if a_src.nrows() != heads || a_src.ncols() != dh || a_dst.nrows() != heads
        || a_dst.ncols() != dh
    {
        return Err(GnnError::ShapeMismatch(
            "attention vectors must be heads x head_dim".into(),
        ));
    }
    let rows = closed_neighborhoods(g);
    let q_full = h.dot(w);
    let mut out = Array2::zeros((g.num_nodes(), w.ncols()));
    let mut attn_all = Vec::with_capacity(heads);
    for head in 0..heads {
        let q = q_full.slice(s![.., head * dh..(head + 1) * dh]).to_owned();
        let fwd = head_forward(
            &q,
            &rows,
            a_src.row(head).as_slice().unwrap(),
            a_dst.row(head).as_slice().unwrap(),
        );
        out.slice_mut(s![.., head * dh..(head + 1) * dh])
            .assign(&fwd.out);
        attn_all.push(fwd.attn);
    }
    Ok((relu(&out), attn_all))
}
