//! Test-side oracles and helpers for the acceptance suite.
//!
//! Every oracle recomputes its quantity from the raw mathematical definition
//! with the simplest possible algorithm and data structures (dense boolean
//! matrices, triple loops, explicit frontiers), so a bug in a production fast
//! path cannot be replicated here by construction.

use std::sync::OnceLock;
use std::time::Instant;

use grl_core::Graph;
use ndarray::Array2;

/// Wallclock origin shared by all criteria; set by whichever test runs first.
pub fn suite_start() -> Instant {
    static START: OnceLock<Instant> = OnceLock::new();
    *START.get_or_init(Instant::now)
}

/// Print one pass/fail line for a criterion, then enforce it.
pub fn report(number: usize, name: &str, pass: bool, detail: &str) {
    let tag = if pass { "PASS" } else { "FAIL" };
    println!("[{tag}] criterion {number:02}: {name} - {detail}");
    assert!(pass, "criterion {number:02} ({name}) failed: {detail}");
}

pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of empty slice");
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

// ---------------------------------------------------------------------------
// brute-force graph metrics
// ---------------------------------------------------------------------------

fn dense_adjacency(g: &Graph) -> Vec<Vec<bool>> {
    let n = g.num_nodes();
    let mut a = vec![vec![false; n]; n];
    for &(u, v) in g.edges() {
        a[u as usize][v as usize] = true;
        a[v as usize][u as usize] = true;
    }
    a
}

/// Per-node triangle membership counts by scanning every node triple.
pub fn brute_triangles(g: &Graph) -> Vec<usize> {
    let n = g.num_nodes();
    let a = dense_adjacency(g);
    let mut t = vec![0usize; n];
    for i in 0..n {
        for j in i + 1..n {
            if !a[i][j] {
                continue;
            }
            for k in j + 1..n {
                if a[i][k] && a[j][k] {
                    t[i] += 1;
                    t[j] += 1;
                    t[k] += 1;
                }
            }
        }
    }
    t
}

/// Local clustering from the triple-loop triangle counts.
pub fn brute_clustering(g: &Graph) -> Vec<f64> {
    let t = brute_triangles(g);
    (0..g.num_nodes())
        .map(|u| {
            let d = g.degree(u as u32);
            if d < 2 {
                0.0
            } else {
                2.0 * t[u] as f64 / (d as f64 * (d as f64 - 1.0))
            }
        })
        .collect()
}

/// Closed triples over connected triples, both counted exactly as integers.
pub fn brute_transitivity(g: &Graph) -> f64 {
    let closed: usize = brute_triangles(g).iter().sum(); // 3 x triangle count
    let wedges: usize = (0..g.num_nodes())
        .map(|u| {
            let d = g.degree(u as u32);
            if d < 2 {
                0
            } else {
                d * (d - 1) / 2
            }
        })
        .sum();
    if wedges == 0 {
        0.0
    } else {
        closed as f64 / wedges as f64
    }
}

/// Component-corrected closeness via layer-by-layer BFS over the dense matrix.
pub fn brute_closeness(g: &Graph) -> Vec<f64> {
    let n = g.num_nodes();
    if n <= 1 {
        return vec![0.0; n];
    }
    let a = dense_adjacency(g);
    (0..n)
        .map(|s| {
            let mut seen = vec![false; n];
            seen[s] = true;
            let mut frontier = vec![s];
            let mut depth = 0usize;
            let mut reachable = 1usize;
            let mut total = 0usize;
            while !frontier.is_empty() {
                depth += 1;
                let mut next = Vec::new();
                for &u in &frontier {
                    for (v, &adj) in a[u].iter().enumerate() {
                        if adj && !seen[v] {
                            seen[v] = true;
                            reachable += 1;
                            total += depth;
                            next.push(v);
                        }
                    }
                }
                frontier = next;
            }
            if reachable <= 1 {
                return 0.0;
            }
            let r = reachable as f64;
            (r - 1.0) * (r - 1.0) / ((n as f64 - 1.0) * total as f64)
        })
        .collect()
}

/// Probability that a positive outranks a negative, ties counted half.
pub fn brute_auc(pos: &[f64], neg: &[f64]) -> f64 {
    let mut score = 0.0;
    for &p in pos {
        for &q in neg {
            if p > q {
                score += 1.0;
            } else if p == q {
                score += 0.5;
            }
        }
    }
    score / (pos.len() * neg.len()) as f64
}

// ---------------------------------------------------------------------------
// multiset collision classification over a 3-symbol one-hot alphabet
// ---------------------------------------------------------------------------

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Exact per-symbol mean as a reduced fraction (numerator, denominator);
/// two multisets share a mean iff these agree symbol-by-symbol.
pub fn reduced_mean(counts: &[usize; 3]) -> [(usize, usize); 3] {
    let total: usize = counts.iter().sum();
    let mut out = [(0usize, 1usize); 3];
    for (slot, &c) in out.iter_mut().zip(counts) {
        if c == 0 {
            *slot = (0, 1);
        } else {
            let g = gcd(c, total);
            *slot = (c / g, total / g);
        }
    }
    out
}

/// Which symbols occur at all; two multisets share a max iff these agree.
pub fn support(counts: &[usize; 3]) -> [bool; 3] {
    [counts[0] > 0, counts[1] > 0, counts[2] > 0]
}

// ---------------------------------------------------------------------------
// central finite differences
// ---------------------------------------------------------------------------

/// Disagreement between an analytic derivative and its finite-difference
/// estimate: relative where either is appreciably nonzero, otherwise exact
/// agreement is anything inside the finite-difference noise floor.
fn fd_disagreement(analytic: f64, fd: f64) -> f64 {
    let denom = analytic.abs().max(fd.abs());
    if denom > 1e-6 {
        (analytic - fd).abs() / denom
    } else if (analytic - fd).abs() <= 1e-8 {
        0.0
    } else {
        1.0
    }
}

/// Largest disagreement across every element of every parameter tensor.
pub fn max_fd_rel_err<P>(
    params: &mut P,
    tensors: impl Fn(&mut P) -> Vec<&mut Array2<f64>>,
    loss: impl Fn(&P) -> f64,
    grads: &[Array2<f64>],
) -> f64 {
    let h = 1e-5;
    let mut worst = 0.0f64;
    for ti in 0..grads.len() {
        let (rows, cols) = grads[ti].dim();
        for r in 0..rows {
            for c in 0..cols {
                {
                    let mut t = tensors(params);
                    t[ti][[r, c]] += h;
                }
                let lp = loss(params);
                {
                    let mut t = tensors(params);
                    t[ti][[r, c]] -= 2.0 * h;
                }
                let lm = loss(params);
                {
                    let mut t = tensors(params);
                    t[ti][[r, c]] += h;
                }
                let fd = (lp - lm) / (2.0 * h);
                worst = worst.max(fd_disagreement(grads[ti][[r, c]], fd));
            }
        }
    }
    worst
}

/// Same check for a flat parameter vector.
pub fn max_fd_rel_err_flat(
    loss: impl Fn(&[f64]) -> f64,
    x: &mut [f64],
    grad: &[f64],
) -> f64 {
    let h = 1e-5;
    let mut worst = 0.0f64;
    for i in 0..x.len() {
        x[i] += h;
        let lp = loss(x);
        x[i] -= 2.0 * h;
        let lm = loss(x);
        x[i] += h;
        let fd = (lp - lm) / (2.0 * h);
        worst = worst.max(fd_disagreement(grad[i], fd));
    }
    worst
}
