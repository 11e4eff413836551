//! Seeded synthetic graph generators.
//!
//! Three families: preferential attachment (BA), the Erdős–Rényi G(n,p) model,
//! and Holme–Kim powerlaw-cluster growth (BA plus triad-formation steps).
//! Every generator is a pure function of its parameters and seed, so a spec
//! identifies its graph bit-for-bit across runs and machines. A small
//! two-block SBM exists for certification runs that need planted communities.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

use crate::graph::Graph;
use crate::rng::seeded_rng;

#[derive(Debug, Error)]
pub enum GenError {
    #[error("attachment count must satisfy 1 <= m < n, got m={m}, n={n}")]
    BadAttachment { m: usize, n: usize },
    #[error("probability must lie in [0, 1], got {0}")]
    BadProbability(f64),
    #[error("{family} generator requires parameter {param}")]
    MissingParam { family: Family, param: &'static str },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Ba,
    Er,
    Hk,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::Ba => write!(f, "ba"),
            Family::Er => write!(f, "er"),
            Family::Hk => write!(f, "hk"),
        }
    }
}

impl std::str::FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> Result<Family, String> {
        match s {
            "ba" => Ok(Family::Ba),
            "er" => Ok(Family::Er),
            "hk" => Ok(Family::Hk),
            other => Err(format!("unknown graph family {other:?} (expected ba, er, or hk)")),
        }
    }
}

/// Everything needed to regenerate one synthetic graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub family: Family,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    pub seed: u64,
}

impl GeneratorSpec {
    pub fn generate(&self) -> Result<Graph, GenError> {
        match self.family {
            Family::Ba => {
                let m = self.require_m()?;
                generate_ba(self.n, m, self.seed)
            }
            Family::Er => {
                let p = self.require_p()?;
                generate_er(self.n, p, self.seed)
            }
            Family::Hk => {
                let m = self.require_m()?;
                let p = self.require_p()?;
                generate_hk(self.n, m, p, self.seed)
            }
        }
    }

    fn require_m(&self) -> Result<usize, GenError> {
        self.m.ok_or(GenError::MissingParam {
            family: self.family,
            param: "m",
        })
    }

    fn require_p(&self) -> Result<f64, GenError> {
        self.p.ok_or(GenError::MissingParam {
            family: self.family,
            param: "p",
        })
    }

    /// Seed-free name used for dataset identifiers and file stems.
    pub fn label(&self) -> String {
        let mut s = format!("{}_n{}", self.family, self.n);
        if let Some(m) = self.m {
            s.push_str(&format!("_m{m}"));
        }
        if let Some(p) = self.p {
            s.push_str(&format!("_p{p}"));
        }
        s
    }
}

fn check_attachment(n: usize, m: usize) -> Result<(), GenError> {
    if m < 1 || m >= n {
        return Err(GenError::BadAttachment { m, n });
    }
    Ok(())
}

fn check_probability(p: f64) -> Result<(), GenError> {
    if !(0.0..=1.0).contains(&p) || p.is_nan() {
        return Err(GenError::BadProbability(p));
    }
    Ok(())
}

/// One target with probability proportional to degree, rejecting `exclude`.
///
/// `endpoints` holds every edge endpoint seen so far, so uniform sampling
/// from it is exact preferential attachment.
fn preferential_draw(rng: &mut ChaCha8Rng, endpoints: &[u32], exclude: &[u32]) -> u32 {
    loop {
        let x = endpoints[rng.random_range(0..endpoints.len())];
        if !exclude.contains(&x) {
            return x;
        }
    }
}

/// Shared growth loop for BA (triad_p = 0) and HK (triad_p > 0).
///
/// Starts from m isolated nodes with unit attachment weight; the first
/// arrival therefore connects to all m of them. Later arrivals perform m
/// attachment steps each: the first preferential, each following step a
/// triad-formation step with probability triad_p (uniform neighbor of the
/// step before's target, falling back to preferential when no neighbor is
/// eligible), otherwise preferential. With triad_p = 0 the coin is never
/// drawn, so BA and HK(p=0) consume randomness identically and emit the
/// same edge set for the same seed.
fn grow_preferential(n: usize, m: usize, triad_p: f64, seed: u64) -> Graph {
    let mut rng = seeded_rng(seed);
    let mut edges: Vec<(u32, u32)> = Vec::with_capacity(m * (n - m));
    let mut endpoints: Vec<u32> = Vec::with_capacity(2 * m * (n - m));
    let mut adj: Vec<Vec<u32>> = vec![Vec::new(); n];

    let mut round: Vec<u32> = (0..m as u32).collect();
    for source in m as u32..n as u32 {
        if source > m as u32 {
            round.clear();
            let mut prev: Option<u32> = None;
            for step in 0..m {
                let mut target = None;
                if step > 0 && triad_p > 0.0 && rng.random::<f64>() < triad_p {
                    let anchor = prev.unwrap();
                    let cands: Vec<u32> = adj[anchor as usize]
                        .iter()
                        .copied()
                        .filter(|&v| v != source && !round.contains(&v))
                        .collect();
                    if !cands.is_empty() {
                        target = Some(cands[rng.random_range(0..cands.len())]);
                    }
                }
                let t = target.unwrap_or_else(|| preferential_draw(&mut rng, &endpoints, &round));
                round.push(t);
                prev = Some(t);
            }
        }
        for &t in &round {
            edges.push((source, t));
            adj[source as usize].push(t);
            adj[t as usize].push(source);
        }
        endpoints.extend_from_slice(&round);
        endpoints.extend(std::iter::repeat(source).take(m));
    }
    Graph::from_edges(n, &edges)
}

/// Preferential-attachment graph with exactly m(n-m) edges.
pub fn generate_ba(n: usize, m: usize, seed: u64) -> Result<Graph, GenError> {
    check_attachment(n, m)?;
    Ok(grow_preferential(n, m, 0.0, seed))
}

/// G(n, p): every unordered pair is an edge independently with probability p.
///
/// Uses geometric skipping over the pair sequence, so sparse graphs cost
/// O(n + |E|) rather than O(n²) coin flips.
pub fn generate_er(n: usize, p: f64, seed: u64) -> Result<Graph, GenError> {
    check_probability(p)?;
    if p == 0.0 || n < 2 {
        return Ok(Graph::from_edges(n, &[]));
    }
    if p == 1.0 {
        return Ok(Graph::complete(n));
    }
    let mut rng = seeded_rng(seed);
    let mut edges: Vec<(u32, u32)> = Vec::new();
    let lp = (1.0 - p).ln();
    let mut v: i64 = 1;
    let mut w: i64 = -1;
    while v < n as i64 {
        let r: f64 = rng.random();
        // skip a geometric number of absent pairs
        w += 1 + ((1.0 - r).ln() / lp).floor() as i64;
        while w >= v && v < n as i64 {
            w -= v;
            v += 1;
        }
        if v < n as i64 {
            edges.push((w as u32, v as u32));
        }
    }
    Ok(Graph::from_edges(n, &edges))
}

/// Holme–Kim powerlaw-cluster graph with exactly m(n-m) edges.
pub fn generate_hk(n: usize, m: usize, p: f64, seed: u64) -> Result<Graph, GenError> {
    check_attachment(n, m)?;
    check_probability(p)?;
    Ok(grow_preferential(n, m, p, seed))
}

/// Planted-partition graph: pair probability p_in inside a block, p_out across.
///
/// Returns the graph and each node's block id. Blocks occupy contiguous id
/// ranges in the given order.
pub fn generate_sbm(
    block_sizes: &[usize],
    p_in: f64,
    p_out: f64,
    seed: u64,
) -> Result<(Graph, Vec<u32>), GenError> {
    check_probability(p_in)?;
    check_probability(p_out)?;
    let n: usize = block_sizes.iter().sum();
    let mut block = Vec::with_capacity(n);
    for (b, &size) in block_sizes.iter().enumerate() {
        block.extend(std::iter::repeat(b as u32).take(size));
    }
    let mut rng = seeded_rng(seed);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            let prob = if block[u] == block[v] { p_in } else { p_out };
            if rng.random::<f64>() < prob {
                edges.push((u as u32, v as u32));
            }
        }
    }
    Ok((Graph::from_edges(n, &edges), block))
}

/// Power-law exponent estimate for a degree sequence.
///
/// Least-squares slope of the log-log complementary CDF over distinct
/// positive degrees, shifted by one to convert the CCDF exponent to the
/// density exponent (if P(K >= k) ~ k^(1-a) then p(k) ~ k^(-a)). Points
/// supported by fewer than 5 nodes are dropped to keep the ragged extreme
/// tail from dominating the fit. None when fewer than 3 points remain.
pub fn degree_tail_slope(degrees: &[usize]) -> Option<f64> {
    let n = degrees.len();
    if n == 0 {
        return None;
    }
    let max_d = *degrees.iter().max().unwrap();
    if max_d == 0 {
        return None;
    }
    let mut count = vec![0usize; max_d + 1];
    for &d in degrees {
        count[d] += 1;
    }
    // survivors[k] = #nodes with degree >= k
    let mut survivors = vec![0usize; max_d + 2];
    for k in (0..=max_d).rev() {
        survivors[k] = survivors[k + 1] + count[k];
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for k in 1..=max_d {
        if count[k] == 0 || survivors[k] < 5 {
            continue;
        }
        xs.push((k as f64).ln());
        ys.push((survivors[k] as f64 / n as f64).ln());
    }
    if xs.len() < 3 {
        return None;
    }
    let len = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / len;
    let my = ys.iter().sum::<f64>() / len;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(sxy / sxx - 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ba_edge_count_is_exact() {
        for (n, m) in [(10, 1), (50, 3), (200, 5), (10, 9)] {
            let g = generate_ba(n, m, 7).unwrap();
            assert_eq!(g.num_edges(), m * (n - m), "n={n} m={m}");
            assert_eq!(g.num_nodes(), n);
        }
    }

    #[test]
    fn ba_first_arrival_takes_every_seed_node() {
        let g = generate_ba(10, 9, 123).unwrap();
        assert_eq!(g.num_edges(), 9);
        assert_eq!(g.degree(9), 9);
        for u in 0..9 {
            assert!(g.has_edge(9, u));
        }
    }

    #[test]
    fn ba_rejects_bad_m() {
        assert!(matches!(
            generate_ba(5, 0, 1),
            Err(GenError::BadAttachment { .. })
        ));
        assert!(matches!(
            generate_ba(5, 5, 1),
            Err(GenError::BadAttachment { .. })
        ));
    }

    #[test]
    fn generators_are_deterministic() {
        let a = generate_ba(300, 4, 9).unwrap();
        let b = generate_ba(300, 4, 9).unwrap();
        let c = generate_ba(300, 4, 10).unwrap();
        assert_eq!(a.edges(), b.edges());
        assert_ne!(a.edges(), c.edges());

        let a = generate_er(300, 0.05, 9).unwrap();
        let b = generate_er(300, 0.05, 9).unwrap();
        assert_eq!(a.edges(), b.edges());

        let a = generate_hk(300, 4, 0.3, 9).unwrap();
        let b = generate_hk(300, 4, 0.3, 9).unwrap();
        assert_eq!(a.edges(), b.edges());
    }

    #[test]
    fn er_extremes() {
        let empty = generate_er(20, 0.0, 1).unwrap();
        assert_eq!(empty.num_edges(), 0);
        let full = generate_er(8, 1.0, 1).unwrap();
        assert_eq!(full.num_edges(), 28);
    }

    #[test]
    fn er_edge_count_near_expectation() {
        // E = p*C(400,2) = 3990, sd = sqrt(E*(1-p)) ~ 61.6
        let g = generate_er(400, 0.05, 2024).unwrap();
        let expected: f64 = 0.05 * 400.0 * 399.0 / 2.0;
        let sd = (expected * 0.95).sqrt();
        let diff = (g.num_edges() as f64 - expected).abs();
        assert!(diff < 3.0 * sd, "edges {} vs expected {expected}", g.num_edges());
    }

    #[test]
    fn er_rejects_bad_probability() {
        assert!(matches!(
            generate_er(10, 1.5, 1),
            Err(GenError::BadProbability(_))
        ));
        assert!(matches!(
            generate_er(10, -0.1, 1),
            Err(GenError::BadProbability(_))
        ));
    }

    #[test]
    fn hk_without_triads_equals_ba() {
        let ba = generate_ba(400, 3, 55).unwrap();
        let hk = generate_hk(400, 3, 0.0, 55).unwrap();
        assert_eq!(ba.edges(), hk.edges());
    }

    #[test]
    fn hk_edge_count_is_exact() {
        for p in [0.1, 0.5, 0.9] {
            let g = generate_hk(150, 4, p, 3).unwrap();
            assert_eq!(g.num_edges(), 4 * (150 - 4));
        }
    }

    #[test]
    fn hk_triads_close_triangles() {
        // triad steps must create many triangles even in a small graph
        let g = generate_hk(300, 3, 0.9, 17).unwrap();
        let mut triangles = 0usize;
        for &(u, v) in g.edges() {
            let (nu, nv) = (g.neighbors(u), g.neighbors(v));
            let (mut i, mut j) = (0, 0);
            while i < nu.len() && j < nv.len() {
                match nu[i].cmp(&nv[j]) {
                    std::cmp::Ordering::Less => i += 1,
                    std::cmp::Ordering::Greater => j += 1,
                    std::cmp::Ordering::Equal => {
                        triangles += 1;
                        i += 1;
                        j += 1;
                    }
                }
            }
        }
        assert!(triangles / 3 > 100, "only {} triangles", triangles / 3);
    }

    #[test]
    fn sbm_blocks_and_labels() {
        let (g, labels) = generate_sbm(&[100, 100], 0.1, 0.005, 11).unwrap();
        assert_eq!(g.num_nodes(), 200);
        assert_eq!(labels.len(), 200);
        assert!(labels[..100].iter().all(|&b| b == 0));
        assert!(labels[100..].iter().all(|&b| b == 1));
        let intra = g
            .edges()
            .iter()
            .filter(|&&(u, v)| labels[u as usize] == labels[v as usize])
            .count();
        let inter = g.num_edges() - intra;
        // expectations: intra ~ 0.1*2*C(100,2) = 990, inter ~ 0.005*10000 = 50
        assert!(intra > 800, "intra {intra}");
        assert!(inter < 120, "inter {inter}");
        assert!(intra > 5 * inter);
    }

    #[test]
    fn tail_slope_recovers_planted_exponent() {
        // plant survivor counts s(k) = round(20000/k^2) so the empirical CCDF
        // is an exact inverse-square law; the estimate must come out at the
        // corresponding density exponent of -3
        let planted: Vec<usize> = (1..=200usize)
            .map(|k| (20000.0 / (k as f64 * k as f64)).round() as usize)
            .collect();
        let mut degrees = Vec::new();
        for k in 1..200usize {
            let cnt = planted[k - 1] - planted[k];
            degrees.extend(std::iter::repeat(k).take(cnt));
        }
        degrees.extend(std::iter::repeat(200usize).take(planted[199]));
        let slope = degree_tail_slope(&degrees).unwrap();
        assert!((slope + 3.0).abs() < 0.1, "slope {slope}");
    }

    #[test]
    fn tail_slope_of_ba_graph_is_near_cubic() {
        let g = generate_ba(5000, 2, 77).unwrap();
        let slope = degree_tail_slope(&g.degrees()).unwrap();
        assert!((-3.5..=-2.5).contains(&slope), "slope {slope}");
    }

    #[test]
    fn tail_slope_degenerate_inputs() {
        assert_eq!(degree_tail_slope(&[]), None);
        assert_eq!(degree_tail_slope(&[0, 0, 0]), None);
        assert_eq!(degree_tail_slope(&[3; 50]), None);
    }

    #[test]
    fn spec_roundtrip_and_labels() {
        let spec = GeneratorSpec {
            family: Family::Hk,
            n: 5000,
            m: Some(3),
            p: Some(0.09),
            seed: 1,
        };
        assert_eq!(spec.label(), "hk_n5000_m3_p0.09");
        let json = serde_json::to_string(&spec).unwrap();
        let back: GeneratorSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, spec);
        assert_eq!(back.generate().unwrap().num_edges(), 3 * (5000 - 3));

        let missing = GeneratorSpec {
            family: Family::Ba,
            n: 10,
            m: None,
            p: None,
            seed: 1,
        };
        assert!(matches!(
            missing.generate(),
            Err(GenError::MissingParam { param: "m", .. })
        ));
    }
}
