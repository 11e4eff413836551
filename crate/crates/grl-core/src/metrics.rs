//! Node-level and graph-level topological properties.
//!
//! These are the prediction targets of the probing harness: degree, mean
//! neighbor degree, triangle participation, local clustering, closeness, and
//! a Louvain community label, plus the graph-level descriptors (transitivity,
//! density, average clustering, modularity) used to characterize datasets.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::VecDeque;
use std::fs;
use std::io::Write as _;
use std::path::Path;
use thiserror::Error;

use crate::graph::Graph;
use crate::rng::stream_rng;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("graph has no edges: modularity is undefined")]
    EmptyEdgeSet,
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Mean degree over each node's neighbors; 0 for isolated nodes.
pub fn avg_neighbor_degree(g: &Graph) -> Vec<f64> {
    (0..g.num_nodes() as u32)
        .map(|u| {
            let ns = g.neighbors(u);
            if ns.is_empty() {
                return 0.0;
            }
            ns.iter().map(|&v| g.degree(v) as f64).sum::<f64>() / ns.len() as f64
        })
        .collect()
}

/// Closed triads through each node, by sorted-neighbor-list intersection.
///
/// Each triangle increments all three of its corners exactly once, so the
/// column sums to three times the triangle total.
pub fn triangle_counts(g: &Graph) -> Vec<usize> {
    let mut t = vec![0usize; g.num_nodes()];
    for &(u, v) in g.edges() {
        let (nu, nv) = (g.neighbors(u), g.neighbors(v));
        let (mut i, mut j) = (0, 0);
        while i < nu.len() && j < nv.len() {
            match nu[i].cmp(&nv[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    t[nu[i] as usize] += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
    }
    t
}

/// Local clustering 2T(u)/(d(u)(d(u)-1)), zero below degree 2.
pub fn clustering_coefficients(g: &Graph) -> Vec<f64> {
    triangle_counts(g)
        .iter()
        .enumerate()
        .map(|(u, &t)| {
            let d = g.degree(u as u32);
            if d < 2 {
                0.0
            } else {
                2.0 * t as f64 / (d as f64 * (d as f64 - 1.0))
            }
        })
        .collect()
}

/// Global triangle closure: 3 x triangles / connected triples.
pub fn transitivity(g: &Graph) -> f64 {
    let triangle_sum: usize = triangle_counts(g).iter().sum();
    let triples: usize = (0..g.num_nodes() as u32)
        .map(|u| {
            let d = g.degree(u);
            d * d.saturating_sub(1) / 2
        })
        .sum();
    if triples == 0 {
        0.0
    } else {
        triangle_sum as f64 / triples as f64
    }
}

pub fn avg_clustering(g: &Graph) -> f64 {
    let cc = clustering_coefficients(g);
    if cc.is_empty() {
        0.0
    } else {
        cc.iter().sum::<f64>() / cc.len() as f64
    }
}

/// Component-corrected closeness: (r-1)^2 / ((N-1) * sum of distances), with
/// r the number of reachable nodes. Isolated nodes score 0.
pub fn closeness_centrality(g: &Graph) -> Vec<f64> {
    let n = g.num_nodes();
    if n <= 1 {
        return vec![0.0; n];
    }
    (0..n as u32)
        .into_par_iter()
        .map(|source| {
            let mut dist = vec![usize::MAX; n];
            dist[source as usize] = 0;
            let mut queue = VecDeque::new();
            queue.push_back(source);
            let mut reachable = 1usize;
            let mut total = 0usize;
            while let Some(u) = queue.pop_front() {
                for &v in g.neighbors(u) {
                    if dist[v as usize] == usize::MAX {
                        dist[v as usize] = dist[u as usize] + 1;
                        reachable += 1;
                        total += dist[v as usize];
                        queue.push_back(v);
                    }
                }
            }
            if reachable <= 1 {
                return 0.0;
            }
            let r = reachable as f64;
            (r - 1.0) * (r - 1.0) / ((n as f64 - 1.0) * total as f64)
        })
        .collect()
}

/// Newman modularity of an arbitrary labeling. 0 on edgeless graphs.
pub fn modularity(g: &Graph, partition: &[u32]) -> f64 {
    assert_eq!(partition.len(), g.num_nodes());
    let m = g.num_edges() as f64;
    if m == 0.0 {
        return 0.0;
    }
    let num_coms = partition.iter().map(|&c| c as usize + 1).max().unwrap_or(0);
    let mut internal = vec![0.0f64; num_coms];
    let mut volume = vec![0.0f64; num_coms];
    for &(u, v) in g.edges() {
        if partition[u as usize] == partition[v as usize] {
            internal[partition[u as usize] as usize] += 1.0;
        }
    }
    for u in 0..g.num_nodes() {
        volume[partition[u] as usize] += g.degree(u as u32) as f64;
    }
    (0..num_coms)
        .map(|c| internal[c] / m - (volume[c] / (2.0 * m)).powi(2))
        .sum()
}

/// Weighted multigraph the contraction phases run on.
struct WGraph {
    n: usize,
    adj: Vec<Vec<(u32, f64)>>,
    self_loop: Vec<f64>,
    k: Vec<f64>,
    m2: f64,
}

impl WGraph {
    fn from_graph(g: &Graph) -> WGraph {
        let n = g.num_nodes();
        let mut adj = vec![Vec::new(); n];
        for &(u, v) in g.edges() {
            adj[u as usize].push((v, 1.0));
            adj[v as usize].push((u, 1.0));
        }
        let k: Vec<f64> = adj.iter().map(|ns| ns.iter().map(|&(_, w)| w).sum()).collect();
        let m2 = k.iter().sum();
        WGraph {
            n,
            adj,
            self_loop: vec![0.0; n],
            k,
            m2,
        }
    }

    /// Collapse communities into single nodes, keeping edge mass.
    fn contract(&self, node_to_com: &[u32], num_coms: usize) -> WGraph {
        let mut self_loop = vec![0.0f64; num_coms];
        let mut pair_weight: std::collections::BTreeMap<(u32, u32), f64> =
            std::collections::BTreeMap::new();
        for u in 0..self.n {
            let cu = node_to_com[u];
            self_loop[cu as usize] += self.self_loop[u];
            for &(v, w) in &self.adj[u] {
                let cv = node_to_com[v as usize];
                if cu == cv {
                    // each internal edge visited from both ends
                    self_loop[cu as usize] += w / 2.0;
                } else if cu < cv {
                    *pair_weight.entry((cu, cv)).or_insert(0.0) += w;
                }
            }
        }
        let mut adj = vec![Vec::new(); num_coms];
        for (&(c, d), &w) in &pair_weight {
            adj[c as usize].push((d, w));
            adj[d as usize].push((c, w));
        }
        let k: Vec<f64> = (0..num_coms)
            .map(|c| adj[c].iter().map(|&(_, w)| w).sum::<f64>() + 2.0 * self_loop[c])
            .collect();
        WGraph {
            n: num_coms,
            adj,
            self_loop,
            k,
            m2: self.m2,
        }
    }
}

/// One local-move phase. Returns the node-to-community map (contiguous ids)
/// and whether any node moved.
fn louvain_level(wg: &WGraph, rng: &mut rand_chacha::ChaCha8Rng) -> (Vec<u32>, usize, bool) {
    let n = wg.n;
    let mut node_to_com: Vec<u32> = (0..n as u32).collect();
    let mut com_tot: Vec<f64> = wg.k.clone();
    let mut order: Vec<u32> = (0..n as u32).collect();
    order.shuffle(rng);

    let mut improved = false;
    // neighbor-community weights, indexed by community with a touched list
    let mut s_u = vec![0.0f64; n];
    let mut touched: Vec<u32> = Vec::new();
    for _pass in 0..100 {
        let mut moved = false;
        for &u in &order {
            let a = node_to_com[u as usize];
            touched.clear();
            for &(v, w) in &wg.adj[u as usize] {
                let c = node_to_com[v as usize];
                if s_u[c as usize] == 0.0 {
                    touched.push(c);
                }
                s_u[c as usize] += w;
            }
            com_tot[a as usize] -= wg.k[u as usize];
            // score(c) = S_u(c) - k_u * com_tot[c] / m2; the modularity gain of
            // moving u into c is (score(c) - score(a)) * 2/m2
            let base = s_u[a as usize] - wg.k[u as usize] * com_tot[a as usize] / wg.m2;
            touched.sort_unstable();
            let mut best = a;
            let mut best_score = base;
            for &c in &touched {
                if c == a {
                    continue;
                }
                let score = s_u[c as usize] - wg.k[u as usize] * com_tot[c as usize] / wg.m2;
                if score > best_score + 1e-12 {
                    best = c;
                    best_score = score;
                }
            }
            com_tot[best as usize] += wg.k[u as usize];
            if best != a {
                node_to_com[u as usize] = best;
                moved = true;
                improved = true;
            }
            for &c in &touched {
                s_u[c as usize] = 0.0;
            }
        }
        if !moved {
            break;
        }
    }

    // relabel to contiguous ids in order of first appearance
    let mut relabel = vec![u32::MAX; n];
    let mut next = 0u32;
    for c in node_to_com.iter_mut() {
        if relabel[*c as usize] == u32::MAX {
            relabel[*c as usize] = next;
            next += 1;
        }
        *c = relabel[*c as usize];
    }
    (node_to_com, next as usize, improved)
}

/// Louvain community detection at resolution 1.
///
/// Local moves sweep a per-level shuffled node order and accept only strict
/// modularity gains (ties keep the current community), then communities are
/// contracted; levels repeat until the modularity of the induced partition on
/// the original graph improves by less than 1e-7. Fixed seed, fixed result.
pub fn louvain_communities(g: &Graph, seed: u64) -> Result<(Vec<u32>, f64), MetricsError> {
    if g.num_edges() == 0 {
        return Err(MetricsError::EmptyEdgeSet);
    }
    let mut assignment: Vec<u32> = (0..g.num_nodes() as u32).collect();
    let mut wg = WGraph::from_graph(g);
    let mut q = modularity(g, &assignment);
    for level in 0.. {
        let mut rng = stream_rng(seed, level);
        let (node_to_com, num_coms, improved) = louvain_level(&wg, &mut rng);
        if !improved {
            break;
        }
        let candidate: Vec<u32> = assignment
            .iter()
            .map(|&c| node_to_com[c as usize])
            .collect();
        let q_new = modularity(g, &candidate);
        if q_new - q < 1e-7 {
            break;
        }
        assignment = candidate;
        q = q_new;
        wg = wg.contract(&node_to_com, num_coms);
    }
    // assignment ids are contiguous per level, but make the guarantee local
    let mut relabel = std::collections::HashMap::new();
    let mut next = 0u32;
    for c in assignment.iter_mut() {
        let id = *relabel.entry(*c).or_insert_with(|| {
            let id = next;
            next += 1;
            id
        });
        *c = id;
    }
    let q = modularity(g, &assignment);
    Ok((assignment, q))
}

/// Per-node property columns plus graph-level descriptors.
#[derive(Debug, Clone)]
pub struct PropertyTable {
    pub degree: Vec<usize>,
    pub avg_neighbor_degree: Vec<f64>,
    pub triangles: Vec<usize>,
    pub clustering: Vec<f64>,
    pub closeness: Vec<f64>,
    pub community: Vec<u32>,
    pub transitivity: f64,
    pub density: f64,
    pub avg_clustering: f64,
    pub modularity: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GraphStats {
    pub nodes: usize,
    pub edges: usize,
    pub transitivity: f64,
    pub density: f64,
    pub avg_clustering: f64,
    pub modularity: f64,
    pub communities: usize,
}

impl PropertyTable {
    pub fn num_nodes(&self) -> usize {
        self.degree.len()
    }

    pub fn num_communities(&self) -> usize {
        self.community.iter().map(|&c| c as usize + 1).max().unwrap_or(0)
    }

    pub fn graph_stats(&self, g: &Graph) -> GraphStats {
        GraphStats {
            nodes: g.num_nodes(),
            edges: g.num_edges(),
            transitivity: self.transitivity,
            density: self.density,
            avg_clustering: self.avg_clustering,
            modularity: self.modularity,
            communities: self.num_communities(),
        }
    }
}

/// Compute every property column in one pass over the graph.
pub fn compute_properties(g: &Graph, seed: u64) -> Result<PropertyTable, MetricsError> {
    let (community, q) = louvain_communities(g, seed)?;
    let clustering = clustering_coefficients(g);
    let avg_cc = if clustering.is_empty() {
        0.0
    } else {
        clustering.iter().sum::<f64>() / clustering.len() as f64
    };
    Ok(PropertyTable {
        degree: g.degrees(),
        avg_neighbor_degree: avg_neighbor_degree(g),
        triangles: triangle_counts(g),
        clustering,
        closeness: closeness_centrality(g),
        community,
        transitivity: transitivity(g),
        density: g.density(),
        avg_clustering: avg_cc,
        modularity: q,
    })
}

/// One row per node: node_id, degree, avg_neighbor_degree, triangles,
/// clustering_coefficient, closeness, community.
pub fn write_property_csv(
    table: &PropertyTable,
    g: &Graph,
    path: impl AsRef<Path>,
) -> Result<(), MetricsError> {
    let path = path.as_ref();
    let io_err = |source| MetricsError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut f = std::io::BufWriter::new(fs::File::create(path).map_err(io_err)?);
    writeln!(
        f,
        "node_id,degree,avg_neighbor_degree,triangles,clustering_coefficient,closeness,community"
    )
    .map_err(io_err)?;
    for u in 0..table.num_nodes() {
        writeln!(
            f,
            "{},{},{},{},{},{},{}",
            g.label(u as u32),
            table.degree[u],
            table.avg_neighbor_degree[u],
            table.triangles[u],
            table.clustering[u],
            table.closeness[u],
            table.community[u],
        )
        .map_err(io_err)?;
    }
    f.flush().map_err(io_err)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Triangle 0-1-2 with pendant node 3 hanging off node 2.
    fn paw() -> Graph {
        Graph::from_edges(4, &[(0, 1), (1, 2), (2, 0), (2, 3)])
    }

    #[test]
    fn neighbor_degree_examples() {
        assert_eq!(avg_neighbor_degree(&Graph::complete(3)), vec![2.0; 3]);
        let s5 = avg_neighbor_degree(&Graph::star(5));
        assert_eq!(s5[0], 1.0);
        assert_eq!(s5[1], 4.0);
        assert_eq!(avg_neighbor_degree(&Graph::path(3)), vec![2.0, 1.0, 2.0]);
    }

    #[test]
    fn triangle_count_examples() {
        assert_eq!(triangle_counts(&Graph::complete(4)), vec![3; 4]);
        assert_eq!(triangle_counts(&Graph::star(6)), vec![0; 6]);
        // K5 minus the 0-1 edge
        let mut edges = Vec::new();
        for u in 0..5u32 {
            for v in (u + 1)..5 {
                if (u, v) != (0, 1) {
                    edges.push((u, v));
                }
            }
        }
        let g = Graph::from_edges(5, &edges);
        let t = triangle_counts(&g);
        assert_eq!(t[0], 3);
        assert_eq!(t[1], 3);
        assert_eq!(&t[2..], &[5, 5, 5]);
    }

    #[test]
    fn triangle_sum_is_three_per_triangle() {
        let g = generate_test_graph();
        let brute = brute_force_triangles(&g);
        assert_eq!(triangle_counts(&g).iter().sum::<usize>(), 3 * brute);
    }

    fn generate_test_graph() -> Graph {
        crate::generate::generate_er(40, 0.15, 5).unwrap()
    }

    fn brute_force_triangles(g: &Graph) -> usize {
        let n = g.num_nodes() as u32;
        let mut count = 0;
        for u in 0..n {
            for v in (u + 1)..n {
                for w in (v + 1)..n {
                    if g.has_edge(u, v) && g.has_edge(v, w) && g.has_edge(u, w) {
                        count += 1;
                    }
                }
            }
        }
        count
    }

    #[test]
    fn clustering_and_transitivity_examples() {
        let tri = Graph::complete(3);
        assert_eq!(clustering_coefficients(&tri), vec![1.0; 3]);
        assert_eq!(transitivity(&tri), 1.0);
        let star = Graph::star(5);
        assert_eq!(clustering_coefficients(&star), vec![0.0; 5]);
        assert_eq!(transitivity(&star), 0.0);
        let paw = paw();
        let cc = clustering_coefficients(&paw);
        assert!((cc[2] - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(cc[3], 0.0);
        assert!((transitivity(&paw) - 0.6).abs() < 1e-15);
    }

    #[test]
    fn closeness_examples() {
        assert_eq!(closeness_centrality(&Graph::complete(3)), vec![1.0; 3]);
        let s5 = closeness_centrality(&Graph::star(5));
        assert_eq!(s5[0], 1.0);
        assert!((s5[1] - 4.0 / 7.0).abs() < 1e-15);
        let two_k2 = Graph::from_edges(4, &[(0, 1), (2, 3)]);
        for &c in &closeness_centrality(&two_k2) {
            assert!((c - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn closeness_is_one_only_when_complete() {
        let cyc = closeness_centrality(&Graph::cycle(6));
        for &c in &cyc {
            assert!(c > 0.0 && c < 1.0);
        }
        let k6 = closeness_centrality(&Graph::complete(6));
        assert!(k6.iter().all(|&c| c == 1.0));
    }

    #[test]
    fn modularity_examples() {
        let g = Graph::complete(6);
        assert_eq!(modularity(&g, &vec![0; 6]), 0.0);
        let two_k5 = Graph::disjoint_union(&Graph::complete(5), &Graph::complete(5));
        let split: Vec<u32> = (0..10).map(|u| (u >= 5) as u32).collect();
        assert!((modularity(&two_k5, &split) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn random_labels_score_near_zero() {
        use rand::seq::SliceRandom;
        let g = crate::generate::generate_er(100, 0.1, 3).unwrap();
        let mut rng = crate::rng::seeded_rng(17);
        let mut qs: Vec<f64> = (0..20)
            .map(|_| {
                let mut labels: Vec<u32> = (0..100).map(|u| u % 4).collect();
                labels.shuffle(&mut rng);
                modularity(&g, &labels).abs()
            })
            .collect();
        qs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = (qs[9] + qs[10]) / 2.0;
        assert!(median < 0.1, "median |Q| = {median}");
    }

    #[test]
    fn louvain_splits_disjoint_cliques() {
        let two_k5 = Graph::disjoint_union(&Graph::complete(5), &Graph::complete(5));
        let (part, q) = louvain_communities(&two_k5, 7).unwrap();
        let num = part.iter().map(|&c| c + 1).max().unwrap();
        assert_eq!(num, 2);
        assert!((q - 0.5).abs() < 1e-12);
        assert!(part[..5].iter().all(|&c| c == part[0]));
        assert!(part[5..].iter().all(|&c| c == part[5]));
        assert!((q - modularity(&two_k5, &part)).abs() < 1e-12);
    }

    #[test]
    fn louvain_keeps_clique_whole() {
        let (part, _) = louvain_communities(&Graph::complete(6), 7).unwrap();
        assert!(part.iter().all(|&c| c == 0));
    }

    #[test]
    fn louvain_refuses_edgeless_graph() {
        let g = Graph::from_edges(4, &[]);
        assert!(matches!(
            louvain_communities(&g, 1),
            Err(MetricsError::EmptyEdgeSet)
        ));
    }

    #[test]
    fn louvain_is_deterministic_and_beats_trivial_partitions() {
        let g = crate::generate::generate_hk(120, 3, 0.5, 21).unwrap();
        let (part_a, q) = louvain_communities(&g, 42).unwrap();
        let (part_b, _) = louvain_communities(&g, 42).unwrap();
        assert_eq!(part_a, part_b);
        let singletons: Vec<u32> = (0..g.num_nodes() as u32).collect();
        assert!(q >= modularity(&g, &singletons));
        assert!(q >= modularity(&g, &vec![0; g.num_nodes()]));
        // ids contiguous from zero
        let num = part_a.iter().map(|&c| c as usize + 1).max().unwrap();
        let mut seen = vec![false; num];
        for &c in &part_a {
            seen[c as usize] = true;
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn louvain_recovers_planted_blocks() {
        let (g, blocks) = crate::generate::generate_sbm(&[50, 50], 0.3, 0.01, 5).unwrap();
        let (part, q) = louvain_communities(&g, 9).unwrap();
        assert!(q > 0.3, "modularity {q}");
        // partition must refine the planted split nearly perfectly: count the
        // majority community in each block and require few dissenters
        for b in 0..2u32 {
            let members: Vec<u32> = (0..100)
                .filter(|&u| blocks[u as usize] == b)
                .map(|u| part[u as usize])
                .collect();
            let mut counts = std::collections::HashMap::new();
            for &c in &members {
                *counts.entry(c).or_insert(0usize) += 1;
            }
            let majority = counts.values().max().unwrap();
            assert!(*majority >= 45, "block {b} majority {majority}");
        }
    }

    #[test]
    fn property_table_and_csv() {
        let g = paw();
        let table = compute_properties(&g, 3).unwrap();
        assert_eq!(table.degree, vec![2, 2, 3, 1]);
        assert!((table.transitivity - 0.6).abs() < 1e-15);
        assert!((table.density - 4.0 / 6.0).abs() < 1e-15);
        let stats = table.graph_stats(&g);
        assert_eq!(stats.nodes, 4);
        assert_eq!(stats.edges, 4);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("props.csv");
        write_property_csv(&table, &g, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "node_id,degree,avg_neighbor_degree,triangles,clustering_coefficient,closeness,community"
        );
        assert_eq!(lines.count(), 4);
    }
}
