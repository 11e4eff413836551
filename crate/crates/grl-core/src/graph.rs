//! Immutable undirected simple graphs in compressed adjacency form.
//!
//! A [`Graph`] is the single source of truth for the adjacency structure:
//! every downstream module (walks, metrics, trainers) reads degrees and
//! neighbor lists from here. Graphs are immutable after construction and can
//! be shared freely across worker threads.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("edge list is empty: {0}")]
    EmptyGraph(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("node id {0} out of range (graph has {1} nodes)")]
    NodeOutOfRange(usize, usize),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Undirected simple graph with contiguous node ids `0..num_nodes`.
///
/// Neighbor lists are stored in one compressed row: `neighbors[offsets[u]..offsets[u+1]]`
/// holds the sorted neighbors of `u`. The canonical edge list keeps each edge
/// once as `(min, max)`.
#[derive(Clone)]
pub struct Graph {
    num_nodes: usize,
    offsets: Vec<usize>,
    neighbors: Vec<u32>,
    edges: Vec<(u32, u32)>,
    labels: Option<Vec<String>>,
}

impl fmt::Debug for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Graph(n={}, m={})", self.num_nodes, self.edges.len())
    }
}

/// What got dropped while reading an edge list.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub self_loops_dropped: usize,
    pub duplicate_edges_dropped: usize,
}

/// Per-node component ids plus component sizes.
///
/// Ids are contiguous from 0 and two nodes share an id iff they are connected.
#[derive(Debug, Clone)]
pub struct ComponentMap {
    pub component_id: Vec<u32>,
    pub component_sizes: Vec<usize>,
}

impl Graph {
    /// Build a graph from an edge list over nodes `0..num_nodes`.
    ///
    /// Self-loops and duplicate edges are dropped silently; use
    /// [`Graph::from_edges_reported`] when the counts matter.
    pub fn from_edges(num_nodes: usize, edges: &[(u32, u32)]) -> Graph {
        Self::from_edges_reported(num_nodes, edges).0
    }

    pub fn from_edges_reported(num_nodes: usize, edges: &[(u32, u32)]) -> (Graph, LoadReport) {
        let mut report = LoadReport::default();
        let mut canon: Vec<(u32, u32)> = Vec::with_capacity(edges.len());
        for &(u, v) in edges {
            assert!(
                (u as usize) < num_nodes && (v as usize) < num_nodes,
                "edge ({u}, {v}) out of range for {num_nodes} nodes"
            );
            if u == v {
                report.self_loops_dropped += 1;
                continue;
            }
            canon.push((u.min(v), u.max(v)));
        }
        canon.sort_unstable();
        let before = canon.len();
        canon.dedup();
        report.duplicate_edges_dropped = before - canon.len();

        let mut degrees = vec![0usize; num_nodes];
        for &(u, v) in &canon {
            degrees[u as usize] += 1;
            degrees[v as usize] += 1;
        }
        let mut offsets = Vec::with_capacity(num_nodes + 1);
        let mut acc = 0usize;
        offsets.push(0);
        for d in &degrees {
            acc += d;
            offsets.push(acc);
        }
        let mut cursor = offsets.clone();
        let mut neighbors = vec![0u32; acc];
        for &(u, v) in &canon {
            neighbors[cursor[u as usize]] = v;
            cursor[u as usize] += 1;
            neighbors[cursor[v as usize]] = u;
            cursor[v as usize] += 1;
        }
        for u in 0..num_nodes {
            neighbors[offsets[u]..offsets[u + 1]].sort_unstable();
        }
        (
            Graph {
                num_nodes,
                offsets,
                neighbors,
                edges: canon,
                labels: None,
            },
            report,
        )
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Canonical edge list: each undirected edge once, as `(min, max)`, sorted.
    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    /// Sorted neighbor list of `u`.
    pub fn neighbors(&self, u: u32) -> &[u32] {
        let u = u as usize;
        &self.neighbors[self.offsets[u]..self.offsets[u + 1]]
    }

    pub fn degree(&self, u: u32) -> usize {
        let u = u as usize;
        self.offsets[u + 1] - self.offsets[u]
    }

    pub fn degrees(&self) -> Vec<usize> {
        (0..self.num_nodes).map(|u| self.degree(u as u32)).collect()
    }

    /// Binary search in the sorted neighbor list.
    pub fn has_edge(&self, u: u32, v: u32) -> bool {
        self.neighbors(u).binary_search(&v).is_ok()
    }

    /// External label of `u` if the graph was loaded from a file, else the
    /// internal id rendered as text.
    pub fn label(&self, u: u32) -> String {
        match &self.labels {
            Some(l) => l[u as usize].clone(),
            None => u.to_string(),
        }
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn set_labels(&mut self, labels: Vec<String>) {
        assert_eq!(labels.len(), self.num_nodes);
        self.labels = Some(labels);
    }

    /// Edge density 2|E| / (N(N-1)); 0 for graphs with fewer than two nodes.
    pub fn density(&self) -> f64 {
        if self.num_nodes < 2 {
            return 0.0;
        }
        2.0 * self.edges.len() as f64 / (self.num_nodes as f64 * (self.num_nodes as f64 - 1.0))
    }

    /// Stable 64-bit fingerprint of the node count and canonical edge set.
    ///
    /// Used to tie walk corpora and embeddings back to the graph they came from.
    pub fn fingerprint(&self) -> u64 {
        // FNV-1a over the canonical edge stream
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |x: u64| {
            for b in x.to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x1000_0000_01b3);
            }
        };
        eat(self.num_nodes as u64);
        for &(u, v) in &self.edges {
            eat(((u as u64) << 32) | v as u64);
        }
        h
    }

    // --- small named graphs used throughout the tests and certification runs ---

    /// Complete graph on `n` nodes.
    pub fn complete(n: usize) -> Graph {
        let mut edges = Vec::new();
        for u in 0..n as u32 {
            for v in (u + 1)..n as u32 {
                edges.push((u, v));
            }
        }
        Graph::from_edges(n, &edges)
    }

    /// Star on `n` nodes: node 0 is the center, nodes `1..n` are leaves.
    pub fn star(n: usize) -> Graph {
        let edges: Vec<(u32, u32)> = (1..n as u32).map(|v| (0, v)).collect();
        Graph::from_edges(n, &edges)
    }

    /// Path 0-1-...-(n-1).
    pub fn path(n: usize) -> Graph {
        let edges: Vec<(u32, u32)> = (1..n as u32).map(|v| (v - 1, v)).collect();
        Graph::from_edges(n, &edges)
    }

    /// Cycle on `n >= 3` nodes.
    pub fn cycle(n: usize) -> Graph {
        assert!(n >= 3);
        let mut edges: Vec<(u32, u32)> = (1..n as u32).map(|v| (v - 1, v)).collect();
        edges.push((0, n as u32 - 1));
        Graph::from_edges(n, &edges)
    }

    /// Disjoint union, second graph's ids shifted past the first.
    pub fn disjoint_union(a: &Graph, b: &Graph) -> Graph {
        let shift = a.num_nodes as u32;
        let mut edges = a.edges.clone();
        edges.extend(b.edges.iter().map(|&(u, v)| (u + shift, v + shift)));
        Graph::from_edges(a.num_nodes + b.num_nodes, &edges)
    }
}

/// Read an edge list: one edge per line, two tokens, `#` lines ignored.
///
/// Node ids may be arbitrary strings; they are remapped to dense internal ids
/// in order of first appearance and the original ids are kept as labels.
/// Extra tokens after the first two are ignored. Passing `None` as the
/// delimiter splits on any whitespace.
pub fn load_edge_list(
    path: impl AsRef<Path>,
    delimiter: Option<char>,
) -> Result<(Graph, LoadReport), GraphError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| GraphError::Io {
        path: path.display().to_string(),
        source,
    })?;
    load_edge_list_str(&text, delimiter)
        .map_err(|e| match e {
            GraphError::EmptyGraph(_) => GraphError::EmptyGraph(path.display().to_string()),
            other => other,
        })
}

/// Same as [`load_edge_list`] but over an in-memory string.
pub fn load_edge_list_str(
    text: &str,
    delimiter: Option<char>,
) -> Result<(Graph, LoadReport), GraphError> {
    let mut ids: HashMap<String, u32> = HashMap::new();
    let mut labels: Vec<String> = Vec::new();
    let mut edges: Vec<(u32, u32)> = Vec::new();

    fn intern(tok: &str, labels: &mut Vec<String>, ids: &mut HashMap<String, u32>) -> u32 {
        if let Some(&id) = ids.get(tok) {
            return id;
        }
        let id = labels.len() as u32;
        labels.push(tok.to_string());
        ids.insert(tok.to_string(), id);
        id
    }

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut toks = match delimiter {
            Some(d) => itersplit(line, d),
            None => line.split_whitespace().map(str::to_string).collect(),
        };
        toks.retain(|t| !t.is_empty());
        if toks.len() < 2 {
            return Err(GraphError::Parse {
                line: lineno + 1,
                message: format!("expected at least 2 tokens, got {}: {line:?}", toks.len()),
            });
        }
        let u = intern(&toks[0], &mut labels, &mut ids);
        let v = intern(&toks[1], &mut labels, &mut ids);
        edges.push((u, v));
    }
    if labels.is_empty() {
        return Err(GraphError::EmptyGraph("no edges in input".to_string()));
    }
    let (mut g, report) = Graph::from_edges_reported(labels.len(), &edges);
    g.set_labels(labels);
    Ok((g, report))
}

fn itersplit(line: &str, d: char) -> Vec<String> {
    line.split(d).map(str::to_string).collect()
}

/// Write the canonical edge list: `min<TAB>max` per line using node labels,
/// lines sorted lexicographically.
pub fn write_edge_list(g: &Graph, path: impl AsRef<Path>) -> Result<(), GraphError> {
    let path = path.as_ref();
    let mut lines: Vec<String> = g
        .edges()
        .iter()
        .map(|&(u, v)| {
            let (a, b) = (g.label(u), g.label(v));
            // numeric ids order numerically so "9" precedes "10"; everything
            // else falls back to string order
            let swap = match (a.parse::<u64>(), b.parse::<u64>()) {
                (Ok(x), Ok(y)) => x > y,
                _ => a > b,
            };
            let (a, b) = if swap { (b, a) } else { (a, b) };
            format!("{a}\t{b}")
        })
        .collect();
    lines.sort_unstable();
    let mut f = fs::File::create(path).map_err(|source| GraphError::Io {
        path: path.display().to_string(),
        source,
    })?;
    for line in &lines {
        writeln!(f, "{line}").map_err(|source| GraphError::Io {
            path: path.display().to_string(),
            source,
        })?;
    }
    Ok(())
}

/// Connected components by BFS; ids contiguous in order of first (lowest) node.
pub fn connected_components(g: &Graph) -> ComponentMap {
    let n = g.num_nodes();
    let mut component_id = vec![u32::MAX; n];
    let mut sizes = Vec::new();
    let mut queue = std::collections::VecDeque::new();
    for start in 0..n as u32 {
        if component_id[start as usize] != u32::MAX {
            continue;
        }
        let cid = sizes.len() as u32;
        let mut size = 0usize;
        component_id[start as usize] = cid;
        queue.push_back(start);
        while let Some(u) = queue.pop_front() {
            size += 1;
            for &v in g.neighbors(u) {
                if component_id[v as usize] == u32::MAX {
                    component_id[v as usize] = cid;
                    queue.push_back(v);
                }
            }
        }
        sizes.push(size);
    }
    ComponentMap {
        component_id,
        component_sizes: sizes,
    }
}

/// Induced subgraph on the largest connected component, ids remapped in
/// ascending original order. Ties are broken by the smallest minimum original
/// id, which is the component discovered first by the BFS sweep.
pub fn largest_connected_component(g: &Graph) -> Graph {
    assert!(g.num_nodes() >= 1, "empty graph has no components");
    let comps = connected_components(g);
    let mut best = 0usize;
    for (cid, &size) in comps.component_sizes.iter().enumerate() {
        if size > comps.component_sizes[best] {
            best = cid;
        }
    }
    let best = best as u32;
    let keep: Vec<u32> = (0..g.num_nodes() as u32)
        .filter(|&u| comps.component_id[u as usize] == best)
        .collect();
    induced_subgraph(g, &keep)
}

/// Induced subgraph on `keep` (ascending, deduplicated), ids remapped to `0..keep.len()`.
pub fn induced_subgraph(g: &Graph, keep: &[u32]) -> Graph {
    let mut remap: HashMap<u32, u32> = HashMap::with_capacity(keep.len());
    for (new, &old) in keep.iter().enumerate() {
        remap.insert(old, new as u32);
    }
    let mut edges = Vec::new();
    for &(u, v) in g.edges() {
        if let (Some(&nu), Some(&nv)) = (remap.get(&u), remap.get(&v)) {
            edges.push((nu, nv));
        }
    }
    let mut sub = Graph::from_edges(keep.len(), &edges);
    if g.labels.is_some() {
        sub.set_labels(keep.iter().map(|&u| g.label(u)).collect());
    }
    sub
}

/// 2-coloring check. Returns true when the graph contains no odd cycle.
pub fn is_bipartite(g: &Graph) -> bool {
    let n = g.num_nodes();
    let mut color = vec![-1i8; n];
    let mut queue = std::collections::VecDeque::new();
    for start in 0..n as u32 {
        if color[start as usize] != -1 {
            continue;
        }
        color[start as usize] = 0;
        queue.push_back(start);
        while let Some(u) = queue.pop_front() {
            for &v in g.neighbors(u) {
                if color[v as usize] == -1 {
                    color[v as usize] = 1 - color[u as usize];
                    queue.push_back(v);
                } else if color[v as usize] == color[u as usize] {
                    return false;
                }
            }
        }
    }
    true
}

pub fn is_connected(g: &Graph) -> bool {
    g.num_nodes() <= 1 || connected_components(g).component_sizes.len() == 1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triangle_from_lines() {
        let (g, rep) = load_edge_list_str("0 1\n1 2\n2 0\n", None).unwrap();
        assert_eq!(g.num_nodes(), 3);
        assert_eq!(g.num_edges(), 3);
        assert_eq!(rep, LoadReport::default());
    }

    #[test]
    fn reversed_duplicate_collapses() {
        let (g, rep) = load_edge_list_str("0 1\n1 0\n", None).unwrap();
        assert_eq!(g.num_edges(), 1);
        assert_eq!(rep.duplicate_edges_dropped, 1);
    }

    #[test]
    fn self_loops_and_comments_dropped() {
        let (g, rep) = load_edge_list_str("# header\na a\na b\n\nb c\n", None).unwrap();
        assert_eq!(g.num_nodes(), 3);
        assert_eq!(g.num_edges(), 2);
        assert_eq!(rep.self_loops_dropped, 1);
    }

    #[test]
    fn malformed_line_names_line_number() {
        let err = load_edge_list_str("0 1\nbroken\n", None).unwrap_err();
        match err {
            GraphError::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(matches!(
            load_edge_list_str("# only comments\n", None),
            Err(GraphError::EmptyGraph(_))
        ));
    }

    #[test]
    fn string_ids_are_remapped_densely() {
        let (g, _) = load_edge_list_str("alpha beta\nbeta gamma\n", None).unwrap();
        assert_eq!(g.num_nodes(), 3);
        assert_eq!(g.label(0), "alpha");
        assert_eq!(g.label(2), "gamma");
    }

    #[test]
    fn delimiter_split() {
        let (g, _) = load_edge_list_str("x,y\ny,z\n", Some(',')).unwrap();
        assert_eq!(g.num_edges(), 2);
    }

    #[test]
    fn degree_examples() {
        let k3 = Graph::complete(3);
        assert!(k3.degrees().iter().all(|&d| d == 2));
        let s5 = Graph::star(5);
        assert_eq!(s5.degree(0), 4);
        assert_eq!(s5.degree(1), 1);
        let p3 = Graph::path(3);
        assert_eq!(p3.degrees(), vec![1, 2, 1]);
    }

    #[test]
    fn degree_sum_is_twice_edges() {
        let g = Graph::from_edges(6, &[(0, 1), (1, 2), (2, 3), (3, 0), (4, 5)]);
        assert_eq!(g.degrees().iter().sum::<usize>(), 2 * g.num_edges());
    }

    #[test]
    fn adjacency_is_symmetric_and_sorted() {
        let g = Graph::from_edges(5, &[(3, 1), (0, 4), (2, 0), (1, 0)]);
        for u in 0..g.num_nodes() as u32 {
            let ns = g.neighbors(u);
            assert!(ns.windows(2).all(|w| w[0] < w[1]));
            for &v in ns {
                assert!(g.has_edge(v, u));
            }
        }
    }

    #[test]
    fn lcc_picks_largest_and_is_idempotent() {
        // two disjoint triangles plus one K4
        let t1 = Graph::complete(3);
        let t2 = Graph::complete(3);
        let k4 = Graph::complete(4);
        let g = Graph::disjoint_union(&Graph::disjoint_union(&t1, &t2), &k4);
        let lcc = largest_connected_component(&g);
        assert_eq!(lcc.num_nodes(), 4);
        assert_eq!(lcc.num_edges(), 6);
        let again = largest_connected_component(&lcc);
        assert_eq!(again.num_nodes(), 4);
        assert_eq!(again.edges(), lcc.edges());
    }

    #[test]
    fn lcc_of_connected_graph_is_identity() {
        let g = Graph::cycle(7);
        let lcc = largest_connected_component(&g);
        assert_eq!(lcc.num_nodes(), 7);
        assert_eq!(lcc.edges(), g.edges());
    }

    #[test]
    fn lcc_tie_breaks_to_smallest_min_id() {
        // two components of equal size; the one containing node 0 wins
        let g = Graph::from_edges(6, &[(0, 1), (1, 2), (3, 4), (4, 5)]);
        let lcc = largest_connected_component(&g);
        assert_eq!(lcc.num_nodes(), 3);
        assert_eq!(lcc.edges(), &[(0, 1), (1, 2)]);
    }

    #[test]
    fn component_map_invariants() {
        let g = Graph::from_edges(7, &[(0, 1), (2, 3), (3, 4), (5, 6)]);
        let cm = connected_components(&g);
        assert_eq!(cm.component_sizes.iter().sum::<usize>(), 7);
        assert_eq!(cm.component_sizes.len(), 3);
        for (u, &cu) in cm.component_id.iter().enumerate() {
            assert!((cu as usize) < cm.component_sizes.len());
            let _ = u;
        }
    }

    #[test]
    fn bipartite_detection() {
        assert!(is_bipartite(&Graph::path(5)));
        assert!(is_bipartite(&Graph::cycle(4)));
        assert!(!is_bipartite(&Graph::cycle(5)));
        assert!(!is_bipartite(&Graph::complete(3)));
    }

    #[test]
    fn roundtrip_preserves_canonical_edge_set() {
        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("a.edges");
        let p2 = dir.path().join("b.edges");
        let (g, _) = load_edge_list_str("n5 n2\nn2 n9\nn9 n5\nn1 n5\n", None).unwrap();
        write_edge_list(&g, &p1).unwrap();
        let (g2, _) = load_edge_list(&p1, None).unwrap();
        write_edge_list(&g2, &p2).unwrap();
        assert_eq!(fs::read_to_string(&p1).unwrap(), fs::read_to_string(&p2).unwrap());
        assert_eq!(g.num_nodes(), g2.num_nodes());
        assert_eq!(g.num_edges(), g2.num_edges());
    }

    #[test]
    fn fingerprint_tracks_edge_set() {
        let a = Graph::from_edges(4, &[(0, 1), (2, 3)]);
        let b = Graph::from_edges(4, &[(1, 0), (3, 2)]);
        let c = Graph::from_edges(4, &[(0, 1), (1, 3)]);
        assert_eq!(a.fingerprint(), b.fingerprint());
        assert_ne!(a.fingerprint(), c.fingerprint());
    }
}
