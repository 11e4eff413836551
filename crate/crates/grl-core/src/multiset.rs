//! Constructive counterexamples for non-injective neighborhood aggregators.
//!
//! Mean aggregation cannot tell a multiset from one holding k copies of every
//! element; max aggregation cannot tell two multisets with the same underlying
//! set apart. This module builds those witness pairs, measures how often real
//! neighborhoods collide under each aggregator, and audits the collision
//! predicates exhaustively on small alphabets.

use std::collections::BTreeSet;
use thiserror::Error;

use crate::graph::Graph;

#[derive(Debug, Error)]
pub enum MultisetError {
    #[error("multiset must be nonempty")]
    Empty,
    #[error("copy count must be at least 2, got {0}")]
    CopyCountTooSmall(usize),
    #[error("multiplicity at index {0} is zero")]
    ZeroMultiplicity(usize),
    #[error("expected {expected} multiplicities, got {got}")]
    MultiplicityMismatch { expected: usize, got: usize },
}

/// A bag of real vectors; order carries no meaning.
#[derive(Debug, Clone, PartialEq)]
pub struct Multiset {
    pub elements: Vec<Vec<f64>>,
}

impl Multiset {
    pub fn new(elements: Vec<Vec<f64>>) -> Multiset {
        Multiset { elements }
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Canonical form: elements sorted lexicographically. Two multisets are
    /// equal as bags iff their canonical forms are equal as lists.
    pub fn canonical(&self) -> Vec<Vec<f64>> {
        let mut sorted = self.elements.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        sorted
    }

    pub fn same_bag(&self, other: &Multiset) -> bool {
        self.len() == other.len() && self.canonical() == other.canonical()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Aggregator {
    Mean,
    Max,
    Sum,
}

impl Aggregator {
    pub const ALL: [Aggregator; 3] = [Aggregator::Mean, Aggregator::Max, Aggregator::Sum];

    pub fn name(&self) -> &'static str {
        match self {
            Aggregator::Mean => "mean",
            Aggregator::Max => "max",
            Aggregator::Sum => "sum",
        }
    }

    /// Element-wise aggregation of a nonempty multiset.
    pub fn apply(&self, x: &Multiset) -> Vec<f64> {
        assert!(!x.is_empty(), "cannot aggregate an empty multiset");
        let dim = x.elements[0].len();
        match self {
            Aggregator::Mean => {
                let mut out = vec![0.0; dim];
                for e in &x.elements {
                    for (o, v) in out.iter_mut().zip(e) {
                        *o += v;
                    }
                }
                let n = x.len() as f64;
                out.iter_mut().for_each(|o| *o /= n);
                out
            }
            Aggregator::Max => {
                let mut out = vec![f64::NEG_INFINITY; dim];
                for e in &x.elements {
                    for (o, v) in out.iter_mut().zip(e) {
                        *o = o.max(*v);
                    }
                }
                out
            }
            Aggregator::Sum => {
                let mut out = vec![0.0; dim];
                for e in &x.elements {
                    for (o, v) in out.iter_mut().zip(e) {
                        *o += v;
                    }
                }
                out
            }
        }
    }
}

pub const COLLISION_TOLERANCE: f64 = 1e-12;

pub fn vectors_collide(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= COLLISION_TOLERANCE)
}

/// X2 = k copies of every element of X1. Same underlying set, same mean under
/// any element-wise map, but a different multiset whenever k >= 2.
pub fn mean_collision_witness(x1: &Multiset, k: usize) -> Result<Multiset, MultisetError> {
    if x1.is_empty() {
        return Err(MultisetError::Empty);
    }
    if k < 2 {
        return Err(MultisetError::CopyCountTooSmall(k));
    }
    let mut elements = Vec::with_capacity(x1.len() * k);
    for e in &x1.elements {
        for _ in 0..k {
            elements.push(e.clone());
        }
    }
    Ok(Multiset::new(elements))
}

/// X2 repeats element i of X1 `multiplicities[i]` times. Same underlying set,
/// so the element-wise max is unchanged.
pub fn max_collision_witness(
    x1: &Multiset,
    multiplicities: &[usize],
) -> Result<Multiset, MultisetError> {
    if x1.is_empty() {
        return Err(MultisetError::Empty);
    }
    if multiplicities.len() != x1.len() {
        return Err(MultisetError::MultiplicityMismatch {
            expected: x1.len(),
            got: multiplicities.len(),
        });
    }
    if let Some(i) = multiplicities.iter().position(|&m| m == 0) {
        return Err(MultisetError::ZeroMultiplicity(i));
    }
    let mut elements = Vec::new();
    for (e, &m) in x1.elements.iter().zip(multiplicities) {
        for _ in 0..m {
            elements.push(e.clone());
        }
    }
    Ok(Multiset::new(elements))
}

/// Fraction of unordered node pairs whose neighborhood feature multisets
/// differ yet aggregate to the same vector. Pairs where either neighborhood
/// is empty, or where the multisets are equal, are excluded.
pub fn neighborhood_collision_rate(
    g: &Graph,
    features: &[Vec<f64>],
    aggregator: Aggregator,
) -> f64 {
    assert_eq!(features.len(), g.num_nodes());
    let n = g.num_nodes() as u32;
    let sets: Vec<Option<(Vec<Vec<f64>>, Vec<f64>)>> = (0..n)
        .map(|u| {
            let ns = g.neighbors(u);
            if ns.is_empty() {
                return None;
            }
            let ms = Multiset::new(ns.iter().map(|&v| features[v as usize].clone()).collect());
            let agg = aggregator.apply(&ms);
            Some((ms.canonical(), agg))
        })
        .collect();
    let mut differing = 0usize;
    let mut collisions = 0usize;
    for u in 0..n as usize {
        let Some((cu, au)) = &sets[u] else { continue };
        for (cv, av) in sets[u + 1..].iter().flatten() {
            if cu == cv {
                continue;
            }
            differing += 1;
            if vectors_collide(au, av) {
                collisions += 1;
            }
        }
    }
    if differing == 0 {
        0.0
    } else {
        collisions as f64 / differing as f64
    }
}

/// Node features for the collision report: the raw degree as a 1-vector, or a
/// one-hot encoding of the degree.
pub fn degree_features(g: &Graph, onehot: bool) -> Vec<Vec<f64>> {
    let degrees = g.degrees();
    if !onehot {
        return degrees.iter().map(|&d| vec![d as f64]).collect();
    }
    let max_d = degrees.iter().copied().max().unwrap_or(0);
    degrees
        .iter()
        .map(|&d| {
            let mut v = vec![0.0; max_d + 1];
            v[d] = 1.0;
            v
        })
        .collect()
}

/// Result of the exhaustive small-alphabet audit.
#[derive(Debug, Clone, Default)]
pub struct CollisionAudit {
    pub pairs_checked: usize,
    pub mean_mismatches: usize,
    pub max_mismatches: usize,
    pub sum_mismatches: usize,
}

impl CollisionAudit {
    pub fn is_clean(&self) -> bool {
        self.mean_mismatches == 0 && self.max_mismatches == 0 && self.sum_mismatches == 0
    }
}

/// Enumerate every multiset of size 1..=max_size over a 3-symbol one-hot
/// alphabet and compare, for every distinct pair, the observed aggregator
/// collisions against the predicted ones:
///
///   mean collides iff the multiplicity vectors are proportional,
///   max collides iff the underlying supports are equal,
///   sum collides never (distinct multisets have distinct counts).
///
/// One-hot symbols make the aggregates linear in the counts, so observation
/// and prediction must agree exactly; any mismatch is counted.
pub fn exhaustive_collision_audit(max_size: usize) -> CollisionAudit {
    // all count vectors (c0, c1, c2) with 1 <= c0+c1+c2 <= max_size
    let mut count_vectors: Vec<[usize; 3]> = Vec::new();
    for c0 in 0..=max_size {
        for c1 in 0..=max_size - c0 {
            for c2 in 0..=max_size - c0 - c1 {
                let total = c0 + c1 + c2;
                if total >= 1 && total <= max_size {
                    count_vectors.push([c0, c1, c2]);
                }
            }
        }
    }
    let one_hot = |s: usize| -> Vec<f64> {
        let mut v = vec![0.0; 3];
        v[s] = 1.0;
        v
    };
    let realize = |counts: &[usize; 3]| -> Multiset {
        let mut elements = Vec::new();
        for (s, &c) in counts.iter().enumerate() {
            for _ in 0..c {
                elements.push(one_hot(s));
            }
        }
        Multiset::new(elements)
    };

    let proportional = |a: &[usize; 3], b: &[usize; 3]| -> bool {
        // a_i / |a| == b_i / |b| without division: a_i * |b| == b_i * |a|
        let (sa, sb) = (a.iter().sum::<usize>(), b.iter().sum::<usize>());
        a.iter().zip(b).all(|(&x, &y)| x * sb == y * sa)
    };
    let support = |a: &[usize; 3]| -> BTreeSet<usize> {
        a.iter()
            .enumerate()
            .filter(|&(_, &c)| c > 0)
            .map(|(s, _)| s)
            .collect()
    };

    let mut audit = CollisionAudit::default();
    for i in 0..count_vectors.len() {
        for j in i + 1..count_vectors.len() {
            let (ca, cb) = (&count_vectors[i], &count_vectors[j]);
            let (xa, xb) = (realize(ca), realize(cb));
            audit.pairs_checked += 1;

            let observed_mean = vectors_collide(
                &Aggregator::Mean.apply(&xa),
                &Aggregator::Mean.apply(&xb),
            );
            let observed_max =
                vectors_collide(&Aggregator::Max.apply(&xa), &Aggregator::Max.apply(&xb));
            let observed_sum =
                vectors_collide(&Aggregator::Sum.apply(&xa), &Aggregator::Sum.apply(&xb));

            if observed_mean != proportional(ca, cb) {
                audit.mean_mismatches += 1;
            }
            if observed_max != (support(ca) == support(cb)) {
                audit.max_mismatches += 1;
            }
            if observed_sum {
                audit.sum_mismatches += 1;
            }
        }
    }
    audit
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ab() -> Multiset {
        Multiset::new(vec![vec![1.0, 0.0], vec![0.0, 2.0]])
    }

    #[test]
    fn mean_witness_doubles_every_element() {
        let x1 = ab();
        let x2 = mean_collision_witness(&x1, 2).unwrap();
        assert_eq!(x2.len(), 4);
        assert!(!x1.same_bag(&x2));
        assert!(vectors_collide(
            &Aggregator::Mean.apply(&x1),
            &Aggregator::Mean.apply(&x2)
        ));
        // same underlying set
        let set1: Vec<_> = Multiset::new(x1.canonical()).canonical().into_iter().collect();
        let mut set2 = x2.canonical();
        set2.dedup();
        assert_eq!(set1, set2);
    }

    #[test]
    fn mean_witness_on_singleton() {
        let x1 = Multiset::new(vec![vec![1.0, 0.0]]);
        let x2 = mean_collision_witness(&x1, 3).unwrap();
        assert_eq!(x2.len(), 3);
        assert_eq!(Aggregator::Mean.apply(&x2), vec![1.0, 0.0]);
    }

    #[test]
    fn sum_separates_mean_witness() {
        let x1 = ab();
        let x2 = mean_collision_witness(&x1, 2).unwrap();
        assert!(!vectors_collide(
            &Aggregator::Sum.apply(&x1),
            &Aggregator::Sum.apply(&x2)
        ));
    }

    #[test]
    fn mean_witness_rejects_k_below_two() {
        assert!(matches!(
            mean_collision_witness(&ab(), 1),
            Err(MultisetError::CopyCountTooSmall(1))
        ));
        assert!(matches!(
            mean_collision_witness(&Multiset::new(vec![]), 2),
            Err(MultisetError::Empty)
        ));
    }

    #[test]
    fn max_witness_keeps_max() {
        let x1 = ab();
        let x2 = max_collision_witness(&x1, &[1, 2]).unwrap();
        assert_eq!(x2.len(), 3);
        assert!(!x1.same_bag(&x2));
        assert!(vectors_collide(
            &Aggregator::Max.apply(&x1),
            &Aggregator::Max.apply(&x2)
        ));
        // mean separates since the two elements differ
        assert!(!vectors_collide(
            &Aggregator::Mean.apply(&x1),
            &Aggregator::Mean.apply(&x2)
        ));
    }

    #[test]
    fn max_witness_errors() {
        assert!(matches!(
            max_collision_witness(&ab(), &[1, 0]),
            Err(MultisetError::ZeroMultiplicity(1))
        ));
        assert!(matches!(
            max_collision_witness(&ab(), &[1]),
            Err(MultisetError::MultiplicityMismatch { .. })
        ));
    }

    #[test]
    fn constant_features_collide_under_mean_and_max_only() {
        let g = Graph::star(5);
        let features = vec![vec![1.0]; 5];
        assert_eq!(
            neighborhood_collision_rate(&g, &features, Aggregator::Mean),
            1.0
        );
        assert_eq!(
            neighborhood_collision_rate(&g, &features, Aggregator::Max),
            1.0
        );
        assert_eq!(
            neighborhood_collision_rate(&g, &features, Aggregator::Sum),
            0.0
        );
    }

    #[test]
    fn continuous_random_features_never_collide() {
        use rand::Rng;
        let g = crate::generate::generate_er(30, 0.2, 4).unwrap();
        let mut rng = crate::rng::seeded_rng(8);
        // mean and sum collisions are exact linear relations among distinct
        // random reals: measure zero at any dimension
        let features: Vec<Vec<f64>> = (0..30)
            .map(|_| vec![rng.random::<f64>(), rng.random::<f64>()])
            .collect();
        for agg in [Aggregator::Mean, Aggregator::Sum] {
            assert_eq!(neighborhood_collision_rate(&g, &features, agg), 0.0);
        }
        // max is different: a common neighbor that dominates both
        // neighborhoods in every coordinate forces a collision, and that has
        // positive probability at low dimension. It decays exponentially in
        // the dimension, so 8-dimensional features push it below observation
        let wide: Vec<Vec<f64>> = (0..30)
            .map(|_| (0..8).map(|_| rng.random::<f64>()).collect())
            .collect();
        assert_eq!(neighborhood_collision_rate(&g, &wide, Aggregator::Max), 0.0);
    }

    #[test]
    fn sum_rate_bounded_by_mean_rate_on_onehot_degrees() {
        for g in [
            Graph::star(8),
            crate::generate::generate_ba(60, 2, 3).unwrap(),
            crate::generate::generate_er(40, 0.1, 6).unwrap(),
        ] {
            let features = degree_features(&g, true);
            let mean_rate = neighborhood_collision_rate(&g, &features, Aggregator::Mean);
            let sum_rate = neighborhood_collision_rate(&g, &features, Aggregator::Sum);
            assert!(
                sum_rate <= mean_rate,
                "sum {sum_rate} > mean {mean_rate}"
            );
        }
    }

    #[test]
    fn audit_confirms_collision_predicates() {
        let audit = exhaustive_collision_audit(4);
        // 34 multisets of size 1..=4 over 3 symbols, all unordered pairs
        assert_eq!(audit.pairs_checked, 34 * 33 / 2);
        assert!(audit.is_clean(), "{audit:?}");
    }

    #[test]
    fn degree_feature_shapes() {
        let g = Graph::star(5);
        let raw = degree_features(&g, false);
        assert_eq!(raw[0], vec![4.0]);
        assert_eq!(raw[1], vec![1.0]);
        let onehot = degree_features(&g, true);
        assert_eq!(onehot[0].len(), 5);
        assert_eq!(onehot[0][4], 1.0);
        assert_eq!(onehot[1][1], 1.0);
    }
}
