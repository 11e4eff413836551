//! Dense symmetric eigensolver used by the spectral walk analysis.
//!
//! Matrix products come from `ndarray`; the only piece implemented here is a
//! cyclic Jacobi iteration, which is compact, numerically robust for the
//! modest sizes the lemma checks run at, and has no external dependencies.

use ndarray::Array2;

/// Eigenvalues of a real symmetric matrix, sorted descending.
///
/// Cyclic Jacobi sweeps with the standard stable rotation formulas; the input
/// is consumed as workspace. Panics on non-square or non-finite input and on
/// failure to converge, which for symmetric input cannot happen short of NaN.
pub fn symmetric_eigenvalues(mut a: Array2<f64>, tol: f64) -> Vec<f64> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "matrix must be square");
    assert!(a.iter().all(|x| x.is_finite()), "matrix must be finite");
    if n == 0 {
        return Vec::new();
    }
    if n == 1 {
        return vec![a[(0, 0)]];
    }

    let scale: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(1.0);
    let threshold = tol * scale;
    for _sweep in 0..200 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum::<f64>()
            .sqrt();
        if off <= threshold {
            let mut evs: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
            evs.sort_by(|x, y| y.partial_cmp(x).unwrap());
            return evs;
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq.abs() <= threshold / (n as f64 * n as f64) {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    panic!("jacobi eigensolver failed to converge in 200 sweeps");
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;

    #[test]
    fn diagonal_matrix_returns_sorted_diagonal() {
        let a = Array2::from_diag(&ndarray::arr1(&[3.0, -1.0, 7.0, 0.5]));
        let evs = symmetric_eigenvalues(a, 1e-12);
        assert_eq!(evs, vec![7.0, 3.0, 0.5, -1.0]);
    }

    #[test]
    fn two_by_two_swap() {
        let a = arr2(&[[0.0, 1.0], [1.0, 0.0]]);
        let evs = symmetric_eigenvalues(a, 1e-12);
        assert!((evs[0] - 1.0).abs() < 1e-10);
        assert!((evs[1] + 1.0).abs() < 1e-10);
    }

    #[test]
    fn complete_graph_walk_spectrum() {
        // normalized adjacency of K4: eigenvalues 1 and -1/3 (x3)
        let mut a = Array2::from_elem((4, 4), 1.0 / 3.0);
        for i in 0..4 {
            a[(i, i)] = 0.0;
        }
        let evs = symmetric_eigenvalues(a, 1e-12);
        assert!((evs[0] - 1.0).abs() < 1e-10);
        for &e in &evs[1..] {
            assert!((e + 1.0 / 3.0).abs() < 1e-10);
        }
    }

    #[test]
    fn trace_invariants_on_random_symmetric() {
        use rand::Rng;
        let mut rng = crate::rng::seeded_rng(42);
        let n = 30;
        let mut a = Array2::zeros((n, n));
        for i in 0..n {
            for j in i..n {
                let x: f64 = rng.random_range(-1.0..1.0);
                a[(i, j)] = x;
                a[(j, i)] = x;
            }
        }
        let trace: f64 = (0..n).map(|i| a[(i, i)]).sum();
        let frob2: f64 = a.iter().map(|x| x * x).sum();
        let evs = symmetric_eigenvalues(a, 1e-13);
        let sum: f64 = evs.iter().sum();
        let sumsq: f64 = evs.iter().map(|x| x * x).sum();
        assert!((sum - trace).abs() < 1e-8, "trace mismatch: {sum} vs {trace}");
        assert!((sumsq - frob2).abs() < 1e-8, "frobenius mismatch");
        assert!(evs.windows(2).all(|w| w[0] >= w[1]));
    }
}
