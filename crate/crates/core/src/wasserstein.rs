//! 2-Wasserstein distance between equal-size empirical sample sets.
//!
//! One-dimensional sets use the sorted coupling. Higher dimensions solve the
//! assignment problem exactly with the Hungarian algorithm.

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Larger multivariate sample sets are uniformly subsampled to this size.
pub const MAX_ASSIGNMENT_POINTS: usize = 2000;
const SUBSAMPLE_SEED: u64 = 0x005e_ed0f_7a11;

/// `W₂` between the empirical measures of the rows of `a` and `b`.
pub fn wasserstein2(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    if a.nrows() != b.nrows() {
        return Err(Error::Dimension(format!(
            "sample counts differ: {} vs {}",
            a.nrows(),
            b.nrows()
        )));
    }
    if a.ncols() != b.ncols() {
        return Err(Error::Dimension(format!(
            "sample dimensions differ: {} vs {}",
            a.ncols(),
            b.ncols()
        )));
    }
    let n = a.nrows();
    if n == 0 {
        return Err(Error::Dimension("empty sample sets".into()));
    }
    if a.ncols() == 1 {
        return Ok(wasserstein2_1d(a.as_slice(), b.as_slice()));
    }
    let (a, b) = if n > MAX_ASSIGNMENT_POINTS {
        let mut rng = ChaCha8Rng::seed_from_u64(SUBSAMPLE_SEED);
        let ia = sample(&mut rng, n, MAX_ASSIGNMENT_POINTS).into_vec();
        let ib = sample(&mut rng, n, MAX_ASSIGNMENT_POINTS).into_vec();
        (a.select_rows(ia.iter()), b.select_rows(ib.iter()))
    } else {
        (a.clone(), b.clone())
    };
    let m = a.nrows();
    let cost = DMatrix::from_fn(m, m, |i, j| (a.row(i) - b.row(j)).norm_squared());
    let assignment = hungarian(&cost);
    let total: f64 = assignment
        .iter()
        .enumerate()
        .map(|(i, &j)| cost[(i, j)])
        .sum();
    Ok((total / m as f64).sqrt())
}

/// Sorted-coupling distance for scalar samples of equal count.
pub fn wasserstein2_1d(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(f64::total_cmp);
    sb.sort_by(f64::total_cmp);
    let ss: f64 = sa.iter().zip(&sb).map(|(x, y)| (x - y).powi(2)).sum();
    (ss / a.len() as f64).sqrt()
}

/// Minimum-cost perfect matching on a square cost matrix.
///
/// Returns `assignment[row] = column`. Shortest augmenting paths with dual
/// potentials, `O(n³)`.
pub fn hungarian(cost: &DMatrix<f64>) -> Vec<usize> {
    let n = cost.nrows();
    assert_eq!(n, cost.ncols(), "cost matrix must be square");
    // 1-based bookkeeping; index 0 is the virtual root
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut col_owner = vec![0usize; n + 1];
    for row in 1..=n {
        col_owner[0] = row;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = col_owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[(i0 - 1, j - 1)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[col_owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if col_owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            col_owner[j0] = col_owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        if col_owner[j] > 0 {
            assignment[col_owner[j] - 1] = j - 1;
        }
    }
    assignment
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;
    use proptest::prelude::*;
    use rand::Rng;

    fn permutations(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in permutations(n - 1) {
            for pos in 0..=p.len() {
                let mut q = p.clone();
                q.insert(pos, n - 1);
                out.push(q);
            }
        }
        out
    }

    fn brute_force_w2(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        let n = a.nrows();
        permutations(n)
            .into_iter()
            .map(|p| {
                p.iter()
                    .enumerate()
                    .map(|(i, &j)| (a.row(i) - b.row(j)).norm_squared())
                    .sum::<f64>()
                    / n as f64
            })
            .fold(f64::INFINITY, f64::min)
            .sqrt()
    }

    #[test]
    fn scalar_example() {
        let a = dmatrix![0.; 2.];
        let b = dmatrix![3.; 1.];
        assert!((wasserstein2(&a, &b).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn identical_sets_are_zero() {
        let a = dmatrix![0., 1.; 2., 3.; -1., 0.5];
        assert_eq!(wasserstein2(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn two_dimensional_example_matches_enumeration() {
        let a = dmatrix![0., 0.; 1., 1.];
        let b = dmatrix![1., 0.; 0., 1.];
        let expected = brute_force_w2(&a, &b);
        assert!((expected - 1.0).abs() < 1e-15);
        assert!((wasserstein2(&a, &b).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn mismatched_sets_rejected() {
        let a = dmatrix![0.; 1.];
        assert!(wasserstein2(&a, &dmatrix![0.]).is_err());
        assert!(wasserstein2(&a, &dmatrix![0., 1.; 1., 1.]).is_err());
    }

    #[test]
    fn large_sets_are_subsampled_deterministically() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = MAX_ASSIGNMENT_POINTS + 50;
        let a = DMatrix::from_fn(n, 2, |_, _| rng.random::<f64>());
        let b = DMatrix::from_fn(n, 2, |_, _| rng.random::<f64>());
        let d1 = wasserstein2(&a, &b).unwrap();
        let d2 = wasserstein2(&a, &b).unwrap();
        assert_eq!(d1, d2);
        assert!(d1 > 0.0 && d1 < 0.2);
    }

    proptest! {
        #[test]
        fn hungarian_matches_brute_force(n in 1usize..7, d in 1usize..4, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = DMatrix::from_fn(n, d, |_, _| rng.random_range(-3.0..3.0));
            let b = DMatrix::from_fn(n, d, |_, _| rng.random_range(-3.0..3.0));
            let fast = wasserstein2(&a, &b).unwrap();
            let slow = brute_force_w2(&a, &b);
            prop_assert!((fast - slow).abs() <= 1e-12 * slow.max(1.0));
        }
    }
}
