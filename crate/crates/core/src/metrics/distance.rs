//! Set distances between point clouds: symmetric Hausdorff and uniform-weight
//! 1-Wasserstein.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::assignment;
use super::MetricsError;
use crate::model::euclidean;

fn check_sets(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<(), MetricsError> {
    if a.is_empty() || b.is_empty() {
        return Err(MetricsError::Precondition("point sets must be non-empty".into()));
    }
    let dim = a[0].len();
    if a.iter().chain(b).any(|p| p.len() != dim) {
        return Err(MetricsError::Precondition("all points must share one dimension".into()));
    }
    Ok(())
}

fn directed_hausdorff(x: &[Vec<f64>], y: &[Vec<f64>]) -> f64 {
    x.iter()
        .map(|p| y.iter().map(|q| euclidean(p, q)).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max)
}

/// `max(h(A, B), h(B, A))` with `h(X, Y) = max_x min_y |x - y|`.
pub fn hausdorff(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<f64, MetricsError> {
    check_sets(a, b)?;
    Ok(directed_hausdorff(a, b).max(directed_hausdorff(b, a)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WassersteinOptions {
    /// Largest set size solved by one exact assignment.
    pub assignment_limit: usize,
    /// Subsampling rounds averaged when the sets need subsampling.
    pub resamples: usize,
    pub seed: u64,
}

impl Default for WassersteinOptions {
    fn default() -> Self {
        WassersteinOptions { assignment_limit: 256, resamples: 10, seed: 0 }
    }
}

/// Uniform-weight 1-Wasserstein distance.
///
/// Equal sizes within the assignment limit are solved exactly. Otherwise both
/// sets are uniformly subsampled (without replacement) to
/// `min(|A|, |B|, limit)` points, solved exactly, and averaged over
/// `resamples` seeded rounds.
pub fn wasserstein(a: &[Vec<f64>], b: &[Vec<f64>], opts: &WassersteinOptions) -> Result<f64, MetricsError> {
    check_sets(a, b)?;
    if opts.assignment_limit == 0 || opts.resamples == 0 {
        return Err(MetricsError::Precondition("assignment_limit and resamples must be positive".into()));
    }
    if a == b {
        return Ok(0.0);
    }
    if a.len() == b.len() && a.len() <= opts.assignment_limit {
        return Ok(exact_matching_cost(a, b));
    }
    let m = a.len().min(b.len()).min(opts.assignment_limit);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut total = 0.0;
    for _ in 0..opts.resamples {
        let pick = |set: &[Vec<f64>], rng: &mut ChaCha8Rng| -> Vec<Vec<f64>> {
            if set.len() == m {
                set.to_vec()
            } else {
                let mut idx = sample(rng, set.len(), m).into_vec();
                idx.sort_unstable();
                idx.into_iter().map(|i| set[i].clone()).collect()
            }
        };
        let sa = pick(a, &mut rng);
        let sb = pick(b, &mut rng);
        total += exact_matching_cost(&sa, &sb);
    }
    Ok(total / opts.resamples as f64)
}

/// `(1/n) * min over perfect matchings of the summed Euclidean cost`.
pub fn exact_matching_cost(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let n = a.len();
    debug_assert_eq!(n, b.len());
    let cost: Vec<f64> = a.iter().flat_map(|p| b.iter().map(move |q| euclidean(p, q))).collect();
    assignment::solve(&cost, n).cost / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(v: &[&[f64]]) -> Vec<Vec<f64>> {
        v.iter().map(|p| p.to_vec()).collect()
    }

    #[test]
    fn hausdorff_examples() {
        let a = pts(&[&[0.0, 0.0]]);
        let b = pts(&[&[3.0, 4.0]]);
        assert_eq!(hausdorff(&a, &b).unwrap(), 5.0);
        assert_eq!(hausdorff(&a, &a).unwrap(), 0.0);
        let a = pts(&[&[0.0], &[1.0]]);
        let b = pts(&[&[0.0], &[5.0]]);
        assert_eq!(hausdorff(&a, &b).unwrap(), 4.0);
    }

    #[test]
    fn preconditions() {
        let a = pts(&[&[0.0]]);
        assert!(hausdorff(&a, &[]).is_err());
        assert!(wasserstein(&[], &a, &WassersteinOptions::default()).is_err());
        assert!(hausdorff(&a, &pts(&[&[0.0, 1.0]])).is_err());
    }

    #[test]
    fn wasserstein_examples() {
        let opts = WassersteinOptions::default();
        let a = pts(&[&[0.0], &[2.0]]);
        let b = pts(&[&[1.0], &[3.0]]);
        assert_eq!(wasserstein(&a, &b, &opts).unwrap(), 1.0);
        assert_eq!(wasserstein(&a, &a, &opts).unwrap(), 0.0);
    }

    #[test]
    fn unequal_sizes_are_seeded() {
        let a: Vec<Vec<f64>> = (0..9).map(|i| vec![i as f64]).collect();
        let b: Vec<Vec<f64>> = (0..4).map(|i| vec![i as f64 * 2.0]).collect();
        let opts = WassersteinOptions { seed: 3, ..Default::default() };
        let w1 = wasserstein(&a, &b, &opts).unwrap();
        let w2 = wasserstein(&a, &b, &opts).unwrap();
        assert_eq!(w1, w2);
        assert!(w1 >= 0.0);
        let other = wasserstein(&a, &b, &WassersteinOptions { seed: 4, ..opts }).unwrap();
        assert!(other >= 0.0);
    }

    #[test]
    fn equal_sizes_above_limit_are_subsampled() {
        let a: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64]).collect();
        let opts = WassersteinOptions { assignment_limit: 3, resamples: 4, seed: 1 };
        assert_eq!(wasserstein(&a, &a, &opts).unwrap(), 0.0);
        let b: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64 + 1.0]).collect();
        let w = wasserstein(&a, &b, &opts).unwrap();
        assert!(w.is_finite() && w >= 0.0);
    }
}
