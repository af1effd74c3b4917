use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ClusterError;
use crate::model::squared_euclidean;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KMeansOptions {
    pub n_init: usize,
    pub max_iters: usize,
    /// Stop once no centroid moves by this much or more.
    pub tol: f64,
    pub seed: u64,
}

impl Default for KMeansOptions {
    fn default() -> Self {
        KMeansOptions { n_init: 10, max_iters: 300, tol: 1e-6, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansResult {
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub inertia: f64,
}

/// Best of `n_init` k-means++ seeded Lloyd runs by inertia. Restart `r` draws
/// from a generator seeded with `seed + r`, so results depend only on the
/// inputs. The returned assignment maps every point to its nearest centroid.
pub fn kmeans(points: &[Vec<f64>], k: usize, opts: &KMeansOptions) -> Result<KMeansResult, ClusterError> {
    if k == 0 || k > points.len() {
        return Err(ClusterError::Precondition(format!("need 1 <= k <= {}, got k={k}", points.len())));
    }
    let d = points[0].len();
    if points.iter().any(|p| p.len() != d) {
        return Err(ClusterError::Precondition("points must share one dimension".into()));
    }
    if opts.n_init == 0 || opts.max_iters == 0 {
        return Err(ClusterError::Precondition("n_init and max_iters must be positive".into()));
    }
    let runs: Vec<KMeansResult> = (0..opts.n_init)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(r as u64));
            lloyd(points, plus_plus(points, k, &mut rng), opts)
        })
        .collect();
    // First minimum wins so ties resolve to the lowest restart index.
    let best = runs.into_iter().reduce(|a, b| if b.inertia < a.inertia { b } else { a });
    Ok(best.expect("n_init > 0"))
}

fn plus_plus(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut centroids = vec![points[rng.random_range(0..n)].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| squared_euclidean(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, w) in d2.iter().enumerate() {
                if *w > 0.0 && target < *w {
                    pick = i;
                    break;
                }
                target -= w;
            }
            // Guard against rounding landing on a zero-weight tail.
            if d2[pick] == 0.0 {
                pick = d2.iter().rposition(|w| *w > 0.0).unwrap_or(pick);
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        centroids.push(points[next].clone());
        for (w, p) in d2.iter_mut().zip(points) {
            *w = w.min(squared_euclidean(p, &points[next]));
        }
    }
    centroids
}

fn nearest(p: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter().enumerate() {
        let dist = squared_euclidean(p, c);
        if dist < best.1 {
            best = (j, dist);
        }
    }
    best
}

fn assign(points: &[Vec<f64>], centroids: &[Vec<f64>], out: &mut [usize]) {
    for (a, p) in out.iter_mut().zip(points) {
        *a = nearest(p, centroids).0;
    }
}

/// Moves each empty cluster's centroid onto the point farthest from its own
/// centroid, taken from a cluster that can spare it.
fn repair_empty(points: &[Vec<f64>], centroids: &mut [Vec<f64>], assignments: &mut [usize]) {
    let k = centroids.len();
    loop {
        let mut counts = vec![0usize; k];
        assignments.iter().for_each(|&a| counts[a] += 1);
        let Some(empty) = counts.iter().position(|&c| c == 0) else { return };
        let donor = (0..points.len())
            .filter(|&i| counts[assignments[i]] > 1)
            .max_by(|&i, &j| {
                let di = squared_euclidean(&points[i], &centroids[assignments[i]]);
                let dj = squared_euclidean(&points[j], &centroids[assignments[j]]);
                di.total_cmp(&dj).then(j.cmp(&i))
            });
        let Some(i) = donor else { return };
        centroids[empty] = points[i].clone();
        assignments[i] = empty;
    }
}

fn means(points: &[Vec<f64>], assignments: &[usize], old: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let d = points[0].len();
    let mut sums = vec![vec![0.0; d]; old.len()];
    let mut counts = vec![0usize; old.len()];
    for (p, &a) in points.iter().zip(assignments) {
        counts[a] += 1;
        sums[a].iter_mut().zip(p).for_each(|(s, x)| *s += x);
    }
    sums.into_iter()
        .zip(counts)
        .zip(old)
        .map(|((s, c), o)| if c == 0 { o.clone() } else { s.into_iter().map(|x| x / c as f64).collect() })
        .collect()
}

fn lloyd(points: &[Vec<f64>], mut centroids: Vec<Vec<f64>>, opts: &KMeansOptions) -> KMeansResult {
    let mut assignments = vec![0; points.len()];
    for _ in 0..opts.max_iters {
        assign(points, &centroids, &mut assignments);
        repair_empty(points, &mut centroids, &mut assignments);
        let next = means(points, &assignments, &centroids);
        let shift = next
            .iter()
            .zip(&centroids)
            .map(|(a, b)| squared_euclidean(a, b).sqrt())
            .fold(0.0, f64::max);
        centroids = next;
        if shift < opts.tol {
            break;
        }
    }
    assign(points, &centroids, &mut assignments);
    let inertia = points.iter().zip(&assignments).map(|(p, &a)| squared_euclidean(p, &centroids[a])).sum();
    KMeansResult { assignments, centroids, inertia }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(xs: &[f64]) -> Vec<Vec<f64>> {
        xs.iter().map(|&x| vec![x]).collect()
    }

    #[test]
    fn single_cluster_is_the_mean() {
        let p = pts(&[1.0, 2.0, 6.0]);
        let r = kmeans(&p, 1, &KMeansOptions::default()).unwrap();
        assert!((r.centroids[0][0] - 3.0).abs() < 1e-12);
        assert!((r.inertia - 14.0).abs() < 1e-12);
    }

    #[test]
    fn separated_pairs() {
        let p = pts(&[0.0, 0.1, 10.0, 10.1]);
        let r = kmeans(&p, 2, &KMeansOptions { seed: 5, ..Default::default() }).unwrap();
        assert_eq!(r.assignments[0], r.assignments[1]);
        assert_eq!(r.assignments[2], r.assignments[3]);
        assert_ne!(r.assignments[0], r.assignments[2]);
    }

    #[test]
    fn k_equals_n_has_zero_inertia() {
        let p = pts(&[3.0, -1.0, 7.5, 0.25]);
        assert_eq!(kmeans(&p, 4, &KMeansOptions::default()).unwrap().inertia, 0.0);
    }

    #[test]
    fn k_out_of_range() {
        let p = pts(&[1.0, 2.0]);
        assert!(kmeans(&p, 3, &KMeansOptions::default()).is_err());
        assert!(kmeans(&p, 0, &KMeansOptions::default()).is_err());
    }

    #[test]
    fn seeded_runs_repeat() {
        let p: Vec<Vec<f64>> = (0..40).map(|i| vec![(i * 7 % 13) as f64, (i * 3 % 11) as f64]).collect();
        let o = KMeansOptions { seed: 9, ..Default::default() };
        assert_eq!(kmeans(&p, 4, &o).unwrap(), kmeans(&p, 4, &o).unwrap());
    }

    #[test]
    fn duplicates_do_not_leave_empty_clusters() {
        let p = pts(&[1.0, 1.0, 1.0, 5.0]);
        let r = kmeans(&p, 3, &KMeansOptions::default()).unwrap();
        assert!(r.inertia.abs() < 1e-12);
    }
}
