//! Dimensionality reduction, clustering and plan-candidate assembly.

pub mod kmeans;
pub mod pca;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{euclidean, CandidateId, DomainId, PipelineConfig, PlanCandidate, SnippetId, Vector};
pub use kmeans::{kmeans, KMeansOptions, KMeansResult};
pub use pca::{fit_pca, PcaModel};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClusterError {
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("degenerate data: {0}")]
    Degenerate(String),
}

/// Mean silhouette coefficient. Labels are arbitrary; at least two distinct
/// labels are required. Singleton clusters score 0, as does a point with
/// `a = b = 0`.
pub fn mean_silhouette(points: &[Vec<f64>], labels: &[usize]) -> Result<f64, ClusterError> {
    if points.len() != labels.len() {
        return Err(ClusterError::Precondition("one label per point required".into()));
    }
    let mut members: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        members.entry(l).or_default().push(i);
    }
    if members.len() < 2 {
        return Err(ClusterError::Precondition("silhouette needs at least 2 clusters".into()));
    }
    let total: f64 = (0..points.len())
        .into_par_iter()
        .map(|i| {
            let own = &members[&labels[i]];
            if own.len() == 1 {
                return 0.0;
            }
            let mean_to = |idx: &[usize]| idx.iter().map(|&j| euclidean(&points[i], &points[j])).sum::<f64>();
            let a = mean_to(own) / (own.len() - 1) as f64;
            let b = members
                .iter()
                .filter(|(l, _)| **l != labels[i])
                .map(|(_, idx)| mean_to(idx) / idx.len() as f64)
                .fold(f64::INFINITY, f64::min);
            let denom = a.max(b);
            if denom == 0.0 {
                0.0
            } else {
                (b - a) / denom
            }
        })
        .collect::<Vec<_>>()
        .into_iter()
        .sum();
    Ok(total / points.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringResult {
    pub k: usize,
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    /// `(k, mean silhouette)` for every k tried, ascending k.
    pub silhouettes: Vec<(usize, f64)>,
    pub inertia: f64,
}

pub fn kmeans_options(config: &PipelineConfig) -> KMeansOptions {
    KMeansOptions { n_init: config.n_init, max_iters: config.max_iters, tol: config.tol, seed: config.seed }
}

/// Runs k-means for every k in `[k_min, min(k_max, n - 1)]` and keeps the k
/// with the highest mean silhouette; ties go to the smaller k.
pub fn select_k_and_cluster(points: &[Vec<f64>], config: &PipelineConfig) -> Result<ClusteringResult, ClusterError> {
    let n = points.len();
    if n < config.k_min + 1 {
        return Err(ClusterError::Precondition(format!("need at least {} points, got {n}", config.k_min + 1)));
    }
    let opts = kmeans_options(config);
    let k_hi = config.k_max.min(n - 1);
    let mut best: Option<(f64, KMeansResult)> = None;
    let mut silhouettes = Vec::new();
    for k in config.k_min..=k_hi {
        let run = kmeans(points, k, &opts)?;
        // A collapsed run (fewer distinct labels than 2) cannot be scored.
        let s = mean_silhouette(points, &run.assignments).unwrap_or(-1.0);
        silhouettes.push((k, s));
        if best.as_ref().is_none_or(|(bs, _)| s > *bs) {
            best = Some((s, run));
        }
    }
    let (_, run) = best.expect("k range is non-empty");
    Ok(ClusteringResult {
        k: run.centroids.len(),
        assignments: run.assignments,
        centroids: run.centroids,
        silhouettes,
        inertia: run.inertia,
    })
}

/// Builds one candidate per non-empty cluster.
///
/// Members are ordered by distance to the cluster mean (ties by snippet id);
/// the first `n_representatives` are the representatives. Candidates are
/// ranked by size, largest first (ties by smallest member id), and the first
/// `top_clusters` are flagged. `namer` receives the representative indices
/// into `points`; a failure yields a placeholder name marked pending.
pub fn assemble_candidates<F, E>(
    domain_id: DomainId,
    snippet_ids: &[SnippetId],
    points: &[Vec<f64>],
    assignments: &[usize],
    config: &PipelineConfig,
    namer: F,
) -> Vec<PlanCandidate>
where
    F: Fn(&[usize]) -> Result<String, E> + Sync,
    E: std::fmt::Display,
{
    assert_eq!(snippet_ids.len(), points.len());
    assert_eq!(assignments.len(), points.len());
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &a) in assignments.iter().enumerate() {
        groups.entry(a).or_default().push(i);
    }
    let mut clusters: Vec<(Vec<usize>, Vec<f64>)> = groups
        .into_values()
        .map(|idx| {
            let d = points[idx[0]].len();
            let mut c = vec![0.0; d];
            for &i in &idx {
                c.iter_mut().zip(&points[i]).for_each(|(s, x)| *s += x);
            }
            c.iter_mut().for_each(|s| *s /= idx.len() as f64);
            let mut idx = idx;
            idx.sort_by(|&x, &y| {
                euclidean(&points[x], &c)
                    .total_cmp(&euclidean(&points[y], &c))
                    .then(snippet_ids[x].cmp(&snippet_ids[y]))
            });
            (idx, c)
        })
        .collect();
    let min_id = |idx: &[usize]| idx.iter().map(|&i| snippet_ids[i]).min();
    clusters.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then(min_id(&a.0).cmp(&min_id(&b.0))));

    clusters
        .par_iter()
        .enumerate()
        .map(|(rank, (idx, centroid))| {
            let reps = &idx[..idx.len().min(config.n_representatives)];
            let (name, name_pending) = match namer(reps) {
                Ok(name) => (name, false),
                Err(e) => {
                    log::warn!("naming cluster {} failed: {e}", rank + 1);
                    (format!("Unnamed plan {}", rank + 1), true)
                }
            };
            PlanCandidate {
                id: CandidateId(0),
                domain_id,
                name,
                name_pending,
                snippet_ids: idx.iter().map(|&i| snippet_ids[i]).collect(),
                centroid: Vector::new(centroid.clone()).expect("means of finite points are finite"),
                size: idx.len(),
                representative_ids: reps.iter().map(|&i| snippet_ids[i]).collect(),
                rank,
                top: rank < config.top_clusters,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn silhouette_of_separated_pairs() {
        let p: Vec<Vec<f64>> = [0.0, 0.1, 10.0, 10.1].iter().map(|&x| vec![x]).collect();
        let s = mean_silhouette(&p, &[0, 0, 1, 1]).unwrap();
        // a = 0.1, b = 10.05 or 9.95 depending on the point
        assert!((s - 0.990).abs() < 1e-3, "{s}");
    }

    #[test]
    fn silhouette_conventions() {
        let same = vec![vec![1.0]; 4];
        assert_eq!(mean_silhouette(&same, &[0, 0, 1, 1]).unwrap(), 0.0);
        assert!(mean_silhouette(&same, &[0, 0, 0, 0]).is_err());
        let p: Vec<Vec<f64>> = [0.0, 1.0, 5.0].iter().map(|&x| vec![x]).collect();
        // The singleton contributes 0.
        let s = mean_silhouette(&p, &[0, 0, 1]).unwrap();
        assert!((s - (0.8 + 0.75) / 3.0).abs() < 1e-12);
    }

    #[test]
    fn minimal_k_range() {
        let p: Vec<Vec<f64>> = [0.0, 0.1, 10.0].iter().map(|&x| vec![x]).collect();
        let r = select_k_and_cluster(&p, &PipelineConfig::default()).unwrap();
        assert_eq!(r.silhouettes.len(), 1);
        assert_eq!(r.k, 2);
        assert!(select_k_and_cluster(&p[..2], &PipelineConfig::default()).is_err());
    }

    #[test]
    fn representatives_by_distance() {
        let p = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![5.0, 5.0]];
        let ids: Vec<SnippetId> = (10..14).map(SnippetId).collect();
        let cfg = PipelineConfig::default();
        let c = assemble_candidates(DomainId(1), &ids, &p, &[0, 0, 0, 0], &cfg, |_| Ok::<_, String>("n".into()));
        assert_eq!(c.len(), 1);
        // Distances to (1.5, 1.5): 1.58, 1.58, 2.12, 4.95; ties by id.
        assert_eq!(c[0].representative_ids, vec![SnippetId(11), SnippetId(12), SnippetId(10), SnippetId(13)]);
        assert_eq!(c[0].centroid.as_slice(), &[1.5, 1.5]);
    }

    #[test]
    fn ranking_top_flags_and_pending_names() {
        let p: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64]).collect();
        let ids: Vec<SnippetId> = (0..6).map(SnippetId).collect();
        let cfg = PipelineConfig { top_clusters: 1, n_representatives: 4, ..Default::default() };
        let c = assemble_candidates(DomainId(1), &ids, &p, &[1, 0, 0, 2, 0, 1], &cfg, |reps| {
            if reps.len() == 1 {
                Err("no fixture")
            } else {
                Ok(format!("size {}", reps.len()))
            }
        });
        assert_eq!(c.iter().map(|c| c.size).collect::<Vec<_>>(), vec![3, 2, 1]);
        assert_eq!(c.iter().map(|c| c.top).collect::<Vec<_>>(), vec![true, false, false]);
        assert!(c[2].name_pending && !c[0].name_pending);
        assert_eq!(c[0].name, "size 3");
    }
}
