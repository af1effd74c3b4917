use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::ClusterError;

/// Principal components retained to meet a variance target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// `m` rows of length `d`, orthonormal.
    pub components: Vec<Vec<f64>>,
    /// Explained-variance ratio of each retained component, descending.
    pub explained_variance_ratio: Vec<f64>,
    pub m: usize,
}

impl PcaModel {
    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.mean.len(), "dimension mismatch");
        self.components
            .iter()
            .map(|c| c.iter().zip(x).zip(&self.mean).map(|((ci, xi), mi)| ci * (xi - mi)).sum())
            .collect()
    }

    pub fn project_all(&self, xs: &[Vec<f64>]) -> Vec<Vec<f64>> {
        xs.iter().map(|x| self.project(x)).collect()
    }

    pub fn retained_variance(&self) -> f64 {
        self.explained_variance_ratio.iter().sum()
    }
}

/// Slack on the cumulative-ratio comparison so a target of 1.0 is reachable
/// despite rounding.
const TARGET_SLACK: f64 = 1e-12;

/// Centers the data, eigendecomposes the sample covariance and keeps the
/// fewest leading components whose ratios sum to at least `variance_target`.
/// Each component is signed so its largest-magnitude entry is positive.
pub fn fit_pca(vectors: &[Vec<f64>], variance_target: f64) -> Result<PcaModel, ClusterError> {
    if vectors.len() < 2 {
        return Err(ClusterError::Precondition("PCA needs at least 2 vectors".into()));
    }
    if !(variance_target > 0.0 && variance_target <= 1.0) {
        return Err(ClusterError::Precondition(format!("variance target {variance_target} not in (0, 1]")));
    }
    let d = vectors[0].len();
    if d == 0 || vectors.iter().any(|v| v.len() != d) {
        return Err(ClusterError::Precondition("vectors must share one positive dimension".into()));
    }
    let n = vectors.len();
    let mut mean = vec![0.0; d];
    for v in vectors {
        for (m, x) in mean.iter_mut().zip(v) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);

    let identical = vectors.iter().all(|v| v.iter().zip(&mean).all(|(x, m)| (x - m).abs() <= 1e-12 * (1.0 + m.abs())));
    if identical {
        return Err(ClusterError::Degenerate("all points are identical".into()));
    }

    let centered = DMatrix::from_fn(n, d, |i, j| vectors[i][j] - mean[j]);
    let cov = (centered.transpose() * &centered) / (n as f64 - 1.0);
    let eig = SymmetricEigen::new(cov);

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let total: f64 = values.iter().sum();
    let scale = values.first().copied().unwrap_or(0.0);
    if total <= 0.0 {
        return Err(ClusterError::Degenerate("covariance has no positive variance".into()));
    }
    // Numerical rank: eigenvalues meaningfully above rounding noise.
    let noise = scale * (d.max(n) as f64) * f64::EPSILON * 16.0;
    let rank = values.iter().take_while(|&&v| v > noise).count().max(1);

    let ratios: Vec<f64> = values.iter().map(|v| v / total).collect();
    let mut m = 0;
    let mut cum = 0.0;
    while m < rank {
        cum += ratios[m];
        m += 1;
        if cum >= variance_target - TARGET_SLACK {
            break;
        }
    }

    let components = order[..m]
        .iter()
        .map(|&col| {
            let mut c: Vec<f64> = eig.eigenvectors.column(col).iter().copied().collect();
            let norm = c.iter().map(|x| x * x).sum::<f64>().sqrt();
            c.iter_mut().for_each(|x| *x /= norm);
            let lead = c.iter().enumerate().fold(0, |best, (i, x)| if x.abs() > c[best].abs() { i } else { best });
            if c[lead] < 0.0 {
                c.iter_mut().for_each(|x| *x = -*x);
            }
            c
        })
        .collect();
    Ok(PcaModel { mean, components, explained_variance_ratio: ratios[..m].to_vec(), m })
}
