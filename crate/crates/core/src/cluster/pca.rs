use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{AuditError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", content = "value")]
pub enum PcaTarget {
    FixedComponents(usize),
    /// Smallest number of components whose cumulative ratio reaches this.
    VarianceThreshold(f64),
}

impl Default for PcaTarget {
    fn default() -> Self {
        PcaTarget::FixedComponents(5)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// Unit-length principal axes, strongest first. Each axis is signed so
    /// its largest-magnitude entry is positive.
    pub components: Vec<Vec<f64>>,
    pub explained_variance_ratio: Vec<f64>,
    /// Every covariance eigenvalue (n − 1 denominator), descending.
    pub eigenvalues: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl PcaModel {
    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    pub fn transform_row(&self, row: &[f64]) -> Vec<f64> {
        let centered: Vec<f64> = row.iter().zip(&self.mean).map(|(x, m)| x - m).collect();
        self.components.iter().map(|c| dot(c, &centered)).collect()
    }

    pub fn transform(&self, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        rows.iter().map(|r| self.transform_row(r)).collect()
    }

    /// Maps scores back to the input space (mean added back).
    pub fn inverse_transform_row(&self, scores: &[f64]) -> Vec<f64> {
        let mut out = self.mean.clone();
        for (s, c) in scores.iter().zip(&self.components) {
            for (o, v) in out.iter_mut().zip(c) {
                *o += s * v;
            }
        }
        out
    }

    /// Variance left out by the retained components.
    pub fn discarded_variance(&self) -> f64 {
        self.eigenvalues[self.n_components()..].iter().sum()
    }
}

pub fn pca_fit(rows: &[Vec<f64>], target: PcaTarget) -> Result<PcaModel> {
    let n = rows.len();
    if n < 2 {
        return Err(AuditError::InsufficientData(format!(
            "PCA needs at least 2 rows, got {n}"
        )));
    }
    let d = rows[0].len();
    if d == 0 || rows.iter().any(|r| r.len() != d) {
        return Err(AuditError::Shape(
            "PCA rows must share a nonzero length".into(),
        ));
    }
    let mean: Vec<f64> = (0..d)
        .map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n as f64)
        .collect();
    let x = DMatrix::from_fn(n, d, |i, j| rows[i][j] - mean[j]);
    let cov = (x.transpose() * &x) / (n as f64 - 1.0);
    let eig = SymmetricEigen::new(cov);

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then_with(|| a.cmp(&b))
    });
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let total: f64 = eigenvalues.iter().sum();
    let top = eigenvalues.first().copied().unwrap_or(0.0);
    let rank = eigenvalues
        .iter()
        .filter(|&&l| l > top * 1e-12 && l > 0.0)
        .count()
        .min(n - 1);
    if rank == 0 {
        return Err(AuditError::Undefined(
            "PCA of data with zero variance".into(),
        ));
    }
    let ratios: Vec<f64> = eigenvalues.iter().map(|l| l / total).collect();

    let m = match target {
        PcaTarget::FixedComponents(0) => {
            return Err(AuditError::Range {
                what: "PCA component count",
                value: "0".into(),
            })
        }
        PcaTarget::FixedComponents(m) => {
            if m > rank {
                log::warn!("PCA: {m} components requested, data rank is {rank}; clamping");
            }
            m.min(rank)
        }
        PcaTarget::VarianceThreshold(t) => {
            if !(0.0..=1.0).contains(&t) || t == 0.0 {
                return Err(AuditError::Range {
                    what: "PCA variance threshold",
                    value: t.to_string(),
                });
            }
            let mut cum = 0.0;
            let mut m = rank;
            for (i, r) in ratios.iter().take(rank).enumerate() {
                cum += r;
                if cum >= t - 1e-12 {
                    m = i + 1;
                    break;
                }
            }
            m
        }
    };

    let components: Vec<Vec<f64>> = order[..m]
        .iter()
        .map(|&i| {
            let mut v: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
            let norm = dot(&v, &v).sqrt();
            v.iter_mut().for_each(|x| *x /= norm);
            let lead = v.iter().enumerate().fold(
                0,
                |best, (j, x)| if x.abs() > v[best].abs() { j } else { best },
            );
            if v[lead] < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            v
        })
        .collect();
    Ok(PcaModel {
        mean,
        components,
        explained_variance_ratio: ratios[..m].to_vec(),
        eigenvalues,
    })
}
