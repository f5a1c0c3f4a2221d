use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::pca::PcaModel;
use crate::error::{AuditError, Result};

pub const DEFAULT_RESTARTS: usize = 10;
pub const MAX_ITERATIONS: usize = 300;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansFit {
    /// Cluster ids renumbered by first appearance in row order.
    pub labels: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub inertia: f64,
    /// Inertia after each Lloyd update of the winning restart.
    pub inertia_history: Vec<f64>,
    pub restart: usize,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub k: usize,
    pub centroids: Vec<Vec<f64>>,
    /// One id per input row, in row order.
    pub labels: Vec<usize>,
    pub silhouette: f64,
    pub inertia: f64,
    /// Silhouette of every k tried, ascending k.
    pub scores: Vec<(usize, f64)>,
}

impl ClusterModel {
    /// Pairs row labels with company names.
    pub fn label_map(&self, companies: &[String]) -> Result<BTreeMap<String, usize>> {
        if companies.len() != self.labels.len() {
            return Err(AuditError::Shape(format!(
                "{} companies for {} labels",
                companies.len(),
                self.labels.len()
            )));
        }
        Ok(companies
            .iter()
            .cloned()
            .zip(self.labels.iter().copied())
            .collect())
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn check_rows(rows: &[Vec<f64>]) -> Result<usize> {
    let d = rows.first().map_or(0, Vec::len);
    if d == 0 || rows.iter().any(|r| r.len() != d) {
        return Err(AuditError::Shape("rows must share a nonzero length".into()));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(AuditError::Range {
            what: "clustering input",
            value: "non-finite value".into(),
        });
    }
    Ok(d)
}

fn nearest(row: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter().enumerate() {
        let d = sq_dist(row, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn plus_plus(rows: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = rows.len();
    let mut centroids = vec![rows[rng.random_range(0..n)].clone()];
    let mut d2: Vec<f64> = rows.iter().map(|r| sq_dist(r, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = n - 1;
            for (i, w) in d2.iter().enumerate() {
                acc += w;
                if acc > target && *w > 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            // duplicates everywhere: any row will do
            rng.random_range(0..n)
        };
        centroids.push(rows[pick].clone());
        for (i, r) in rows.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(r, &centroids[centroids.len() - 1]));
        }
    }
    centroids
}

struct Run {
    labels: Vec<usize>,
    centroids: Vec<Vec<f64>>,
    inertia: f64,
    history: Vec<f64>,
    iterations: usize,
}

fn lloyd(rows: &[Vec<f64>], mut centroids: Vec<Vec<f64>>) -> Run {
    let (n, d, k) = (rows.len(), rows[0].len(), centroids.len());
    let mut labels: Vec<usize> = rows.iter().map(|r| nearest(r, &centroids).0).collect();
    let mut history = Vec::new();
    let mut iterations = 0;
    loop {
        iterations += 1;
        let mut sums = vec![vec![0.0; d]; k];
        let mut counts = vec![0usize; k];
        for (r, &l) in rows.iter().zip(&labels) {
            counts[l] += 1;
            for (s, v) in sums[l].iter_mut().zip(r) {
                *s += v;
            }
        }
        for j in 0..k {
            if counts[j] > 0 {
                centroids[j] = sums[j].iter().map(|s| s / counts[j] as f64).collect();
            }
        }
        // empty cluster: re-seed at the point farthest from its centroid
        for j in 0..k {
            if counts[j] == 0 {
                let far = (0..n)
                    .max_by(|&a, &b| {
                        sq_dist(&rows[a], &centroids[labels[a]])
                            .total_cmp(&sq_dist(&rows[b], &centroids[labels[b]]))
                            .then_with(|| b.cmp(&a))
                    })
                    .unwrap();
                counts[labels[far]] -= 1;
                labels[far] = j;
                counts[j] = 1;
                centroids[j] = rows[far].clone();
            }
        }
        let inertia: f64 = rows
            .iter()
            .zip(&labels)
            .map(|(r, &l)| sq_dist(r, &centroids[l]))
            .sum();
        history.push(inertia);
        let next: Vec<usize> = rows
            .iter()
            .zip(&labels)
            .map(|(r, &cur)| {
                let (j, dj) = nearest(r, &centroids);
                // keep the current cluster on ties so the fixpoint is reached
                if sq_dist(r, &centroids[cur]) <= dj {
                    cur
                } else {
                    j
                }
            })
            .collect();
        if next == labels || iterations >= MAX_ITERATIONS {
            let inertia = if next == labels {
                inertia
            } else {
                labels = next;
                rows.iter()
                    .zip(&labels)
                    .map(|(r, &l)| sq_dist(r, &centroids[l]))
                    .sum()
            };
            return Run {
                labels,
                centroids,
                inertia,
                history,
                iterations,
            };
        }
        labels = next;
    }
}

fn canonicalize(labels: &[usize], centroids: &[Vec<f64>]) -> (Vec<usize>, Vec<Vec<f64>>) {
    let mut map: Vec<Option<usize>> = vec![None; centroids.len()];
    let mut next = 0;
    for &l in labels {
        if map[l].is_none() {
            map[l] = Some(next);
            next += 1;
        }
    }
    for slot in map.iter_mut().filter(|m| m.is_none()) {
        *slot = Some(next);
        next += 1;
    }
    let map: Vec<usize> = map.into_iter().map(Option::unwrap).collect();
    let mut out = vec![Vec::new(); centroids.len()];
    for (old, c) in centroids.iter().enumerate() {
        out[map[old]] = c.clone();
    }
    (labels.iter().map(|&l| map[l]).collect(), out)
}

/// k-means++ seeded Lloyd iterations, best of `restarts` by inertia. Each
/// restart draws from its own ChaCha stream of `seed`, so the result does
/// not depend on thread scheduling.
pub fn kmeans(rows: &[Vec<f64>], k: usize, seed: u64, restarts: usize) -> Result<KMeansFit> {
    check_rows(rows)?;
    if k < 1 {
        return Err(AuditError::Range {
            what: "cluster count",
            value: k.to_string(),
        });
    }
    if rows.len() < k {
        return Err(AuditError::Infeasible(format!(
            "{} rows cannot form {k} clusters",
            rows.len()
        )));
    }
    let restarts = restarts.max(1);
    let runs: Vec<(usize, Run)> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r as u64);
            (r, lloyd(rows, plus_plus(rows, k, &mut rng)))
        })
        .collect();
    let (restart, best) = runs
        .into_iter()
        .min_by(|(ra, a), (rb, b)| a.inertia.total_cmp(&b.inertia).then_with(|| ra.cmp(rb)))
        .unwrap();
    let (labels, centroids) = canonicalize(&best.labels, &best.centroids);
    Ok(KMeansFit {
        labels,
        centroids,
        inertia: best.inertia,
        inertia_history: best.history,
        restart,
        iterations: best.iterations,
    })
}

/// Mean silhouette with Euclidean distances. Points alone in their
/// cluster score 0.
pub fn silhouette(rows: &[Vec<f64>], labels: &[usize]) -> Result<f64> {
    check_rows(rows)?;
    if rows.len() != labels.len() {
        return Err(AuditError::Shape(format!(
            "{} rows for {} labels",
            rows.len(),
            labels.len()
        )));
    }
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let mut sizes = vec![0usize; k];
    for &l in labels {
        sizes[l] += 1;
    }
    let present = sizes.iter().filter(|&&s| s > 0).count();
    if present < 2 {
        return Err(AuditError::Undefined(
            "silhouette needs at least 2 nonempty clusters".into(),
        ));
    }
    let scores: Vec<f64> = (0..rows.len())
        .into_par_iter()
        .map(|i| {
            let own = labels[i];
            if sizes[own] == 1 {
                return 0.0;
            }
            let mut sums = vec![0.0; k];
            for (j, r) in rows.iter().enumerate() {
                if j != i {
                    sums[labels[j]] += sq_dist(&rows[i], r).sqrt();
                }
            }
            let a = sums[own] / (sizes[own] - 1) as f64;
            let b = (0..k)
                .filter(|&c| c != own && sizes[c] > 0)
                .map(|c| sums[c] / sizes[c] as f64)
                .fold(f64::INFINITY, f64::min);
            let m = a.max(b);
            if m == 0.0 {
                0.0
            } else {
                (b - a) / m
            }
        })
        .collect();
    Ok(scores.iter().sum::<f64>() / rows.len() as f64)
}

/// Outcome of a silhouette sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub model: ClusterModel,
    /// True when the upper end of the range was lowered to n − 1.
    pub clamped: bool,
}

/// Fits every k in `k_min..=k_max` and keeps the highest silhouette; ties
/// go to the smaller k. The range is clamped to n − 1 clusters.
pub fn select_k(rows: &[Vec<f64>], k_min: usize, k_max: usize, seed: u64) -> Result<Selection> {
    check_rows(rows)?;
    let n = rows.len();
    if k_min < 2 || k_min > k_max {
        return Err(AuditError::Range {
            what: "k range",
            value: format!("{k_min}..={k_max}"),
        });
    }
    let upper = k_max.min(n.saturating_sub(1));
    if upper < k_min {
        return Err(AuditError::Infeasible(format!(
            "{n} rows cannot support k ≥ {k_min} with a silhouette"
        )));
    }
    let clamped = upper < k_max;
    if clamped {
        log::warn!("k range {k_min}..={k_max} clamped to {k_min}..={upper} for {n} rows");
    }
    let mut best: Option<ClusterModel> = None;
    let mut scores = Vec::new();
    for k in k_min..=upper {
        let fit = kmeans(rows, k, seed, DEFAULT_RESTARTS)?;
        let s = silhouette(rows, &fit.labels)?;
        scores.push((k, s));
        if best.as_ref().map_or(true, |b| s > b.silhouette) {
            best = Some(ClusterModel {
                k,
                centroids: fit.centroids,
                labels: fit.labels,
                silhouette: s,
                inertia: fit.inertia,
                scores: Vec::new(),
            });
        }
    }
    let mut model = best.expect("nonempty k range");
    model.scores = scores;
    Ok(Selection { model, clamped })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureLoading {
    pub feature: String,
    pub loading: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentLoadings {
    pub component: usize,
    pub explained_variance_ratio: f64,
    /// Sorted by |loading|, largest first.
    pub top: Vec<FeatureLoading>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterScores {
    pub cluster: usize,
    pub size: usize,
    pub mean_scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadingsReport {
    pub clusters: Vec<ClusterScores>,
    pub components: Vec<ComponentLoadings>,
}

/// Mean component score per cluster and the `top_n` heaviest features of
/// each component. `rows` are the inputs the PCA was fitted on.
pub fn loadings_report(
    pca: &PcaModel,
    model: &ClusterModel,
    rows: &[Vec<f64>],
    feature_names: &[String],
    top_n: usize,
) -> Result<LoadingsReport> {
    if rows.len() != model.labels.len() {
        return Err(AuditError::Shape(format!(
            "{} rows for {} labels",
            rows.len(),
            model.labels.len()
        )));
    }
    if feature_names.len() != pca.mean.len() {
        return Err(AuditError::Shape(format!(
            "{} feature names for {} columns",
            feature_names.len(),
            pca.mean.len()
        )));
    }
    let m = pca.n_components();
    let scores = pca.transform(rows);
    let clusters = (0..model.k)
        .map(|c| {
            let members: Vec<&Vec<f64>> = scores
                .iter()
                .zip(&model.labels)
                .filter(|(_, &l)| l == c)
                .map(|(s, _)| s)
                .collect();
            let size = members.len();
            let mean_scores = (0..m)
                .map(|j| {
                    if size == 0 {
                        0.0
                    } else {
                        members.iter().map(|s| s[j]).sum::<f64>() / size as f64
                    }
                })
                .collect();
            ClusterScores {
                cluster: c,
                size,
                mean_scores,
            }
        })
        .collect();
    let components = pca
        .components
        .iter()
        .enumerate()
        .map(|(j, comp)| {
            let mut idx: Vec<usize> = (0..comp.len()).collect();
            idx.sort_by(|&a, &b| {
                comp[b]
                    .abs()
                    .total_cmp(&comp[a].abs())
                    .then_with(|| a.cmp(&b))
            });
            ComponentLoadings {
                component: j + 1,
                explained_variance_ratio: pca.explained_variance_ratio[j],
                top: idx
                    .into_iter()
                    .take(top_n)
                    .map(|i| FeatureLoading {
                        feature: feature_names[i].clone(),
                        loading: comp[i],
                    })
                    .collect(),
            }
        })
        .collect();
    Ok(LoadingsReport {
        clusters,
        components,
    })
}
