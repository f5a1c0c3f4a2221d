use std::collections::BTreeMap;

use chrono::{Datelike, Timelike};
use chrono_tz::Tz;
use serde::{Deserialize, Serialize};

use crate::classify::{Classification, ContentLabel};
use crate::corpus::CorpusStore;
use crate::error::{AuditError, Result};
use crate::netintel::SenderProfile;

pub const FEATURE_COUNT: usize = 36;

/// Column names in matrix order.
pub fn feature_names() -> Vec<String> {
    let mut names: Vec<String> = (0..24).map(|h| format!("hour_{h:02}")).collect();
    names.extend(
        ["mon", "tue", "wed", "thu", "fri", "sat", "sun"]
            .iter()
            .map(|d| format!("dow_{d}")),
    );
    names.push("marketing_flag".into());
    names.extend(["mix_promotional", "mix_crm", "mix_alert"].map(String::from));
    names.push("total_volume".into());
    names
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub hourly: [f64; 24],
    /// Monday first.
    pub weekly: [f64; 7],
    pub marketing_flag: f64,
    /// Promotional, CRM, alert proportions of the classified messages.
    pub content_mix: [f64; 3],
    pub total_volume: f64,
}

impl FeatureVector {
    pub fn to_row(&self) -> Vec<f64> {
        let mut row = Vec::with_capacity(FEATURE_COUNT);
        row.extend_from_slice(&self.hourly);
        row.extend_from_slice(&self.weekly);
        row.push(self.marketing_flag);
        row.extend_from_slice(&self.content_mix);
        row.push(self.total_volume);
        row
    }
}

/// Per-company feature rows, companies sorted by name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub companies: Vec<String>,
    pub vectors: Vec<FeatureVector>,
}

impl FeatureMatrix {
    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.vectors.iter().map(FeatureVector::to_row).collect()
    }
}

/// Builds one 36-column row per service. Hour and weekday counts cover
/// messages with a timestamp; `total_volume` counts every message,
/// unparseable ones included.
pub fn build_features(
    store: &CorpusStore,
    profiles: &[SenderProfile],
    classifications: &BTreeMap<String, Classification>,
    tz: Tz,
) -> Result<FeatureMatrix> {
    let marketing: BTreeMap<&str, bool> = profiles
        .iter()
        .map(|p| (p.service_name.as_str(), p.uses_marketing_provider))
        .collect();
    let mut companies = Vec::new();
    let mut vectors = Vec::new();
    for service in store.services() {
        let mut v = FeatureVector {
            hourly: [0.0; 24],
            weekly: [0.0; 7],
            marketing_flag: if marketing.get(service).copied().unwrap_or(false) {
                1.0
            } else {
                0.0
            },
            content_mix: [0.0; 3],
            total_volume: 0.0,
        };
        let mut mix = [0.0; 3];
        for r in store.service_records(service) {
            v.total_volume += 1.0;
            if let Some(t) = r.received_utc {
                let local = t.with_timezone(&tz);
                v.hourly[local.hour() as usize] += 1.0;
                v.weekly[local.weekday().num_days_from_monday() as usize] += 1.0;
            }
            if let Some(c) = classifications.get(&r.message_id) {
                let i = ContentLabel::ALL
                    .iter()
                    .position(|&l| l == c.label)
                    .unwrap();
                mix[i] += 1.0;
            }
        }
        let classified: f64 = mix.iter().sum();
        if classified > 0.0 {
            v.content_mix = mix.map(|m| m / classified);
        }
        companies.push(service.to_string());
        vectors.push(v);
    }
    if companies.len() < 2 {
        return Err(AuditError::InsufficientData(format!(
            "feature matrix needs at least 2 companies, got {}",
            companies.len()
        )));
    }
    Ok(FeatureMatrix { companies, vectors })
}

/// Z-scored matrix and the parameters used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardized {
    pub data: Vec<Vec<f64>>,
    pub means: Vec<f64>,
    /// Population standard deviations.
    pub std_devs: Vec<f64>,
    /// Columns with zero variance, emitted as zeros.
    pub constant_columns: Vec<usize>,
}

pub fn standardize(rows: &[Vec<f64>]) -> Result<Standardized> {
    let n = rows.len();
    if n < 2 {
        return Err(AuditError::InsufficientData(format!(
            "standardize needs at least 2 rows, got {n}"
        )));
    }
    let d = rows[0].len();
    if rows.iter().any(|r| r.len() != d) {
        return Err(AuditError::Shape("rows have different lengths".into()));
    }
    let means: Vec<f64> = (0..d)
        .map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n as f64)
        .collect();
    let std_devs: Vec<f64> = (0..d)
        .map(|j| (rows.iter().map(|r| (r[j] - means[j]).powi(2)).sum::<f64>() / n as f64).sqrt())
        .collect();
    let constant_columns: Vec<usize> = (0..d)
        .filter(|&j| std_devs[j] <= 1e-12 * means[j].abs().max(1.0))
        .collect();
    if !constant_columns.is_empty() {
        log::info!(
            "standardize: {} constant column(s) set to zero",
            constant_columns.len()
        );
    }
    let data = rows
        .iter()
        .map(|r| {
            (0..d)
                .map(|j| {
                    if constant_columns.contains(&j) {
                        0.0
                    } else {
                        (r[j] - means[j]) / std_devs[j]
                    }
                })
                .collect()
        })
        .collect();
    Ok(Standardized {
        data,
        means,
        std_devs,
        constant_columns,
    })
}
