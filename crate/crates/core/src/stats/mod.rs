//! Descriptive and inferential statistics with in-repo special functions.

mod descriptive;
mod inference;
pub mod special;

use serde::{Deserialize, Serialize};

use crate::error::{AuditError, Result};

pub use descriptive::{
    descriptive, detect_moment_convention, mean, median, Descriptive, MomentConvention,
    PINNED_CONVENTION,
};
pub use inference::{
    average_ranks, chi_squared_independence, kruskal_wallis, one_way_anova, pearson, spearman,
    ContingencyTable, Correlation, Df, TestResult,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoEntry {
    pub name: String,
    pub value: f64,
    pub share: f64,
    pub cumulative: f64,
}

/// Entries sorted by value descending, ties broken by name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pareto {
    pub total: f64,
    pub entries: Vec<ParetoEntry>,
}

impl Pareto {
    /// Share of the total held by the `k` largest entries.
    pub fn top_k_share(&self, k: usize) -> f64 {
        match k.min(self.entries.len()) {
            0 => 0.0,
            k => self.entries[k - 1].cumulative,
        }
    }
}

pub fn pareto(values: &[(String, f64)]) -> Result<Pareto> {
    if let Some((name, v)) = values.iter().find(|(_, v)| !v.is_finite() || *v < 0.0) {
        return Err(AuditError::Range {
            what: "pareto value",
            value: format!("{name}={v}"),
        });
    }
    let total: f64 = values.iter().map(|(_, v)| v).sum();
    if total <= 0.0 {
        return Err(AuditError::InsufficientData(
            "pareto of an all-zero series".into(),
        ));
    }
    let mut sorted: Vec<&(String, f64)> = values.iter().collect();
    sorted.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let mut cum = 0.0;
    let entries = sorted
        .into_iter()
        .map(|(name, value)| {
            cum += value;
            ParetoEntry {
                name: name.clone(),
                value: *value,
                share: value / total,
                cumulative: cum / total,
            }
        })
        .collect();
    Ok(Pareto { total, entries })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn named(vs: &[(&str, f64)]) -> Vec<(String, f64)> {
        vs.iter().map(|(n, v)| (n.to_string(), *v)).collect()
    }

    #[test]
    fn eighty_twenty() {
        let p = pareto(&named(&[("b", 20.0), ("a", 80.0)])).unwrap();
        let shares: Vec<f64> = p.entries.iter().map(|e| e.share).collect();
        let cum: Vec<f64> = p.entries.iter().map(|e| e.cumulative).collect();
        assert_eq!(shares, vec![0.8, 0.2]);
        assert_eq!(cum, vec![0.8, 1.0]);
        assert_eq!(p.top_k_share(1), 0.8);
        assert_eq!(p.top_k_share(10), 1.0);
    }

    #[test]
    fn ties_by_name_and_uniform() {
        let p = pareto(&named(&[("c", 1.0), ("a", 1.0), ("b", 1.0), ("d", 1.0)])).unwrap();
        let names: Vec<&str> = p.entries.iter().map(|e| e.name.as_str()).collect();
        assert_eq!(names, vec!["a", "b", "c", "d"]);
        assert!(p.entries.iter().all(|e| e.share == 0.25));
    }

    #[test]
    fn all_zero_rejected() {
        assert!(pareto(&named(&[("a", 0.0), ("b", 0.0)])).is_err());
        assert!(pareto(&named(&[("a", -1.0), ("b", 2.0)])).is_err());
    }
}
