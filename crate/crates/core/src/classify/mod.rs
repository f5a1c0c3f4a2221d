//! Content classification (promotional / CRM / alert) and inter-rater
//! reliability.
//!
//! [`classify_rule_based`] is the offline baseline. [`external`] drives an
//! LLM endpoint with the structured-output classifier prompt and falls back
//! to the rules when the endpoint misbehaves.

pub mod external;
mod kappa;
mod rules;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use external::{
    classify_batch_external, classify_external, classify_with_fallback, AdapterConfig,
    ClassifyError, ExternalOutcome, HttpTransport, Transport,
};
pub use kappa::{cohens_kappa, pairwise_irr, IrrSummary, PairKappa, RaterMatrix};
pub use rules::{classify_rule_based, RuleEngine, RuleScores, CRM_BASELINE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContentLabel {
    Promotional,
    Crm,
    Alert,
}

impl ContentLabel {
    pub const ALL: [ContentLabel; 3] = [
        ContentLabel::Promotional,
        ContentLabel::Crm,
        ContentLabel::Alert,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ContentLabel::Promotional => "promotional",
            ContentLabel::Crm => "crm",
            ContentLabel::Alert => "alert",
        }
    }
}

impl fmt::Display for ContentLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ContentLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "promotional" | "promo" => Ok(ContentLabel::Promotional),
            "crm" => Ok(ContentLabel::Crm),
            "alert" | "alerts" => Ok(ContentLabel::Alert),
            other => Err(format!("unknown content label {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassificationSource {
    Rules,
    External,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub label: ContentLabel,
    /// 1 (weak) to 5 (strong).
    pub confidence: u8,
    pub rationale: String,
    pub source: ClassificationSource,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub low_signal: bool,
    /// Why the external classifier was abandoned for the rules, if it was.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fallback: Option<String>,
}

/// One line of the classification artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifiedMessage {
    pub message_id: String,
    #[serde(flatten)]
    pub classification: Classification,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelShare {
    pub count: usize,
    pub percent: f64,
}

/// Counts and percentages per class, unparseable messages included in the
/// denominator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationSummary {
    pub total: usize,
    pub promotional: LabelShare,
    pub crm: LabelShare,
    pub alert: LabelShare,
    pub unparseable: LabelShare,
    pub external: usize,
    pub fallbacks: usize,
    pub low_signal: usize,
}

impl ClassificationSummary {
    pub fn tally(labels: &BTreeMap<String, Classification>, unparseable: usize) -> Self {
        let total = labels.len() + unparseable;
        let share = |count: usize| LabelShare {
            count,
            percent: if total == 0 {
                0.0
            } else {
                100.0 * count as f64 / total as f64
            },
        };
        let count = |l: ContentLabel| labels.values().filter(|c| c.label == l).count();
        ClassificationSummary {
            total,
            promotional: share(count(ContentLabel::Promotional)),
            crm: share(count(ContentLabel::Crm)),
            alert: share(count(ContentLabel::Alert)),
            unparseable: share(unparseable),
            external: labels
                .values()
                .filter(|c| c.source == ClassificationSource::External)
                .count(),
            fallbacks: labels.values().filter(|c| c.fallback.is_some()).count(),
            low_signal: labels.values().filter(|c| c.low_signal).count(),
        }
    }
}
