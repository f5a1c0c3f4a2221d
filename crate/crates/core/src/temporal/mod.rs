//! Daily series, Fourier periodicity, additive decomposition and hour×day
//! counts. All calendar arithmetic happens in the audit timezone.

mod decompose;
mod spectrum;

use chrono::{Datelike, NaiveDate, Timelike};
use chrono_tz::Tz;
use serde::{Deserialize, Serialize};

use crate::corpus::{CorpusStore, EmailRecord};
use crate::error::{AuditError, Result};

pub use decompose::{decompose_additive, Decomposition};
pub use spectrum::{dft, spectrum, spectrum_peaks, Spectrum, SpectrumBin, SpectrumPeak};

/// Which records a temporal view covers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Scope {
    All,
    Service(String),
}

impl Scope {
    fn records<'a>(
        &'a self,
        store: &'a CorpusStore,
    ) -> Box<dyn Iterator<Item = &'a EmailRecord> + 'a> {
        match self {
            Scope::All => Box::new(store.records().iter()),
            Scope::Service(s) => Box::new(store.service_records(s)),
        }
    }

    fn describe(&self) -> String {
        match self {
            Scope::All => "corpus".into(),
            Scope::Service(s) => format!("service {s}"),
        }
    }
}

/// Emails per calendar day from `day0`, missing days as zeros.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailySeries {
    pub day0: NaiveDate,
    pub values: Vec<f64>,
}

impl DailySeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Counts the scope's timestamped messages per day in `tz`.
pub fn build_daily_series(store: &CorpusStore, scope: &Scope, tz: Tz) -> Result<DailySeries> {
    let days: Vec<NaiveDate> = scope
        .records(store)
        .filter_map(|r| r.received_utc)
        .map(|t| t.with_timezone(&tz).date_naive())
        .collect();
    let (Some(&first), Some(&last)) = (days.iter().min(), days.iter().max()) else {
        return Err(AuditError::EmptyScope(format!(
            "{} has no timestamped messages",
            scope.describe()
        )));
    };
    let mut values = vec![0.0; (last - first).num_days() as usize + 1];
    for d in days {
        values[(d - first).num_days() as usize] += 1.0;
    }
    Ok(DailySeries {
        day0: first,
        values,
    })
}

/// 7×24 counts indexed `[day_of_week][hour]`, Monday = 0.
pub type HourDayMatrix = [[u64; 24]; 7];

pub fn hour_day_matrix(store: &CorpusStore, scope: &Scope, tz: Tz) -> HourDayMatrix {
    let mut m = [[0u64; 24]; 7];
    for t in scope.records(store).filter_map(|r| r.received_utc) {
        let local = t.with_timezone(&tz);
        m[local.weekday().num_days_from_monday() as usize][local.hour() as usize] += 1;
    }
    m
}
