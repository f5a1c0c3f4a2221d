//! Inputs shared by the benchmarks.

use chrono::NaiveDate;
use inboxaudit_core::report::{fixture_feature_rows, FixtureTable};
use inboxaudit_core::synth::{generate, SynthSpec};
use inboxaudit_core::temporal::DailySeries;

/// Rendered `.eml` messages of a seeded demo corpus plus its registry.
pub fn demo_corpus(services: usize, days: u32) -> (Vec<String>, String) {
    let c = generate(&SynthSpec {
        services,
        days,
        ..SynthSpec::default()
    })
    .expect("demo corpus");
    (
        c.emails.into_iter().map(|(_, raw)| raw).collect(),
        c.registry_csv,
    )
}

/// The reference table's four-column feature rows (109 companies).
pub fn fixture_rows() -> Vec<Vec<f64>> {
    fixture_feature_rows(&FixtureTable::bundled())
}

/// A weekly sinusoid with a slow drift.
pub fn weekly_series(days: usize) -> DailySeries {
    DailySeries {
        day0: NaiveDate::from_ymd_opt(2023, 9, 1).expect("date"),
        values: (0..days)
            .map(|t| {
                let t = t as f64;
                40.0 + 0.01 * t + 5.0 * (2.0 * std::f64::consts::PI * t / 7.0).sin()
            })
            .collect(),
    }
}
