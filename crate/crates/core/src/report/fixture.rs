use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cluster::{kmeans, standardize, DEFAULT_RESTARTS};
use crate::error::{AuditError, Result};
use crate::stats::{
    chi_squared_independence, descriptive, one_way_anova, pareto, ContingencyTable, Df,
    MomentConvention, PINNED_CONVENTION,
};

const BUNDLED: &str = include_str!("../../../../fixtures/appendix_table.csv");
pub const FIXTURE_ROWS: usize = 109;

/// Reference values and tolerances the fixture is checked against.
pub mod reference {
    pub const TOTAL_EMAILS: u64 = 4847;
    pub const TOP10_SHARE_PCT: f64 = 63.23;
    pub const TOP10_TOL_PP: f64 = 0.05;
    pub const SKEWNESS: f64 = 3.55;
    pub const SKEWNESS_TOL: f64 = 0.02;
    pub const EXCESS_KURTOSIS: f64 = 12.92;
    pub const KURTOSIS_TOL: f64 = 0.05;
    pub const CHI2: f64 = 2138.858;
    pub const CHI2_DF: f64 = 14.0;
    pub const CHI2_P_BELOW: f64 = 1e-4;
    pub const ANOVA_F: f64 = 3.5095;
    pub const ANOVA_DF: (f64, f64) = (7.0, 101.0);
    pub const ANOVA_P: f64 = 0.002;
    pub const ANOVA_P_TOL: f64 = 0.001;
    /// Relative tolerance on χ² and F.
    pub const STAT_REL_TOL: f64 = 0.01;
    pub const MAX_MISASSIGNED: usize = 2;
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixtureRow {
    pub root_domain: String,
    pub sector: String,
    pub cluster: u8,
    pub total: u64,
    pub promotional: u64,
    pub crm: u64,
    pub alert: u64,
}

/// Per-domain email counts by sector and content type.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixtureTable {
    pub rows: Vec<FixtureRow>,
}

impl FixtureTable {
    pub fn bundled() -> Self {
        Self::from_reader(BUNDLED.as_bytes(), "appendix_table.csv").expect("bundled fixture parses")
    }

    pub fn from_reader<R: std::io::Read>(reader: R, source: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut rows = Vec::new();
        for (i, row) in rdr.deserialize::<FixtureRow>().enumerate() {
            rows.push(row.map_err(|e| AuditError::parse(source, i + 2, e.to_string()))?);
        }
        if rows.is_empty() {
            return Err(AuditError::InsufficientData(format!(
                "{source} has no rows"
            )));
        }
        if rows.len() != FIXTURE_ROWS {
            log::warn!("{source}: {} rows, expected {FIXTURE_ROWS}", rows.len());
        }
        Ok(FixtureTable { rows })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = std::fs::File::open(path).map_err(|e| AuditError::io(path, e))?;
        Self::from_reader(f, &path.display().to_string())
    }

    pub fn total(&self) -> u64 {
        self.rows.iter().map(|r| r.total).sum()
    }

    /// Sector × (promotional, crm, alert) counts, sectors sorted.
    pub fn contingency(&self) -> Result<ContingencyTable> {
        let mut by_sector: BTreeMap<&str, Vec<u64>> = BTreeMap::new();
        for r in &self.rows {
            let c = by_sector.entry(&r.sector).or_insert_with(|| vec![0; 3]);
            c[0] += r.promotional;
            c[1] += r.crm;
            c[2] += r.alert;
        }
        ContingencyTable::new(
            by_sector.keys().map(|s| s.to_string()).collect(),
            ["promotional", "crm", "alert"].map(String::from).to_vec(),
            by_sector.into_values().collect(),
        )
    }

    /// Per-domain totals grouped by sector, sectors sorted.
    pub fn totals_by_sector(&self) -> Vec<(String, Vec<f64>)> {
        let mut by_sector: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
        for r in &self.rows {
            by_sector.entry(&r.sector).or_default().push(r.total as f64);
        }
        by_sector
            .into_iter()
            .map(|(s, v)| (s.to_string(), v))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckLine {
    pub name: String,
    pub passed: bool,
    pub observed: String,
    pub expected: String,
}

impl fmt::Display for CheckLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: observed {}; expected {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.observed,
            self.expected
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureReport {
    pub rows: usize,
    pub convention: MomentConvention,
    pub checks: Vec<CheckLine>,
}

impl FixtureReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

impl fmt::Display for FixtureReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "fixture rows: {}", self.rows)?;
        let conv = match self.convention {
            MomentConvention::SampleAdjusted => {
                "sample-adjusted skewness G1 and unbiased excess kurtosis G2"
            }
            MomentConvention::Population => "population skewness g1 and excess kurtosis g2",
        };
        writeln!(f, "moment convention: {conv}")?;
        for c in &self.checks {
            writeln!(f, "{c}")?;
        }
        Ok(())
    }
}

fn within_rel(x: f64, target: f64, rel: f64) -> bool {
    (x - target).abs() <= rel * target.abs()
}

/// Recomputes the headline numbers from the table and compares them with
/// the reference values. Failures are reported, never raised.
pub fn fixture_check(table: &FixtureTable) -> FixtureReport {
    use reference::*;
    let mut checks = Vec::new();
    let mut line = |name: &str, passed: bool, observed: String, expected: String| {
        checks.push(CheckLine {
            name: name.into(),
            passed,
            observed,
            expected,
        })
    };

    let total = table.total();
    line(
        "total volume",
        total == TOTAL_EMAILS,
        format!(
            "{total} emails over {} root domains (diff {:+})",
            table.rows.len(),
            total as i64 - TOTAL_EMAILS as i64
        ),
        format!("{TOTAL_EMAILS} over {FIXTURE_ROWS}"),
    );

    let values: Vec<(String, f64)> = table
        .rows
        .iter()
        .map(|r| (r.root_domain.clone(), r.total as f64))
        .collect();
    match pareto(&values) {
        Ok(p) => {
            let share = 100.0 * p.top_k_share(10);
            line(
                "top-10 share",
                (share - TOP10_SHARE_PCT).abs() <= TOP10_TOL_PP,
                format!("{share:.4}% (diff {:+.4} pp)", share - TOP10_SHARE_PCT),
                format!("{TOP10_SHARE_PCT}% ± {TOP10_TOL_PP} pp"),
            );
        }
        Err(e) => line(
            "top-10 share",
            false,
            e.to_string(),
            format!("{TOP10_SHARE_PCT}%"),
        ),
    }

    let totals: Vec<f64> = values.iter().map(|v| v.1).collect();
    match descriptive(&totals, PINNED_CONVENTION) {
        Ok(d) => {
            let skew_ok = (d.skewness - SKEWNESS).abs() <= SKEWNESS_TOL;
            let kurt_ok = (d.excess_kurtosis - EXCESS_KURTOSIS).abs() <= KURTOSIS_TOL;
            line(
                "moments",
                skew_ok && kurt_ok,
                format!(
                    "skewness {:.4} ({}), excess kurtosis {:.4} ({})",
                    d.skewness,
                    if skew_ok { "ok" } else { "off" },
                    d.excess_kurtosis,
                    if kurt_ok { "ok" } else { "off" }
                ),
                format!("skewness {SKEWNESS} ± {SKEWNESS_TOL}, excess kurtosis {EXCESS_KURTOSIS} ± {KURTOSIS_TOL}"),
            );
        }
        Err(e) => line("moments", false, e.to_string(), String::new()),
    }

    match table
        .contingency()
        .and_then(|t| chi_squared_independence(&t))
    {
        Ok(t) => {
            let df_ok = t.df == Df::One(CHI2_DF);
            line(
                "chi-squared sector x type",
                within_rel(t.statistic, CHI2, STAT_REL_TOL) && df_ok && t.p_value < CHI2_P_BELOW,
                format!(
                    "chi2 {:.3}, df {}, p {:.3e}",
                    t.statistic,
                    df_string(t.df),
                    t.p_value
                ),
                format!("chi2 {CHI2} ± 1%, df {CHI2_DF}, p < {CHI2_P_BELOW}"),
            );
        }
        Err(e) => line(
            "chi-squared sector x type",
            false,
            e.to_string(),
            String::new(),
        ),
    }

    let groups: Vec<Vec<f64>> = table.totals_by_sector().into_iter().map(|g| g.1).collect();
    match one_way_anova(&groups) {
        Ok(t) => {
            let df_ok = t.df == Df::Two(ANOVA_DF.0, ANOVA_DF.1);
            line(
                "anova totals by sector",
                within_rel(t.statistic, ANOVA_F, STAT_REL_TOL)
                    && df_ok
                    && (t.p_value - ANOVA_P).abs() <= ANOVA_P_TOL,
                format!(
                    "F {:.4}, df {}, p {:.4}",
                    t.statistic,
                    df_string(t.df),
                    t.p_value
                ),
                format!(
                    "F {ANOVA_F} ± 1%, df ({}, {}), p {ANOVA_P} ± {ANOVA_P_TOL}",
                    ANOVA_DF.0, ANOVA_DF.1
                ),
            );
        }
        Err(e) => line(
            "anova totals by sector",
            false,
            e.to_string(),
            String::new(),
        ),
    }

    FixtureReport {
        rows: table.rows.len(),
        convention: PINNED_CONVENTION,
        checks,
    }
}

fn df_string(df: Df) -> String {
    match df {
        Df::One(d) => format!("{d}"),
        Df::Two(a, b) => format!("({a}, {b})"),
    }
}

/// Four columns per domain: total volume and the three content proportions.
pub fn fixture_feature_rows(table: &FixtureTable) -> Vec<Vec<f64>> {
    table
        .rows
        .iter()
        .map(|r| {
            let t = r.total as f64;
            let p = |x: u64| if t > 0.0 { x as f64 / t } else { 0.0 };
            vec![t, p(r.promotional), p(r.crm), p(r.alert)]
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MembershipCheck {
    /// Domains the table marks as cluster 1.
    pub expected_members: Vec<String>,
    /// Domains in the k-means cluster that best matches them.
    pub found_members: Vec<String>,
    pub misassigned: usize,
    pub passed: bool,
}

/// k = 2 clustering of the standardized fixture features, scored against
/// the table's cluster column under the better of the two label matchings.
pub fn fixture_membership_check(table: &FixtureTable, seed: u64) -> Result<MembershipCheck> {
    let z = standardize(&fixture_feature_rows(table))?;
    let fit = kmeans(&z.data, 2, seed, DEFAULT_RESTARTS)?;
    let mismatch = |flip: bool| {
        table
            .rows
            .iter()
            .zip(&fit.labels)
            .filter(|(r, &l)| (r.cluster == 1) != ((l == 1) != flip))
            .count()
    };
    let (a, b) = (mismatch(false), mismatch(true));
    let member_label = if a <= b { 1 } else { 0 };
    let misassigned = a.min(b);
    Ok(MembershipCheck {
        expected_members: table
            .rows
            .iter()
            .filter(|r| r.cluster == 1)
            .map(|r| r.root_domain.clone())
            .collect(),
        found_members: table
            .rows
            .iter()
            .zip(&fit.labels)
            .filter(|(_, &l)| l == member_label)
            .map(|(r, _)| r.root_domain.clone())
            .collect(),
        misassigned,
        passed: misassigned <= reference::MAX_MISASSIGNED,
    })
}
