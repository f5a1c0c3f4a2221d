use serde::{Deserialize, Serialize};

use super::special::{chi2_sf, f_sf, t_two_sided};
use crate::error::{AuditError, Result};

/// Degrees of freedom: one value for χ²-type tests, a pair for F.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Df {
    One(f64),
    Two(f64, f64),
}

/// Statistic, degrees of freedom and p-value. An infinite statistic
/// serializes as `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub df: Df,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContingencyTable {
    pub row_labels: Vec<String>,
    pub col_labels: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ContingencyTable {
    pub fn new(
        row_labels: Vec<String>,
        col_labels: Vec<String>,
        counts: Vec<Vec<u64>>,
    ) -> Result<Self> {
        if counts.len() != row_labels.len() || counts.iter().any(|r| r.len() != col_labels.len()) {
            return Err(AuditError::Shape(format!(
                "counts do not form a {}×{} table",
                row_labels.len(),
                col_labels.len()
            )));
        }
        Ok(ContingencyTable {
            row_labels,
            col_labels,
            counts,
        })
    }

    pub fn row_totals(&self) -> Vec<u64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn col_totals(&self) -> Vec<u64> {
        (0..self.col_labels.len())
            .map(|j| self.counts.iter().map(|r| r[j]).sum())
            .collect()
    }

    /// Copy without rows or columns whose marginal total is zero.
    pub fn without_empty_marginals(&self) -> ContingencyTable {
        let rows: Vec<usize> = (0..self.row_labels.len())
            .filter(|&i| self.row_totals()[i] > 0)
            .collect();
        let ct = self.col_totals();
        let cols: Vec<usize> = (0..self.col_labels.len()).filter(|&j| ct[j] > 0).collect();
        ContingencyTable {
            row_labels: rows.iter().map(|&i| self.row_labels[i].clone()).collect(),
            col_labels: cols.iter().map(|&j| self.col_labels[j].clone()).collect(),
            counts: rows
                .iter()
                .map(|&i| cols.iter().map(|&j| self.counts[i][j]).collect())
                .collect(),
        }
    }
}

/// Pearson χ² test of independence, no continuity correction. Rows and
/// columns with a zero marginal are dropped (with a warning) first.
pub fn chi_squared_independence(table: &ContingencyTable) -> Result<TestResult> {
    let t = table.without_empty_marginals();
    if t.row_labels.len() != table.row_labels.len() || t.col_labels.len() != table.col_labels.len()
    {
        log::warn!(
            "χ²: dropped {} row(s) and {} column(s) with zero marginal",
            table.row_labels.len() - t.row_labels.len(),
            table.col_labels.len() - t.col_labels.len()
        );
    }
    let (r, c) = (t.row_labels.len(), t.col_labels.len());
    if r < 2 || c < 2 {
        return Err(AuditError::InsufficientData(format!(
            "χ² needs at least a 2×2 table with nonzero marginals, got {r}×{c}"
        )));
    }
    let rows = t.row_totals();
    let cols = t.col_totals();
    let n: f64 = rows.iter().sum::<u64>() as f64;
    let mut stat = 0.0;
    for (i, row) in t.counts.iter().enumerate() {
        for (j, &o) in row.iter().enumerate() {
            let e = rows[i] as f64 * cols[j] as f64 / n;
            stat += (o as f64 - e).powi(2) / e;
        }
    }
    let df = ((r - 1) * (c - 1)) as f64;
    Ok(TestResult {
        statistic: stat,
        df: Df::One(df),
        p_value: chi2_sf(stat, df),
    })
}

fn check_groups(groups: &[Vec<f64>], what: &str) -> Result<usize> {
    if groups.len() < 2 {
        return Err(AuditError::InsufficientData(format!(
            "{what} needs at least 2 groups"
        )));
    }
    if let Some(i) = groups.iter().position(Vec::is_empty) {
        return Err(AuditError::InsufficientData(format!(
            "{what}: group {i} is empty"
        )));
    }
    if groups.iter().flatten().any(|v| !v.is_finite()) {
        return Err(AuditError::Range {
            what: "test input",
            value: "non-finite value".into(),
        });
    }
    Ok(groups.iter().map(Vec::len).sum())
}

/// One-way ANOVA. Zero within-group variance with differing means gives
/// F = ∞ and p = 0; all values equal gives F = 0 and p = 1.
pub fn one_way_anova(groups: &[Vec<f64>]) -> Result<TestResult> {
    let n = check_groups(groups, "ANOVA")?;
    let g = groups.len();
    if n <= g {
        return Err(AuditError::InsufficientData(format!(
            "ANOVA needs more observations ({n}) than groups ({g})"
        )));
    }
    let grand = groups.iter().flatten().sum::<f64>() / n as f64;
    let mut ssb = 0.0;
    let mut ssw = 0.0;
    for grp in groups {
        let m = grp.iter().sum::<f64>() / grp.len() as f64;
        ssb += grp.len() as f64 * (m - grand).powi(2);
        ssw += grp.iter().map(|x| (x - m).powi(2)).sum::<f64>();
    }
    let (d1, d2) = ((g - 1) as f64, (n - g) as f64);
    let scale = groups
        .iter()
        .flatten()
        .map(|x| x * x)
        .sum::<f64>()
        .max(f64::MIN_POSITIVE);
    let (statistic, p_value) = if ssw <= scale * 1e-24 {
        if ssb <= scale * 1e-24 {
            (0.0, 1.0)
        } else {
            (f64::INFINITY, 0.0)
        }
    } else {
        let f = (ssb / d1) / (ssw / d2);
        (f, f_sf(f, d1, d2))
    };
    Ok(TestResult {
        statistic,
        df: Df::Two(d1, d2),
        p_value,
    })
}

/// Average ranks (1-based); ties share the mean of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Kruskal–Wallis H with tie correction and a χ²(g − 1) p-value.
pub fn kruskal_wallis(groups: &[Vec<f64>]) -> Result<TestResult> {
    let n = check_groups(groups, "Kruskal–Wallis")?;
    if n < 5 {
        return Err(AuditError::InsufficientData(format!(
            "Kruskal–Wallis needs n ≥ 5, got {n}"
        )));
    }
    let all: Vec<f64> = groups.iter().flatten().copied().collect();
    let ranks = average_ranks(&all);
    let nf = n as f64;
    let mut sum = 0.0;
    let mut at = 0;
    for grp in groups {
        let r: f64 = ranks[at..at + grp.len()].iter().sum();
        sum += r * r / grp.len() as f64;
        at += grp.len();
    }
    let h = 12.0 / (nf * (nf + 1.0)) * sum - 3.0 * (nf + 1.0);
    let mut sorted = all.clone();
    sorted.sort_by(f64::total_cmp);
    let mut ties = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let j = sorted[i..].iter().take_while(|&&v| v == sorted[i]).count();
        let t = j as f64;
        ties += t * t * t - t;
        i += j;
    }
    let correction = 1.0 - ties / (nf * nf * nf - nf);
    let df = (groups.len() - 1) as f64;
    if correction <= 0.0 {
        return Ok(TestResult {
            statistic: 0.0,
            df: Df::One(df),
            p_value: 1.0,
        });
    }
    let h = (h / correction).max(0.0);
    Ok(TestResult {
        statistic: h,
        df: Df::One(df),
        p_value: chi2_sf(h, df),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub r: f64,
    /// Two-sided, from t = r·√((n − 2)/(1 − r²)) with n − 2 df.
    pub p_value: f64,
    pub n: usize,
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<Correlation> {
    if x.len() != y.len() {
        return Err(AuditError::Shape(format!(
            "correlation inputs differ in length: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    let n = x.len();
    if n < 3 {
        return Err(AuditError::InsufficientData(format!(
            "correlation needs n ≥ 3, got {n}"
        )));
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(AuditError::Undefined(
            "correlation with a zero-variance variable".into(),
        ));
    }
    let r = (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0);
    let df = (n - 2) as f64;
    let p_value = if 1.0 - r.abs() < 1e-15 {
        0.0
    } else {
        t_two_sided(r * (df / (1.0 - r * r)).sqrt(), df)
    };
    Ok(Correlation { r, p_value, n })
}

/// Pearson correlation of average ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<Correlation> {
    if x.len() != y.len() {
        return pearson(x, y);
    }
    pearson(&average_ranks(x), &average_ranks(y))
}
