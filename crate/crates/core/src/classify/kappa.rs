use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{AuditError, Result};

/// Unweighted Cohen's kappa between two aligned label lists.
pub fn cohens_kappa<T: Ord>(a: &[T], b: &[T]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(AuditError::Shape(format!(
            "rater lists differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(AuditError::InsufficientData("no items to compare".into()));
    }
    let n = a.len() as f64;
    let mut agree = 0usize;
    let mut ma: BTreeMap<&T, usize> = BTreeMap::new();
    let mut mb: BTreeMap<&T, usize> = BTreeMap::new();
    for (x, y) in a.iter().zip(b) {
        if x == y {
            agree += 1;
        }
        *ma.entry(x).or_default() += 1;
        *mb.entry(y).or_default() += 1;
    }
    let p_o = agree as f64 / n;
    let p_e: f64 = ma
        .iter()
        .map(|(k, &ca)| ca as f64 * mb.get(k).copied().unwrap_or(0) as f64)
        .sum::<f64>()
        / (n * n);
    if (1.0 - p_e).abs() < 1e-15 {
        // single shared label: agreement is complete by construction
        return Ok(if agree == a.len() { 1.0 } else { 0.0 });
    }
    Ok((p_o - p_e) / (1.0 - p_e))
}

/// Complete-design rating matrix: every rater labels every item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RaterMatrix {
    pub items: Vec<String>,
    pub labels: BTreeMap<String, Vec<String>>,
}

impl RaterMatrix {
    pub fn new(items: Vec<String>, labels: BTreeMap<String, Vec<String>>) -> Result<Self> {
        for (rater, ls) in &labels {
            if ls.len() != items.len() {
                return Err(AuditError::Shape(format!(
                    "rater {rater} labelled {} of {} items",
                    ls.len(),
                    items.len()
                )));
            }
            if let Some(pos) = ls.iter().position(|l| l.trim().is_empty()) {
                return Err(AuditError::Integrity(format!(
                    "rater {rater} left item {} unlabelled",
                    items[pos]
                )));
            }
        }
        Ok(RaterMatrix { items, labels })
    }

    /// Reads `item,rater1,rater2,...` with a header row naming the raters.
    pub fn from_reader<R: std::io::Read>(reader: R, source: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(reader);
        let header = rdr.headers()?.clone();
        if header.len() < 2 {
            return Err(AuditError::parse(
                source,
                1,
                "expected item column plus rater columns",
            ));
        }
        let raters: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let mut items = Vec::new();
        let mut cols: Vec<Vec<String>> = vec![Vec::new(); raters.len()];
        for (i, row) in rdr.records().enumerate() {
            let row = row.map_err(|e| AuditError::parse(source, i + 2, e.to_string()))?;
            if row.len() != header.len() {
                return Err(AuditError::parse(source, i + 2, "incomplete rating row"));
            }
            items.push(row[0].to_string());
            for (c, col) in cols.iter_mut().enumerate() {
                col.push(row[c + 1].to_lowercase());
            }
        }
        Self::new(items, raters.into_iter().zip(cols).collect())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = std::fs::File::open(path).map_err(|e| AuditError::io(path, e))?;
        Self::from_reader(f, &path.display().to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairKappa {
    pub a: String,
    pub b: String,
    pub kappa: f64,
    pub machine: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrrSummary {
    /// None when fewer than two human raters remain.
    pub human_human_mean: Option<f64>,
    pub machine_human_mean: Option<f64>,
    pub pairs: Vec<PairKappa>,
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| s / n as f64)
}

/// Mean kappa over human pairs and, when a machine rater is named, over
/// machine/human pairs.
pub fn pairwise_irr(matrix: &RaterMatrix, machine: Option<&str>) -> Result<IrrSummary> {
    if matrix.labels.len() < 2 {
        return Err(AuditError::InsufficientData(format!(
            "need at least 2 raters, got {}",
            matrix.labels.len()
        )));
    }
    if let Some(m) = machine {
        if !matrix.labels.contains_key(m) {
            return Err(AuditError::Config(format!(
                "machine rater {m:?} not in matrix"
            )));
        }
    }
    let raters: Vec<&String> = matrix.labels.keys().collect();
    let mut pairs = Vec::new();
    for (i, a) in raters.iter().enumerate() {
        for b in &raters[i + 1..] {
            let kappa = cohens_kappa(&matrix.labels[*a], &matrix.labels[*b])?;
            pairs.push(PairKappa {
                a: (*a).clone(),
                b: (*b).clone(),
                kappa,
                machine: machine.is_some_and(|m| m == a.as_str() || m == b.as_str()),
            });
        }
    }
    Ok(IrrSummary {
        human_human_mean: mean(pairs.iter().filter(|p| !p.machine).map(|p| p.kappa)),
        machine_human_mean: machine
            .and_then(|_| mean(pairs.iter().filter(|p| p.machine).map(|p| p.kappa))),
        pairs,
    })
}
