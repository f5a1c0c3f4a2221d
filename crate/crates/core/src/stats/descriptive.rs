use serde::{Deserialize, Serialize};

use crate::error::{AuditError, Result};

/// How the third and fourth moments are normalised.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentConvention {
    /// g1 = m3/m2^1.5, g2 = m4/m2² − 3 (biased moments).
    Population,
    /// Adjusted Fisher–Pearson G1 and the unbiased excess-kurtosis estimator G2.
    SampleAdjusted,
}

/// The convention that reproduces the reference moments of the bundled
/// fixture table (skewness 3.55, excess kurtosis 12.92).
pub const PINNED_CONVENTION: MomentConvention = MomentConvention::SampleAdjusted;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Descriptive {
    pub n: usize,
    pub mean: f64,
    pub median: f64,
    /// Sample standard deviation (n − 1).
    pub std_dev: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    pub convention: MomentConvention,
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Median with the average-of-middle-two rule for even n.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
    m3: f64,
    m4: f64,
}

fn central_moments(values: &[f64]) -> Moments {
    let n = values.len() as f64;
    let mean = mean(values);
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &x in values {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    Moments {
        n,
        mean,
        m2: m2 / n,
        m3: m3 / n,
        m4: m4 / n,
    }
}

fn shape(m: &Moments, convention: MomentConvention) -> (f64, f64) {
    let g1 = m.m3 / m.m2.powf(1.5);
    let g2 = m.m4 / (m.m2 * m.m2) - 3.0;
    match convention {
        MomentConvention::Population => (g1, g2),
        MomentConvention::SampleAdjusted => {
            let n = m.n;
            let skew = g1 * (n * (n - 1.0)).sqrt() / (n - 2.0);
            let kurt = ((n + 1.0) * g2 + 6.0) * (n - 1.0) / ((n - 2.0) * (n - 3.0));
            (skew, kurt)
        }
    }
}

pub fn descriptive(values: &[f64], convention: MomentConvention) -> Result<Descriptive> {
    let n = values.len();
    for (need, moment) in [
        (2, "mean and median"),
        (3, "skewness"),
        (4, "excess kurtosis"),
    ] {
        if n < need {
            return Err(AuditError::InsufficientData(format!(
                "{moment} needs n ≥ {need}, got {n}"
            )));
        }
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(AuditError::Range {
            what: "descriptive input",
            value: "non-finite value".into(),
        });
    }
    let m = central_moments(values);
    if m.m2 == 0.0 {
        return Err(AuditError::Undefined(
            "skewness and kurtosis of constant data".into(),
        ));
    }
    let (skewness, excess_kurtosis) = shape(&m, convention);
    Ok(Descriptive {
        n,
        mean: m.mean,
        median: median(values),
        std_dev: (m.m2 * m.n / (m.n - 1.0)).sqrt(),
        skewness,
        excess_kurtosis,
        convention,
    })
}

/// Picks the convention whose (skewness, excess kurtosis) lands closest to
/// the targets, measured by the larger of the two absolute errors.
pub fn detect_moment_convention(
    values: &[f64],
    target_skewness: f64,
    target_kurtosis: f64,
) -> Result<MomentConvention> {
    let mut best = None;
    for c in [
        MomentConvention::Population,
        MomentConvention::SampleAdjusted,
    ] {
        let d = descriptive(values, c)?;
        let err = (d.skewness - target_skewness)
            .abs()
            .max((d.excess_kurtosis - target_kurtosis).abs());
        if best.map_or(true, |(_, e)| err < e) {
            best = Some((c, err));
        }
    }
    Ok(best.expect("two candidates").0)
}
