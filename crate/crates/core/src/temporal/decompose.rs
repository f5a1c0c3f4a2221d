use serde::{Deserialize, Serialize};

use super::DailySeries;
use crate::error::{AuditError, Result};

/// Classical additive decomposition. `trend` and `residual` are `None` at
/// the ends, where the centred window does not fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub period: usize,
    pub trend: Vec<Option<f64>>,
    pub seasonal: Vec<f64>,
    pub residual: Vec<Option<f64>>,
    /// Var(seasonal)/Var(observed) over indices where the trend is defined.
    pub seasonal_variance_share: f64,
}

fn moving_average(x: &[f64], period: usize) -> Vec<Option<f64>> {
    let n = x.len();
    let half = period / 2;
    let mut out = vec![None; n];
    for (i, slot) in out.iter_mut().enumerate().take(n - half).skip(half) {
        let window = &x[i - half..=i + half];
        *slot = Some(if period % 2 == 1 {
            window.iter().sum::<f64>() / period as f64
        } else {
            // 2×p average: half weight on both ends
            let inner: f64 = window[1..window.len() - 1].iter().sum();
            (inner + 0.5 * (window[0] + window[window.len() - 1])) / period as f64
        });
    }
    out
}

fn variance(xs: &[f64]) -> f64 {
    let m = xs.iter().sum::<f64>() / xs.len() as f64;
    xs.iter().map(|v| (v - m).powi(2)).sum::<f64>() / xs.len() as f64
}

pub fn decompose_additive(series: &DailySeries, period: usize) -> Result<Decomposition> {
    let x = &series.values;
    let n = x.len();
    if period < 2 {
        return Err(AuditError::Range {
            what: "seasonal period",
            value: period.to_string(),
        });
    }
    if n < 2 * period {
        return Err(AuditError::InsufficientData(format!(
            "decomposition with period {period} needs {} days, got {n}",
            2 * period
        )));
    }
    let trend = moving_average(x, period);

    let mut sums = vec![0.0; period];
    let mut counts = vec![0usize; period];
    for (i, t) in trend.iter().enumerate() {
        if let Some(t) = t {
            sums[i % period] += x[i] - t;
            counts[i % period] += 1;
        }
    }
    let effects: Vec<f64> = sums
        .iter()
        .zip(&counts)
        .map(|(s, &c)| s / c as f64)
        .collect();
    let centre = effects.iter().sum::<f64>() / period as f64;
    let effects: Vec<f64> = effects.iter().map(|e| e - centre).collect();
    let seasonal: Vec<f64> = (0..n).map(|i| effects[i % period]).collect();
    let residual: Vec<Option<f64>> = trend
        .iter()
        .enumerate()
        .map(|(i, t)| t.map(|t| x[i] - t - seasonal[i]))
        .collect();

    let interior: Vec<usize> = (0..n).filter(|&i| trend[i].is_some()).collect();
    let obs: Vec<f64> = interior.iter().map(|&i| x[i]).collect();
    let seas: Vec<f64> = interior.iter().map(|&i| seasonal[i]).collect();
    let v_obs = variance(&obs);
    let seasonal_variance_share = if v_obs > 0.0 {
        (variance(&seas) / v_obs).clamp(0.0, 1.0)
    } else {
        0.0
    };
    Ok(Decomposition {
        period,
        trend,
        seasonal,
        residual,
        seasonal_variance_share,
    })
}
