use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::DailySeries;
use crate::error::{AuditError, Result};

const MIN_LEN: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumPeak {
    /// Cycles per day.
    pub frequency: f64,
    pub magnitude: f64,
    pub period_days: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumBin {
    pub frequency: f64,
    pub magnitude: f64,
    pub period_days: f64,
    pub is_peak: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    /// Bins 1..=N/2 (DC excluded).
    pub bins: Vec<SpectrumBin>,
    pub threshold: f64,
    pub sigma_multiplier: f64,
    /// Peak bins sorted by magnitude, strongest first.
    pub peaks: Vec<SpectrumPeak>,
}

/// Unnormalised forward DFT.
pub fn dft(values: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    if !buf.is_empty() {
        FftPlanner::new()
            .plan_fft_forward(buf.len())
            .process(&mut buf);
    }
    buf
}

/// Magnitude spectrum of the mean-removed series. A bin is a peak when its
/// magnitude exceeds mean + `sigma_multiplier`·sd of all non-DC magnitudes
/// (population sd).
pub fn spectrum(series: &DailySeries, sigma_multiplier: f64) -> Result<Spectrum> {
    let n = series.len();
    if n < MIN_LEN {
        return Err(AuditError::InsufficientData(format!(
            "spectrum needs at least {MIN_LEN} days, got {n}"
        )));
    }
    let mean = series.values.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = series.values.iter().map(|v| v - mean).collect();
    let x = dft(&centered);
    let mags: Vec<f64> = (1..=n / 2).map(|k| x[k].norm()).collect();
    let m = mags.iter().sum::<f64>() / mags.len() as f64;
    let sd = (mags.iter().map(|v| (v - m).powi(2)).sum::<f64>() / mags.len() as f64).sqrt();
    let threshold = m + sigma_multiplier * sd;
    // rounding noise of a flat series is not signal
    let scale = series
        .values
        .iter()
        .fold(0.0f64, |a, v| a.max(v.abs()))
        .max(1.0);
    let floor = 1e-9 * n as f64 * scale;

    let bins: Vec<SpectrumBin> = mags
        .iter()
        .enumerate()
        .map(|(i, &magnitude)| {
            let frequency = (i + 1) as f64 / n as f64;
            SpectrumBin {
                frequency,
                magnitude,
                period_days: 1.0 / frequency,
                is_peak: magnitude > threshold && magnitude > floor,
            }
        })
        .collect();
    let mut peaks: Vec<SpectrumPeak> = bins
        .iter()
        .filter(|b| b.is_peak)
        .map(|b| SpectrumPeak {
            frequency: b.frequency,
            magnitude: b.magnitude,
            period_days: b.period_days,
        })
        .collect();
    peaks.sort_by(|a, b| {
        b.magnitude
            .total_cmp(&a.magnitude)
            .then_with(|| a.frequency.total_cmp(&b.frequency))
    });
    Ok(Spectrum {
        bins,
        threshold,
        sigma_multiplier,
        peaks,
    })
}

/// Peaks at the 2σ level.
pub fn spectrum_peaks(series: &DailySeries) -> Result<Vec<SpectrumPeak>> {
    Ok(spectrum(series, 2.0)?.peaks)
}
