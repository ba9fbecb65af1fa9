use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use super::{ClickTrain, QeCurve};
use crate::error::{domain, Error, Result};

/// Normalized autocorrelation for lags `1..=max_lag` (index 0 is lag 1).
pub fn autocorrelation(train: &ClickTrain, max_lag: usize) -> Result<Vec<f64>> {
    let n = train.bins.len();
    if max_lag == 0 || max_lag >= n {
        return Err(Error::Precondition(format!(
            "max_lag {max_lag} must lie in 1..{n}"
        )));
    }
    let clicks: Vec<usize> = train
        .bins
        .iter()
        .enumerate()
        .filter_map(|(k, &b)| b.then_some(k))
        .collect();
    if clicks.is_empty() {
        return Err(Error::UndefinedNormalization(
            "train has no clicks".into(),
        ));
    }
    let mean = clicks.len() as f64 / n as f64;
    let mut pairs = vec![0u64; max_lag + 1];
    for &k in &clicks {
        let end = max_lag.min(n - 1 - k);
        for (lag, slot) in pairs.iter_mut().enumerate().take(end + 1).skip(1) {
            if train.bins[k + lag] {
                *slot += 1;
            }
        }
    }
    Ok((1..=max_lag)
        .map(|lag| pairs[lag] as f64 / (n - lag) as f64 / (mean * mean))
        .collect())
}

/// First lag (1-based) at which `|gamma - 1| <= band`.
pub fn band_entry_lag(gamma: &[f64], band: f64) -> Option<usize> {
    gamma.iter().position(|g| (g - 1.0).abs() <= band).map(|k| k + 1)
}

/// Renewal-process prediction of the binned normalized autocorrelation
/// after a click: the bias recovers as `i_bias * (1 - exp(-t / tau_e))`
/// and detection follows `qe`. The continuous curve is averaged over the
/// triangular distribution of time differences between two bins `lag`
/// apart.
pub fn renewal_gamma(qe: &QeCurve, i_bias: f64, tau_e: f64, bin_width: f64, max_lag: usize) -> Result<Vec<f64>> {
    if !(tau_e > 0.0 && bin_width > 0.0) {
        return domain("tau_e and bin width must be > 0");
    }
    let q0 = qe.eval(i_bias);
    if !(q0 > 0.0) {
        return Err(Error::UndefinedNormalization(
            "QE at the bias current is zero".into(),
        ));
    }
    let cont = |t: f64| {
        if t <= 0.0 {
            0.0
        } else {
            qe.eval(i_bias * -(-t / tau_e).exp_m1()) / q0
        }
    };
    const N: usize = 400;
    Ok((1..=max_lag)
        .map(|lag| {
            // midpoint rule on u in (-1, 1) with weight 1 - |u|
            (0..N)
                .map(|j| {
                    let u = -1.0 + (j as f64 + 0.5) * 2.0 / N as f64;
                    (1.0 - u.abs()) * cont((lag as f64 + u) * bin_width)
                })
                .sum::<f64>()
                * 2.0
                / N as f64
        })
        .collect())
}

/// Histogram of detection phases within the gate, scaled so the tallest
/// bin is 1.
pub fn gate_phase_histogram(train: &ClickTrain, n_bins: usize) -> Result<Vec<f64>> {
    let phases = train
        .phases
        .as_ref()
        .ok_or_else(|| Error::Precondition("train has no phase times".into()))?;
    if n_bins == 0 {
        return domain("histogram needs at least one bin");
    }
    let mut counts = vec![0u64; n_bins];
    for p in phases.iter().flatten() {
        let x = (p / train.bin_width).clamp(0.0, 1.0 - f64::EPSILON);
        counts[(x * n_bins as f64) as usize] += 1;
    }
    let peak = *counts.iter().max().unwrap_or(&0);
    if peak == 0 {
        return Err(Error::UndefinedNormalization(
            "no detections with a phase".into(),
        ));
    }
    Ok(counts.iter().map(|&c| c as f64 / peak as f64).collect())
}

/// Width (s) of the contiguous run of histogram bins around the peak that
/// stay within `tolerance` of it.
pub fn flat_top_width(hist: &[f64], gate_period: f64, tolerance: f64) -> f64 {
    let Some((peak, _)) = hist
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
    else {
        return 0.0;
    };
    let level = hist[peak] * (1.0 - tolerance);
    let lo = (0..=peak).rev().take_while(|&k| hist[k] >= level).count();
    let hi = (peak + 1..hist.len()).take_while(|&k| hist[k] >= level).count();
    (lo + hi) as f64 * gate_period / hist.len() as f64
}

/// Point estimate with a two-sided confidence interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Estimate {
    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

/// Wilson score interval for `k` successes in `n` trials.
pub fn wilson_interval(k: usize, n: usize, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = k as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

fn z_for(confidence: f64) -> Result<f64> {
    if !(confidence > 0.0 && confidence < 1.0) {
        return domain("confidence must lie in (0, 1)");
    }
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    Ok(normal.inverse_cdf(0.5 + 0.5 * confidence))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QeDcrEstimate {
    /// Detection probability per photon.
    pub qe: Estimate,
    /// Dark counts per second.
    pub dcr: Estimate,
    /// Click probability per gate of the illuminated train.
    pub click_prob: f64,
    /// Click probability per gate of the dark train.
    pub dark_prob: f64,
}

/// QE from an illuminated train and a dark train, DCR from the dark train.
///
/// `QE = (p_light - p_dark) / mu`. The interval on the difference combines
/// the two Wilson intervals (Newcombe's hybrid score method); the DCR
/// interval is the Wilson interval scaled by the gate frequency.
pub fn estimate_qe_dcr(
    light: &ClickTrain,
    dark: &ClickTrain,
    mu: f64,
    gate_frequency: f64,
    confidence: f64,
) -> Result<QeDcrEstimate> {
    if !(mu > 0.0 && mu.is_finite()) {
        return domain("QE needs a mean photon number > 0");
    }
    if !(gate_frequency > 0.0) {
        return domain("gate frequency must be > 0");
    }
    if light.is_empty() || dark.is_empty() {
        return Err(Error::Precondition("empty click train".into()));
    }
    let z = z_for(confidence)?;
    let (k1, n1) = (light.clicks(), light.len());
    let (k2, n2) = (dark.clicks(), dark.len());
    let p1 = k1 as f64 / n1 as f64;
    let p2 = k2 as f64 / n2 as f64;
    let (l1, u1) = wilson_interval(k1, n1, z);
    let (l2, u2) = wilson_interval(k2, n2, z);
    let diff = p1 - p2;
    let lo = diff - ((p1 - l1).powi(2) + (u2 - p2).powi(2)).sqrt();
    let hi = diff + ((u1 - p1).powi(2) + (p2 - l2).powi(2)).sqrt();
    Ok(QeDcrEstimate {
        qe: Estimate {
            value: diff / mu,
            lo: lo / mu,
            hi: hi / mu,
        },
        dcr: Estimate {
            value: p2 * gate_frequency,
            lo: l2 * gate_frequency,
            hi: u2 * gate_frequency,
        },
        click_prob: p1,
        dark_prob: p2,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AfterpulseEstimate {
    /// Probability of a click in the gate after a detection, in excess of
    /// the independent background.
    pub probability: f64,
    /// Approximate standard error from the scatter of the baseline lags.
    pub std_error: f64,
    /// Mean normalized autocorrelation over the inter-pulse lags.
    pub baseline: f64,
    /// Linear trend of the baseline in units of its standard error.
    pub trend_sigma: f64,
    /// False when the baseline trend exceeds three standard errors.
    pub flat: bool,
}

/// Afterpulse probability from the lag-1 excess of a pulsed-illumination
/// autocorrelation (`gamma[0]` is lag 1).
///
/// The baseline averages lags that are neither multiples of `divisor` nor
/// adjacent to one, so its pairs have the same signal/dark composition as
/// lag 1 without the one-gate memory. With `m` the mean click probability,
/// `a = (G1 - Gb) * m / (1 - Gb * m)`.
pub fn afterpulse_probability(gamma: &[f64], divisor: usize, mean_click_prob: f64) -> Result<AfterpulseEstimate> {
    if divisor == 0 {
        return domain("divisor must be >= 1");
    }
    if !(mean_click_prob > 0.0 && mean_click_prob < 1.0) {
        return domain("mean click probability must lie in (0, 1)");
    }
    let base: Vec<(f64, f64)> = gamma
        .iter()
        .enumerate()
        .map(|(k, &g)| (k + 1, g))
        .filter(|&(lag, _)| {
            lag >= 2 && (divisor == 1 || !matches!(lag % divisor, r if r == 0 || r == 1 || r == divisor - 1))
        })
        .map(|(lag, g)| (lag as f64, g))
        .collect();
    if base.len() < 3 {
        return Err(Error::Precondition(format!(
            "need at least 3 baseline lags, have {} (extend max_lag beyond the divisor)",
            base.len()
        )));
    }
    let n = base.len() as f64;
    let mean_x = base.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = base.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = base.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    let sxy: f64 = base.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let slope = sxy / sxx;
    let resid: f64 = base
        .iter()
        .map(|p| (p.1 - mean_y - slope * (p.0 - mean_x)).powi(2))
        .sum();
    let sd = (base.iter().map(|p| (p.1 - mean_y).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let slope_se = (resid / (n - 2.0) / sxx).sqrt();
    let trend_sigma = if slope_se > 0.0 { slope / slope_se } else { 0.0 };

    let g1 = gamma[0];
    let m = mean_click_prob;
    let denom = 1.0 - mean_y * m;
    Ok(AfterpulseEstimate {
        probability: (g1 - mean_y) * m / denom,
        std_error: sd * m / denom,
        baseline: mean_y,
        trend_sigma,
        flat: trend_sigma.abs() <= 3.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearityFit {
    pub slope: f64,
    pub intercept: f64,
    pub std_error: f64,
    /// 95% confidence interval of the slope.
    pub ci: (f64, f64),
    /// Slope 1 lies inside the interval.
    pub single_photon: bool,
    /// Slope significantly below 1.
    pub saturated: bool,
}

/// Least-squares slope of `ln(count rate)` against `ln(intensity)`.
pub fn linearity_check(rates: &[(f64, f64)]) -> Result<LinearityFit> {
    if rates.len() < 3 {
        return Err(Error::Precondition("linearity check needs at least 3 points".into()));
    }
    if rates.iter().any(|&(i, r)| !(i > 0.0) || !(r > 0.0)) {
        return domain("intensities and rates must be > 0");
    }
    let pts: Vec<(f64, f64)> = rates.iter().map(|&(i, r)| (i.ln(), r.ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return domain("intensities must not all be equal");
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = pts
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let se = (ssr / (n - 2.0) / sxx).sqrt();
    let t = StudentsT::new(0.0, 1.0, n - 2.0)
        .expect("positive degrees of freedom")
        .inverse_cdf(0.975);
    let ci = (slope - t * se, slope + t * se);
    Ok(LinearityFit {
        slope,
        intercept,
        std_error: se,
        ci,
        single_photon: ci.0 <= 1.0 && 1.0 <= ci.1,
        saturated: ci.1 < 1.0,
    })
}
