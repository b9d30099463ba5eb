//! Cross-correlation between station pairs and partial autocorrelation for
//! autoregressive order selection.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Correlation of an upstream series with a lagged downstream series, for
/// lags `0..=k_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CcfProfile {
    pub lags: Vec<usize>,
    pub correlations: Vec<f64>,
    /// (upstream, downstream) station ids, when known.
    pub pair: Option<(String, String)>,
}

impl CcfProfile {
    pub fn with_pair(mut self, upstream: impl Into<String>, downstream: impl Into<String>) -> Self {
        self.pair = Some((upstream.into(), downstream.into()));
        self
    }
}

/// Writes `upstream,downstream,lag,correlation` rows for plotting.
pub fn write_ccf_csv(profiles: &[CcfProfile], mut out: impl Write) -> Result<()> {
    let io = |e| Error::io("<ccf output>", e);
    writeln!(out, "upstream,downstream,lag,correlation").map_err(io)?;
    for p in profiles {
        let (up, down) = p.pair.clone().unwrap_or_default();
        for (k, r) in p.lags.iter().zip(&p.correlations) {
            writeln!(out, "{up},{down},{k},{r}").map_err(io)?;
        }
    }
    Ok(())
}

fn mean_and_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

struct Moments {
    u_mean: f64,
    y_mean: f64,
    scale: f64,
}

fn moments(u: &[f64], y: &[f64]) -> Result<Moments> {
    if u.len() != y.len() {
        return Err(Error::Shape(format!(
            "series lengths differ: {} vs {}",
            u.len(),
            y.len()
        )));
    }
    if u.is_empty() {
        return Err(Error::Length {
            context: "cross-correlation".into(),
            needed: 1,
            got: 0,
        });
    }
    let (u_mean, u_sd) = mean_and_sd(u);
    let (y_mean, y_sd) = mean_and_sd(y);
    // Relative threshold so that constant series with rounding noise count as constant.
    for (name, sd, mean) in [("u", u_sd, u_mean), ("y", y_sd, y_mean)] {
        if !(sd > 1e-12 * mean.abs().max(1.0)) {
            return Err(Error::DegenerateSeries(format!("series {name} is constant")));
        }
    }
    Ok(Moments {
        u_mean,
        y_mean,
        scale: u_sd * y_sd,
    })
}

fn lagged_correlation(u: &[f64], y: &[f64], k: usize, m: &Moments) -> f64 {
    let n = u.len();
    let sum: f64 = u[..n - k]
        .iter()
        .zip(&y[k..])
        .map(|(a, b)| (a - m.u_mean) * (b - m.y_mean))
        .sum();
    (sum / (n - k) as f64 / m.scale).clamp(-1.0, 1.0)
}

/// Sample cross-correlation of `u_t` with `y_{t+k}`.
///
/// Uses the overlapping window of length `N - k` with full-series means and
/// population standard deviations, clamped to `[-1, 1]`.
pub fn cross_correlation(u: &[f64], y: &[f64], k: usize) -> Result<f64> {
    if k >= u.len() {
        return Err(Error::Range(format!(
            "lag {k} must be below series length {}",
            u.len()
        )));
    }
    let m = moments(u, y)?;
    Ok(lagged_correlation(u, y, k, &m))
}

/// Cross-correlations for `k = 0..=k_max`.
pub fn ccf_profile(u: &[f64], y: &[f64], k_max: usize) -> Result<CcfProfile> {
    if k_max >= u.len() {
        return Err(Error::Range(format!(
            "k_max {k_max} must be below series length {}",
            u.len()
        )));
    }
    let m = moments(u, y)?;
    Ok(CcfProfile {
        lags: (0..=k_max).collect(),
        correlations: (0..=k_max).map(|k| lagged_correlation(u, y, k, &m)).collect(),
        pair: None,
    })
}

/// Lag of the largest signed correlation; ties go to the smallest lag.
pub fn best_lag(profile: &CcfProfile) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (&k, &c) in profile.lags.iter().zip(&profile.correlations) {
        match best {
            Some((_, b)) if c <= b => {}
            _ => best = Some((k, c)),
        }
    }
    best.map(|(k, _)| k)
        .ok_or_else(|| Error::Input("empty correlation profile".into()))
}

/// Partial autocorrelations for lags `1..=max_lag` by the Durbin–Levinson
/// recursion on biased sample autocovariances.
pub fn pacf(series: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    if max_lag == 0 {
        return Err(Error::Parameter("max_lag must be positive".into()));
    }
    if series.len() <= max_lag {
        return Err(Error::Length {
            context: format!("PACF up to lag {max_lag}"),
            needed: max_lag + 1,
            got: series.len(),
        });
    }
    let n = series.len() as f64;
    let (mean, sd) = mean_and_sd(series);
    if !(sd > 1e-12 * mean.abs().max(1.0)) {
        return Err(Error::DegenerateSeries("series is constant".into()));
    }
    let acov: Vec<f64> = (0..=max_lag)
        .map(|k| {
            series
                .iter()
                .zip(&series[k..])
                .map(|(a, b)| (a - mean) * (b - mean))
                .sum::<f64>()
                / n
        })
        .collect();
    let rho: Vec<f64> = acov.iter().map(|c| c / acov[0]).collect();

    let mut out = Vec::with_capacity(max_lag);
    let mut phi = vec![0.0; max_lag + 1];
    let mut prev = vec![0.0; max_lag + 1];
    let mut v = 1.0;
    for k in 1..=max_lag {
        let num = rho[k] - (1..k).map(|j| prev[j] * rho[k - j]).sum::<f64>();
        let a = if v > 0.0 { num / v } else { 0.0 };
        phi[k] = a;
        for j in 1..k {
            phi[j] = prev[j] - a * prev[k - j];
        }
        v *= 1.0 - a * a;
        out.push(a);
        prev[..=k].copy_from_slice(&phi[..=k]);
    }
    Ok(out)
}

/// Largest lag whose partial autocorrelation leaves the 95% band
/// `1.96 / sqrt(n)`; at least 1.
pub fn select_ar_order(series: &[f64], max_lag: usize) -> Result<usize> {
    let values = pacf(series, max_lag)?;
    let band = 1.96 / (series.len() as f64).sqrt();
    Ok(values
        .iter()
        .rposition(|p| p.abs() > band)
        .map_or(1, |i| i + 1))
}
