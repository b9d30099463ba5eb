//! Forecast accuracy measures.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_lengths(actual: &[f64], predicted: &[f64]) -> Result<()> {
    if actual.len() != predicted.len() {
        return Err(Error::Shape(format!(
            "{} actual values vs {} predictions",
            actual.len(),
            predicted.len()
        )));
    }
    if actual.is_empty() {
        return Err(Error::Shape("no values to score".into()));
    }
    Ok(())
}

/// Mean squared error.
pub fn mse(actual: &[f64], predicted: &[f64]) -> Result<f64> {
    check_lengths(actual, predicted)?;
    Ok(actual
        .iter()
        .zip(predicted)
        .map(|(a, p)| (a - p) * (a - p))
        .sum::<f64>()
        / actual.len() as f64)
}

/// Mean absolute percentage error as a fraction, over slots with a nonzero
/// actual value. Returns the error and the number of skipped zero actuals.
pub fn mape(actual: &[f64], predicted: &[f64]) -> Result<(f64, usize)> {
    check_lengths(actual, predicted)?;
    let mut sum = 0.0;
    let mut used = 0usize;
    for (a, p) in actual.iter().zip(predicted) {
        if *a != 0.0 {
            sum += ((a - p) / a).abs();
            used += 1;
        }
    }
    if used == 0 {
        return Err(Error::UndefinedMetric(
            "every actual value is zero, MAPE is undefined".into(),
        ));
    }
    Ok((sum / used as f64, actual.len() - used))
}

/// Accuracy of one station's forecasts over one evaluation window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub station_id: String,
    pub range_label: String,
    pub mse: f64,
    /// Fraction, not percent.
    pub mape: f64,
    pub n_points: usize,
    pub n_skipped_zero_actuals: usize,
}

impl EvalReport {
    pub fn score(
        station_id: impl Into<String>,
        range_label: impl Into<String>,
        actual: &[f64],
        predicted: &[f64],
    ) -> Result<Self> {
        let (mape, skipped) = mape(actual, predicted)?;
        Ok(Self {
            station_id: station_id.into(),
            range_label: range_label.into(),
            mse: mse(actual, predicted)?,
            mape,
            n_points: actual.len(),
            n_skipped_zero_actuals: skipped,
        })
    }
}

/// Writes `station,range,mape_pct,mse,n,skipped` rows.
pub fn write_reports(reports: &[EvalReport], mut out: impl Write) -> Result<()> {
    let io = |e| Error::io("<report output>", e);
    writeln!(out, "station,range,mape_pct,mse,n,skipped").map_err(io)?;
    for r in reports {
        writeln!(
            out,
            "{},{},{:.4},{:.4},{},{}",
            r.station_id,
            r.range_label,
            r.mape * 100.0,
            r.mse,
            r.n_points,
            r.n_skipped_zero_actuals
        )
        .map_err(io)?;
    }
    Ok(())
}
