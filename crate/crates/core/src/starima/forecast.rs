//! Residual filtering and recursive multi-step forecasting.

use crate::data::{difference, undifference, FlowPanel};
use crate::error::{Error, Result};
use crate::partition::DayPartition;

use super::design::{dot, Layout};
use super::StarimaModel;

/// Partition range of every differenced index of `panel`.
pub(crate) fn range_indices(
    partition: &DayPartition,
    panel: &FlowPanel,
    d: usize,
    len_z: usize,
) -> Result<Vec<usize>> {
    let start = usize::try_from(panel.start_slot())
        .map_err(|_| Error::Range(format!("negative start slot {}", panel.start_slot())))?;
    (0..len_z)
        .map(|i| partition.range_index_for_row(start + i + d, panel.slot_seconds()))
        .collect()
}

/// One-step residuals of the fitted model over `z`, with innovations before
/// the first computable slot taken as zero.
pub(crate) fn filter_residuals(model: &StarimaModel, z: &[Vec<f64>], ranges: &[usize]) -> Vec<Vec<f64>> {
    let layout = Layout::new(&model.spec, &model.weights, &model.lags);
    let n_st = z.len();
    let len = z[0].len();
    let mut eps = vec![vec![0.0; len]; n_st];
    let mut buf = vec![0.0; layout.n_coef()];
    for i in 0..len {
        let coef = model.coefficients_for(ranges[i]).flat();
        for n in 0..n_st {
            if layout.fill(z, &eps, 0, i, n, ranges[i], &mut buf) {
                eps[n][i] = z[n][i] - dot(&coef, &buf);
            }
        }
    }
    eps
}

/// Which regime each forecast step used.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastTrace {
    /// Partition range index per step; `None` for regime-free models.
    pub ranges: Vec<Option<usize>>,
}

/// Forecasts `horizon` slots past the end of `history`.
///
/// Predictions on the differenced scale feed later steps and future
/// innovations are zero. Each step uses the lags and coefficients of the
/// regime its slot falls in.
pub fn forecast(
    model: &StarimaModel,
    history: &FlowPanel,
    horizon: usize,
    partition: &DayPartition,
) -> Result<FlowPanel> {
    forecast_traced(model, history, horizon, partition).map(|(p, _)| p)
}

pub fn forecast_traced(
    model: &StarimaModel,
    history: &FlowPanel,
    horizon: usize,
    partition: &DayPartition,
) -> Result<(FlowPanel, ForecastTrace)> {
    if history.stations() != model.stations.as_slice() {
        return Err(Error::Shape(format!(
            "history stations {:?} differ from model stations {:?}",
            history.stations(),
            model.stations
        )));
    }
    if history.slot_seconds() != model.slot_seconds {
        return Err(Error::Shape(format!(
            "history slots are {} s but the model was fitted on {} s slots",
            history.slot_seconds(),
            model.slot_seconds
        )));
    }
    if horizon == 0 {
        return Err(Error::Parameter("horizon must be at least 1".into()));
    }
    let regime_free = model.is_regime_free();
    if !regime_free && model.lags.n_ranges() != partition.len() {
        return Err(Error::Shape(format!(
            "model has {} lag sets but the partition has {} ranges",
            model.lags.n_ranges(),
            partition.len()
        )));
    }
    let d = model.spec.d;
    let layout = Layout::new(&model.spec, &model.weights, &model.lags);
    let needed = d + layout.max_lookback() + 1;
    if history.len() < needed {
        return Err(Error::Length {
            context: "forecast history".into(),
            needed,
            got: history.len(),
        });
    }

    let mut z = Vec::with_capacity(history.n_stations());
    let mut initials = Vec::with_capacity(history.n_stations());
    for col in history.columns() {
        let (zc, init) = difference(col, d)?;
        z.push(zc);
        initials.push(init);
    }
    let len_z = z[0].len();
    let ranges = if regime_free {
        vec![0; len_z]
    } else {
        range_indices(partition, history, d, len_z)?
    };
    let mut eps = filter_residuals(model, &z, &ranges);

    let start = usize::try_from(history.start_slot())
        .map_err(|_| Error::Range(format!("negative start slot {}", history.start_slot())))?;
    let mut trace = Vec::with_capacity(horizon);
    let mut buf = vec![0.0; layout.n_coef()];
    for h in 0..horizon {
        let i = len_z + h;
        let range = if regime_free {
            None
        } else {
            Some(partition.range_index_for_row(start + i + d, history.slot_seconds())?)
        };
        let r = range.unwrap_or(0);
        let coef = model.coefficients_for(r).flat();
        for col in z.iter_mut() {
            col.push(0.0);
        }
        for col in eps.iter_mut() {
            col.push(0.0);
        }
        for n in 0..history.n_stations() {
            if !layout.fill(&z, &eps, 0, i, n, r, &mut buf) {
                return Err(Error::Length {
                    context: format!("forecast step {} for station {}", h + 1, model.stations[n]),
                    needed: layout.max_lookback(),
                    got: i,
                });
            }
            z[n][i] = dot(&coef, &buf);
        }
        trace.push(range);
    }

    let columns = z
        .iter()
        .zip(&initials)
        .map(|(zc, init)| {
            let level = undifference(zc, init, d)?;
            Ok(level[level.len() - horizon..].to_vec())
        })
        .collect::<Result<Vec<_>>>()?;
    let panel = FlowPanel::new(
        history.stations().to_vec(),
        history.slot_seconds(),
        history.start_slot() + history.len() as i64,
        columns,
    )?;
    Ok((panel, ForecastTrace { ranges: trace }))
}
