//! Out-of-sample comparison of lag modes against an ARIMA baseline.
//!
//! The last `horizon` slots of every regime range long enough to hold them
//! are held out. Models are trained on the remaining slots, then each window
//! is forecast recursively from the history that precedes it and scored per
//! station.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::ccf::select_ar_order;
use crate::data::{difference, FlowPanel, StationNetwork};
use crate::error::{Error, Result};
use crate::lags::{ccf_lag_matrices, lag_matrices_at_speed, LagMode, RegimeLags};
use crate::metrics::EvalReport;
use crate::partition::DayPartition;
use crate::starima::{build_weights, fit_masked, forecast, RefitMode, StarimaModel, StarimaSpec};

/// How the own-lag order of each station is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArOrder {
    /// Partial-autocorrelation cut-off on the differenced flow, up to `max_lag`.
    Pacf { max_lag: usize },
    Fixed(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub lambda: usize,
    pub d: usize,
    pub q: usize,
    /// Spatial order of each moving-average lag; `lambda` for all when absent.
    pub m_k: Option<Vec<usize>>,
    pub ar_order: ArOrder,
    pub refit: RefitMode,
    /// Largest lag scanned when lags come from the cross-correlation.
    pub ccf_k_max: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            lambda: 3,
            d: 1,
            q: 1,
            m_k: None,
            ar_order: ArOrder::Pacf { max_lag: 5 },
            refit: RefitMode::PerRange,
            ccf_k_max: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub model: ModelConfig,
    pub horizon: usize,
    pub lag_modes: Vec<LagMode>,
    /// `(p, d, q)` of the per-station ARIMA baseline, if any.
    pub arima: Option<(usize, usize, usize)>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::default(),
            horizon: 30,
            lag_modes: vec![LagMode::SpeedVarying, LagMode::FixedCcf, LagMode::FixedConstant],
            arima: Some((2, 1, 2)),
        }
    }
}

/// Own-lag order of every station from the differenced flows.
pub fn ar_orders(flows: &FlowPanel, d: usize, rule: ArOrder) -> Result<Vec<usize>> {
    match rule {
        ArOrder::Fixed(p) => Ok(vec![p; flows.n_stations()]),
        ArOrder::Pacf { max_lag } => flows
            .columns()
            .iter()
            .map(|c| {
                let (z, _) = difference(c, d)?;
                select_ar_order(&z, max_lag)
            })
            .collect(),
    }
}

/// Speed-weighted mean over the partition, used for fixed travel-time lags.
pub fn day_mean_speed(partition: &DayPartition) -> f64 {
    let total: f64 = partition
        .periods
        .iter()
        .map(|p| p.mean_speed * p.len() as f64)
        .sum();
    total / partition.n_slots() as f64
}

/// Lag matrices for every range under `mode`. Cross-correlation lags are
/// computed on the flow levels over all of `flows`.
pub fn lags_for_mode(
    mode: LagMode,
    network: &StationNetwork,
    flows: &FlowPanel,
    partition: &DayPartition,
    lambda: usize,
    ccf_k_max: usize,
) -> Result<RegimeLags> {
    let tau = flows.slot_seconds();
    match mode {
        LagMode::SpeedVarying => RegimeLags::speed_varying(network, partition, lambda, tau),
        LagMode::FixedCcf => Ok(RegimeLags::fixed(
            ccf_lag_matrices(network, flows, lambda, ccf_k_max, 0..flows.len())?,
            partition.len(),
        )),
        LagMode::FixedConstant => Ok(RegimeLags::fixed(
            lag_matrices_at_speed(network, day_mean_speed(partition), lambda, tau)?,
            partition.len(),
        )),
    }
}

/// Builds lags and weights for `mode` and fits on the slots where `train` holds.
pub fn fit_mode(
    mode: LagMode,
    network: &StationNetwork,
    flows: &FlowPanel,
    partition: &DayPartition,
    config: &ModelConfig,
    train: &[bool],
) -> Result<StarimaModel> {
    let lags = lags_for_mode(mode, network, flows, partition, config.lambda, config.ccf_k_max)?;
    let weights = build_weights(network, config.lambda)?;
    let spec = StarimaSpec {
        lambda: config.lambda,
        d: config.d,
        q: config.q,
        m_k: config
            .m_k
            .clone()
            .unwrap_or_else(|| vec![config.lambda; config.q]),
        lag_mode: mode,
        ar_order_l0: ar_orders(flows, config.d, config.ar_order)?,
        refit: config.refit,
    };
    fit_masked(flows, &spec, &weights, &lags, partition, train)
}

/// Held-out forecast window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalWindow {
    pub range_index: usize,
    /// `T<cluster>_<k>`: the k-th range of cluster `cluster`, both from 1.
    pub label: String,
    pub rows: Range<usize>,
}

/// Scores of one method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodEvaluation {
    pub method: String,
    /// One report per window and station.
    pub per_window: Vec<EvalReport>,
    /// One report per station over all windows.
    pub overall: Vec<EvalReport>,
    /// Forecast columns per window, in station order.
    pub forecasts: Vec<Vec<Vec<f64>>>,
}

impl MethodEvaluation {
    pub fn overall_for(&self, station: &str) -> Option<&EvalReport> {
        self.overall.iter().find(|r| r.station_id == station)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub windows: Vec<EvalWindow>,
    pub methods: Vec<MethodEvaluation>,
}

impl Evaluation {
    pub fn method(&self, name: &str) -> Option<&MethodEvaluation> {
        self.methods.iter().find(|m| m.method == name)
    }

    /// Every report, per window first, then the whole-day rows labelled `day`.
    pub fn reports(&self) -> Vec<EvalReport> {
        let mut out = Vec::new();
        for m in &self.methods {
            for r in m.per_window.iter().chain(&m.overall) {
                let mut r = r.clone();
                r.range_label = format!("{}:{}", m.method, r.range_label);
                out.push(r);
            }
        }
        out
    }
}

/// Range labels in the `T<cluster>_<k>` style, clusters and ranges counted from 1.
pub fn range_labels(partition: &DayPartition) -> Vec<String> {
    let mut seen = std::collections::BTreeMap::<usize, usize>::new();
    partition
        .periods
        .iter()
        .map(|p| {
            let k = seen.entry(p.cluster_id).or_insert(0);
            *k += 1;
            format!("T{}_{}", p.cluster_id + 1, k)
        })
        .collect()
}

/// The final `horizon` flow rows of every range that also leaves
/// `min_history` rows before the window.
pub fn evaluation_windows(
    partition: &DayPartition,
    flows: &FlowPanel,
    horizon: usize,
    min_history: usize,
) -> Result<Vec<EvalWindow>> {
    let labels = range_labels(partition);
    let mut rows_of = vec![Vec::new(); partition.len()];
    for row in 0..flows.len() {
        let abs = flows.start_slot() as usize + row;
        if let Ok(r) = partition.range_index_for_row(abs, flows.slot_seconds()) {
            rows_of[r].push(row);
        }
    }
    let windows: Vec<EvalWindow> = rows_of
        .iter()
        .enumerate()
        .filter(|(_, rows)| rows.len() >= horizon && rows[rows.len() - horizon] >= min_history)
        .map(|(r, rows)| {
            let end = rows[rows.len() - 1] + 1;
            EvalWindow {
                range_index: r,
                label: labels[r].clone(),
                rows: end - horizon..end,
            }
        })
        .collect();
    if windows.is_empty() {
        return Err(Error::Length {
            context: "evaluation windows".into(),
            needed: horizon + min_history,
            got: flows.len(),
        });
    }
    Ok(windows)
}

fn score(
    method: String,
    flows: &FlowPanel,
    windows: &[EvalWindow],
    forecasts: Vec<Vec<Vec<f64>>>,
) -> Result<MethodEvaluation> {
    let mut per_window = Vec::new();
    let mut overall = Vec::new();
    for (n, station) in flows.stations().iter().enumerate() {
        let mut all_actual = Vec::new();
        let mut all_pred = Vec::new();
        for (w, pred) in windows.iter().zip(&forecasts) {
            let actual = &flows.column(n)[w.rows.clone()];
            per_window.push(EvalReport::score(station, &w.label, actual, &pred[n])?);
            all_actual.extend_from_slice(actual);
            all_pred.extend_from_slice(&pred[n]);
        }
        overall.push(EvalReport::score(station, "day", &all_actual, &all_pred)?);
    }
    Ok(MethodEvaluation {
        method,
        per_window,
        overall,
        forecasts,
    })
}

fn forecast_windows(
    model: &StarimaModel,
    flows: &FlowPanel,
    partition: &DayPartition,
    windows: &[EvalWindow],
) -> Result<Vec<Vec<Vec<f64>>>> {
    windows
        .iter()
        .map(|w| {
            let history = flows.slice(0..w.rows.start)?;
            let pred = forecast(model, &history, w.rows.len(), partition)?;
            Ok(pred.columns().to_vec())
        })
        .collect()
}

/// Runs every configured method over the held-out windows.
pub fn evaluate(
    network: &StationNetwork,
    flows: &FlowPanel,
    partition: &DayPartition,
    config: &EvalConfig,
) -> Result<Evaluation> {
    if flows.stations() != network.stations() {
        return Err(Error::Schema("flow panel stations differ from network order".into()));
    }
    let min_history = 5 * config.horizon;
    let windows = evaluation_windows(partition, flows, config.horizon, min_history)?;
    let mut train = vec![true; flows.len()];
    for w in &windows {
        train[w.rows.clone()].fill(false);
    }

    let mut methods = Vec::new();
    for &mode in &config.lag_modes {
        let model = fit_mode(mode, network, flows, partition, &config.model, &train)?;
        let forecasts = forecast_windows(&model, flows, partition, &windows)?;
        methods.push(score(mode.as_str().to_string(), flows, &windows, forecasts)?);
    }
    if let Some((p, d, q)) = config.arima {
        let mut per_station = Vec::new();
        for n in 0..flows.n_stations() {
            let single = FlowPanel::new(
                vec![flows.stations()[n].clone()],
                flows.slot_seconds(),
                flows.start_slot(),
                vec![flows.column(n).to_vec()],
            )?;
            let model = fit_arima_masked(&single, p, d, q, &train)?;
            per_station.push(forecast_windows(&model, &single, partition, &windows)?);
        }
        let forecasts = (0..windows.len())
            .map(|w| per_station.iter().map(|f| f[w][0].clone()).collect())
            .collect();
        methods.push(score(format!("arima({p},{d},{q})"), flows, &windows, forecasts)?);
    }
    Ok(Evaluation { windows, methods })
}

fn fit_arima_masked(
    single: &FlowPanel,
    p: usize,
    d: usize,
    q: usize,
    train: &[bool],
) -> Result<StarimaModel> {
    let network = StationNetwork::new(single.stations().to_vec(), vec![0.0])?;
    let spec = StarimaSpec {
        refit: RefitMode::Shared,
        ..StarimaSpec::uniform(1, p, 0, d, q)
    };
    let partition = DayPartition::single(
        single.start_slot() as usize + single.len(),
        single.slot_seconds(),
        0.0,
    )?;
    fit_masked(
        single,
        &spec,
        &build_weights(&network, 0)?,
        &RegimeLags::fixed(Vec::new(), 1),
        &partition,
        train,
    )
}
