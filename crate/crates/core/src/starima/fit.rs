//! Two-stage conditional least squares.
//!
//! Stage one fits a long pure autoregression (own lags plus the spatial terms)
//! and keeps its residuals as innovation estimates. Stage two regresses the
//! differenced flows on the model's own lags, the regime-lagged spatial terms
//! and the lagged innovation estimates. Without moving-average terms stage one
//! is skipped and stage two is ordinary least squares.

use crate::data::{difference, FlowPanel, SlotSeries, StationNetwork};
use crate::error::{Error, Result};
use crate::lags::RegimeLags;
use crate::partition::DayPartition;

use super::design::{dot, Layout};
use super::forecast::{filter_residuals, range_indices};
use super::linalg::NormalEquations;
use super::{build_weights, Coefficients, RefitMode, StarimaModel, StarimaSpec, WeightMatrices};

/// Observations required per coefficient.
const OBS_PER_COEF: usize = 10;

/// Fits on every slot of `panel`.
pub fn fit(
    panel: &FlowPanel,
    spec: &StarimaSpec,
    weights: &WeightMatrices,
    lags: &RegimeLags,
    partition: &DayPartition,
) -> Result<StarimaModel> {
    fit_masked(panel, spec, weights, lags, partition, &vec![true; panel.len()])
}

fn long_ar_order(n_own: usize, q: usize, n: usize) -> usize {
    let rule = (n.max(2) as f64).ln().powf(1.5).ceil() as usize;
    (n_own + q).max(rule).max(1)
}

fn differenced(panel: &FlowPanel, d: usize) -> Result<Vec<Vec<f64>>> {
    panel
        .columns()
        .iter()
        .map(|c| difference(c, d).map(|(z, _)| z))
        .collect()
}

/// Fits using only target slots where `train` is true. Regressors may still
/// read untrained slots.
pub fn fit_masked(
    panel: &FlowPanel,
    spec: &StarimaSpec,
    weights: &WeightMatrices,
    lags: &RegimeLags,
    partition: &DayPartition,
    train: &[bool],
) -> Result<StarimaModel> {
    let n_st = panel.n_stations();
    spec.validate(n_st)?;
    if train.len() != panel.len() {
        return Err(Error::Shape(format!(
            "training mask has {} entries for {} slots",
            train.len(),
            panel.len()
        )));
    }
    if lags.n_ranges() != partition.len() {
        return Err(Error::Shape(format!(
            "{} lag sets for {} partition ranges",
            lags.n_ranges(),
            partition.len()
        )));
    }
    let layout = Layout::new(spec, weights, lags);
    layout.check(n_st)?;

    let z = differenced(panel, spec.d)?;
    let len_z = z[0].len();
    let ranges = range_indices(partition, panel, spec.d, len_z)?;
    let trained = |i: usize| train[i + spec.d];

    let mut buf = Vec::new();

    // Stage one: innovation estimates from a long autoregression.
    let (eps, eps_start) = if spec.q > 0 {
        let h = long_ar_order(spec.own_order(), spec.q, len_z);
        let long = Layout::long_ar(h, n_st, spec.lambda, weights, lags);
        buf.resize(long.n_coef(), 0.0);
        let mut ne = NormalEquations::new(long.n_coef());
        for i in (0..len_z).filter(|&i| trained(i)) {
            for n in 0..n_st {
                if long.fill(&z, &[], 0, i, n, ranges[i], &mut buf) {
                    ne.add(&buf, z[n][i]);
                }
            }
        }
        require_rows(ne.rows(), long.n_coef(), "long autoregression")?;
        let beta = ne.solve(&long.labels())?.beta;
        let start = long.max_lookback();
        let mut eps = vec![vec![0.0; len_z]; n_st];
        for i in start..len_z {
            for n in 0..n_st {
                if long.fill(&z, &[], 0, i, n, ranges[i], &mut buf) {
                    eps[n][i] = z[n][i] - dot(&beta, &buf);
                }
            }
        }
        (eps, start)
    } else {
        (Vec::new(), 0)
    };

    // Stage two.
    let groups: Vec<Vec<usize>> = match spec.refit {
        RefitMode::Shared => vec![(0..partition.len()).collect()],
        RefitMode::PerRange => (0..partition.len()).map(|r| vec![r]).collect(),
    };
    let n_coef = layout.n_coef();
    let labels = layout.labels();
    buf.resize(n_coef, 0.0);
    let mut coefficients = Vec::with_capacity(groups.len());
    let mut ssr_total = 0.0;
    let mut obs_total = 0usize;
    for group in &groups {
        let rows: Vec<usize> = (0..len_z)
            .filter(|&i| trained(i) && group.contains(&ranges[i]))
            .collect();
        let mut ne = NormalEquations::new(n_coef);
        let mut targets = Vec::new();
        for &i in &rows {
            for n in 0..n_st {
                if layout.fill(&z, &eps, eps_start, i, n, ranges[i], &mut buf) {
                    ne.add(&buf, z[n][i]);
                    targets.push((i, n));
                }
            }
        }
        let context = match spec.refit {
            RefitMode::Shared => "model fit".to_string(),
            RefitMode::PerRange => format!("model fit on range {}", group[0]),
        };
        require_rows(ne.rows(), n_coef, &context)?;
        let solution = if n_coef > 0 {
            Some(ne.solve(&labels)?)
        } else {
            None
        };
        let mut beta = solution.as_ref().map_or_else(Vec::new, |s| s.beta.clone());
        constrain(spec, &mut beta);
        let mut ssr = 0.0;
        for &(i, n) in &targets {
            layout.fill(&z, &eps, eps_start, i, n, ranges[i], &mut buf);
            let r = z[n][i] - dot(&beta, &buf);
            ssr += r * r;
        }
        let dof = targets.len().saturating_sub(n_coef).max(1);
        let sigma2 = ssr / dof as f64;
        let std_errors = solution
            .as_ref()
            .map_or_else(Vec::new, |s| s.inv_diag.iter().map(|v| (sigma2 * v).sqrt()).collect());
        coefficients.push(Coefficients::from_flat(spec, &beta, std_errors));
        ssr_total += ssr;
        obs_total += targets.len();
    }

    let mut model = StarimaModel {
        spec: spec.clone(),
        stations: panel.stations().to_vec(),
        slot_seconds: panel.slot_seconds(),
        weights: weights.clone(),
        lags: lags.clone(),
        coefficients,
        residual_variance: ssr_total / obs_total.max(1) as f64,
        residual_tail: Vec::new(),
    };
    let residuals = filter_residuals(&model, &z, &ranges);
    model.residual_tail = (len_z.saturating_sub(spec.q)..len_z)
        .map(|i| residuals.iter().map(|col| col[i]).collect())
        .collect();
    Ok(model)
}

/// Largest modulus allowed for an inverse root of the own autoregressive or
/// moving-average polynomial.
const MAX_INVERSE_ROOT: f64 = 0.98;

/// True when every root of `1 + a[1] z^-1 + ... + a[m] z^-m` lies strictly
/// inside the unit circle (step-down recursion).
fn roots_inside(a: &[f64]) -> bool {
    let mut a = a.to_vec();
    for m in (1..a.len()).rev() {
        let k = a[m];
        if !(k.abs() < 1.0) {
            return false;
        }
        let prev = a.clone();
        for i in 1..m {
            a[i] = (prev[i] - k * prev[m - i]) / (1.0 - k * k);
        }
        a.truncate(m);
    }
    true
}

/// Scales `beta[idx[k]]` by `rho^(k+1)` when `1 - sum_k beta[idx[k]] B^(k+1)`
/// has an inverse root outside `MAX_INVERSE_ROOT`. Inverse roots grow linearly
/// in `rho`, so the largest lands on `MAX_INVERSE_ROOT`.
fn pull_inside(beta: &mut [f64], idx: &[usize]) {
    let c: Vec<f64> = idx.iter().map(|&i| beta[i]).collect();
    let poly = |rho: f64| -> Vec<f64> {
        std::iter::once(1.0)
            .chain(c.iter().enumerate().map(|(k, v)| -v * rho.powi(k as i32 + 1)))
            .collect()
    };
    if c.is_empty() || roots_inside(&poly(1.0 / MAX_INVERSE_ROOT)) {
        return;
    }
    let (mut lo, mut hi) = (0.0, 1.0 / MAX_INVERSE_ROOT);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if roots_inside(&poly(mid)) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let rho = lo * MAX_INVERSE_ROOT;
    for (k, &i) in idx.iter().enumerate() {
        beta[i] *= rho.powi(k as i32 + 1);
    }
}

/// Keeps the fitted model stationary and invertible.
///
/// Spatial weights only look upstream, so both operators are block triangular
/// with the own-lag polynomials on the diagonal: the model is stationary
/// exactly when `1 - sum_j phi0_j B^j` is, and invertible exactly when
/// `1 - sum_k theta_k0 B^k` is.
fn constrain(spec: &StarimaSpec, beta: &mut [f64]) {
    if beta.is_empty() {
        return;
    }
    let own: Vec<usize> = (0..spec.own_order()).collect();
    pull_inside(beta, &own);
    let mut at = spec.own_order() + spec.lambda;
    let mut ma = Vec::with_capacity(spec.q);
    for &m in &spec.m_k {
        ma.push(at);
        at += m + 1;
    }
    pull_inside(beta, &ma);
}

fn require_rows(rows: usize, n_coef: usize, context: &str) -> Result<()> {
    let needed = (OBS_PER_COEF * n_coef).max(1);
    if rows < needed {
        return Err(Error::Length {
            context: format!("{context} (usable observations)"),
            needed,
            got: rows,
        });
    }
    Ok(())
}


/// Single-station ARIMA(p, d, q) as the `lambda = 0` special case.
pub fn fit_arima(series: &SlotSeries, p: usize, d: usize, q: usize) -> Result<StarimaModel> {
    let network = StationNetwork::new(vec![series.station_id().to_string()], vec![0.0])?;
    let panel = FlowPanel::from_series(std::slice::from_ref(series))?;
    let spec = StarimaSpec::uniform(1, p, 0, d, q);
    let weights = build_weights(&network, 0)?;
    let lags = RegimeLags::fixed(Vec::new(), 1);
    let start = usize::try_from(series.start_slot()).map_err(|_| {
        Error::Range(format!("negative start slot {}", series.start_slot()))
    })?;
    let partition = DayPartition::single(start + series.len(), series.slot_seconds(), 0.0)?;
    fit(&panel, &spec, &weights, &lags, &partition)
}
