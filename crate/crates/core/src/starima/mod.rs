//! Space-time ARIMA with regime-dependent spatial lags.
//!
//! On the `d`-times differenced flows `z`, station `n` at slot `t` follows
//!
//! ```text
//! z_n(t) = sum_j phi0_j z_n(t - j)
//!        + sum_{l=1..lambda} phi_l sum_m W_l[n][m] z_m(t - P_l[m][n](regime(t)))
//!        + e_n(t) - sum_{k=1..q} sum_{l=0..m_k} theta_kl sum_m W_l[n][m] e_m(t - k)
//! ```
//!
//! The own-lag part carries one coefficient per temporal lag up to each
//! station's autoregressive order; every spatial order `l >= 1` carries a single
//! coefficient applied at the lag its regime prescribes. Coefficients are
//! shared by all stations and estimated by two-stage conditional least squares
//! (Hannan–Rissanen).

mod design;
mod fit;
mod forecast;
mod linalg;

use serde::{Deserialize, Serialize};

use crate::data::StationNetwork;
use crate::error::{Error, Result};
use crate::lags::{LagMode, RegimeLags};

pub use fit::{fit, fit_arima, fit_masked};
pub use forecast::{forecast, forecast_traced, ForecastTrace};

/// Whether coefficients are estimated once or per regime range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefitMode {
    /// One coefficient set per range, trained on that range's slots.
    PerRange,
    /// One coefficient set for the whole day; only the lags switch.
    Shared,
}

impl std::str::FromStr for RefitMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per_range" => Ok(RefitMode::PerRange),
            "shared" => Ok(RefitMode::Shared),
            other => Err(Error::Parameter(format!("unknown refit mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StarimaSpec {
    /// Highest spatial autoregressive order.
    pub lambda: usize,
    /// Differencing order.
    pub d: usize,
    /// Moving-average temporal order.
    pub q: usize,
    /// Spatial order of each moving-average lag `k = 1..=q`.
    pub m_k: Vec<usize>,
    pub lag_mode: LagMode,
    /// Own-lag autoregressive order of each station.
    pub ar_order_l0: Vec<usize>,
    pub refit: RefitMode,
}

impl StarimaSpec {
    /// Spec with `m_k = lambda` for every moving-average lag and the same
    /// own-lag order at every station.
    pub fn uniform(n_stations: usize, ar_order: usize, lambda: usize, d: usize, q: usize) -> Self {
        Self {
            lambda,
            d,
            q,
            m_k: vec![lambda; q],
            lag_mode: LagMode::SpeedVarying,
            ar_order_l0: vec![ar_order; n_stations],
            refit: RefitMode::Shared,
        }
    }

    pub fn validate(&self, n_stations: usize) -> Result<()> {
        if self.m_k.len() != self.q {
            return Err(Error::Parameter(format!(
                "m_k has {} entries for q = {}",
                self.m_k.len(),
                self.q
            )));
        }
        if let Some(m) = self.m_k.iter().find(|&&m| m > self.lambda) {
            return Err(Error::Parameter(format!(
                "moving-average spatial order {m} exceeds lambda = {}",
                self.lambda
            )));
        }
        if self.ar_order_l0.len() != n_stations {
            return Err(Error::Parameter(format!(
                "ar_order_l0 has {} entries for {n_stations} stations",
                self.ar_order_l0.len()
            )));
        }
        if self.lambda >= n_stations {
            return Err(Error::Parameter(format!(
                "lambda = {} needs more than {n_stations} stations",
                self.lambda
            )));
        }
        Ok(())
    }

    /// Number of own-lag coefficients.
    pub fn own_order(&self) -> usize {
        self.ar_order_l0.iter().copied().max().unwrap_or(0)
    }

    /// Coefficients per set.
    pub fn n_coefficients(&self) -> usize {
        self.own_order() + self.lambda + self.m_k.iter().map(|m| m + 1).sum::<usize>()
    }
}

/// Row-normalized spatial weight matrices `W_0..W_lambda`; `W_0` is the identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightMatrices {
    pub matrices: Vec<Vec<Vec<f64>>>,
}

impl WeightMatrices {
    pub fn lambda(&self) -> usize {
        self.matrices.len() - 1
    }

    /// Nonzero `(m, weight)` entries of row `n` of `W_l`.
    pub fn neighbors(&self, order: usize, n: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.matrices[order][n]
            .iter()
            .enumerate()
            .filter(|(_, w)| **w != 0.0)
            .map(|(m, w)| (m, *w))
    }
}

/// Directed upstream hop-order weights. Row `n` of `W_l` puts equal weight on
/// the stations exactly `l` hops upstream of `n` and is zero when there are none.
pub fn build_weights(network: &StationNetwork, lambda: usize) -> Result<WeightMatrices> {
    let n = network.len();
    if lambda >= n {
        return Err(Error::Parameter(format!(
            "lambda = {lambda} needs more than {n} stations"
        )));
    }
    let matrices = (0..=lambda)
        .map(|order| {
            (0..n)
                .map(|row| {
                    let mut w = vec![0.0; n];
                    let ups: Vec<usize> = (0..n)
                        .filter(|&m| {
                            if order == 0 {
                                m == row
                            } else {
                                m < row && network.spatial_order(m, row) == order
                            }
                        })
                        .collect();
                    for &m in &ups {
                        w[m] = 1.0 / ups.len() as f64;
                    }
                    w
                })
                .collect()
        })
        .collect();
    Ok(WeightMatrices { matrices })
}

/// One estimated coefficient set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficients {
    /// Own-lag autoregressive coefficients for lags `1..`.
    pub phi_own: Vec<f64>,
    /// Spatial autoregressive coefficients for orders `1..=lambda`.
    pub phi_spatial: Vec<f64>,
    /// `theta[k-1][l]` for moving-average lag `k` and spatial order `l`.
    pub theta: Vec<Vec<f64>>,
    /// Standard errors in the same flat order as [`Coefficients::flat`].
    pub std_errors: Vec<f64>,
}

impl Coefficients {
    pub(crate) fn from_flat(spec: &StarimaSpec, flat: &[f64], std_errors: Vec<f64>) -> Self {
        let p = spec.own_order();
        let mut theta = Vec::with_capacity(spec.q);
        let mut at = p + spec.lambda;
        for &m in &spec.m_k {
            theta.push(flat[at..at + m + 1].to_vec());
            at += m + 1;
        }
        Self {
            phi_own: flat[..p].to_vec(),
            phi_spatial: flat[p..p + spec.lambda].to_vec(),
            theta,
            std_errors,
        }
    }

    /// Own lags, then spatial orders, then moving-average terms.
    pub fn flat(&self) -> Vec<f64> {
        let mut out = self.phi_own.clone();
        out.extend(&self.phi_spatial);
        for t in &self.theta {
            out.extend(t);
        }
        out
    }
}

/// A fitted model, ready to forecast.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StarimaModel {
    pub spec: StarimaSpec,
    pub stations: Vec<String>,
    /// Slot width of the flows the model was fitted on, seconds.
    pub slot_seconds: f64,
    pub weights: WeightMatrices,
    pub lags: RegimeLags,
    /// One set for [`RefitMode::Shared`], one per range for [`RefitMode::PerRange`].
    pub coefficients: Vec<Coefficients>,
    pub residual_variance: f64,
    /// In-sample residuals of the last `q` training slots, one row per slot.
    pub residual_tail: Vec<Vec<f64>>,
}

impl StarimaModel {
    pub(crate) fn coefficients_for(&self, range: usize) -> &Coefficients {
        if self.coefficients.len() == 1 {
            &self.coefficients[0]
        } else {
            &self.coefficients[range]
        }
    }

    /// True when neither lags nor coefficients depend on the regime.
    pub fn is_regime_free(&self) -> bool {
        self.spec.lambda == 0 && self.coefficients.len() == 1
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}
