//! Regressor layout shared by estimation, filtering and forecasting.

use crate::error::{Error, Result};
use crate::lags::RegimeLags;

use super::{StarimaSpec, WeightMatrices};

pub(crate) struct Layout<'a> {
    own: Vec<usize>,
    n_own: usize,
    lambda: usize,
    m_k: Vec<usize>,
    weights: &'a WeightMatrices,
    lags: &'a RegimeLags,
}

impl<'a> Layout<'a> {
    pub fn new(spec: &StarimaSpec, weights: &'a WeightMatrices, lags: &'a RegimeLags) -> Self {
        Self {
            own: spec.ar_order_l0.clone(),
            n_own: spec.own_order(),
            lambda: spec.lambda,
            m_k: spec.m_k.clone(),
            weights,
            lags,
        }
    }

    /// Long autoregression without moving-average terms, used to estimate
    /// the innovations.
    pub fn long_ar(
        order: usize,
        n_stations: usize,
        lambda: usize,
        weights: &'a WeightMatrices,
        lags: &'a RegimeLags,
    ) -> Self {
        Self {
            own: vec![order; n_stations],
            n_own: order,
            lambda,
            m_k: Vec::new(),
            weights,
            lags,
        }
    }

    pub fn n_coef(&self) -> usize {
        self.n_own + self.lambda + self.m_k.iter().map(|m| m + 1).sum::<usize>()
    }

    pub fn labels(&self) -> Vec<String> {
        let mut out: Vec<String> = (1..=self.n_own).map(|j| format!("phi0[{j}]")).collect();
        out.extend((1..=self.lambda).map(|l| format!("phi[{l}]")));
        for (k, &m) in self.m_k.iter().enumerate() {
            out.extend((0..=m).map(|l| format!("theta[{},{l}]", k + 1)));
        }
        out
    }

    /// Longest look-back any row can need.
    pub fn max_lookback(&self) -> usize {
        self.n_own.max(self.lags.max_lag()).max(self.m_k.len())
    }

    /// Every weighted pair must have a lag in every range.
    pub fn check(&self, n_stations: usize) -> Result<()> {
        if self.weights.lambda() < self.lambda {
            return Err(Error::Shape(format!(
                "weights stop at order {} but lambda = {}",
                self.weights.lambda(),
                self.lambda
            )));
        }
        if self.weights.matrices[0].len() != n_stations {
            return Err(Error::Shape(format!(
                "weights are {}x{} for {n_stations} stations",
                self.weights.matrices[0].len(),
                self.weights.matrices[0].len()
            )));
        }
        if self.lambda > 0 && self.lags.lambda() < self.lambda {
            return Err(Error::Shape(format!(
                "lag matrices stop at order {} but lambda = {}",
                self.lags.lambda(),
                self.lambda
            )));
        }
        for r in 0..self.lags.n_ranges() {
            for l in 1..=self.lambda {
                for n in 0..n_stations {
                    for (m, _) in self.weights.neighbors(l, n) {
                        if self.lags.lag(r, l, m, n).is_none() {
                            return Err(Error::Shape(format!(
                                "range {r}: no lag for order {l} pair ({m}, {n})"
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Writes the regressors of station `n` at differenced index `i` in
    /// regime range `range`. Moving-average regressors enter negated so their
    /// coefficients are the `theta` of the model. Returns false when some
    /// regressor reaches before the available history.
    #[allow(clippy::too_many_arguments)]
    pub fn fill(
        &self,
        z: &[Vec<f64>],
        eps: &[Vec<f64>],
        eps_start: usize,
        i: usize,
        n: usize,
        range: usize,
        out: &mut [f64],
    ) -> bool {
        let mut c = 0;
        for j in 1..=self.n_own {
            out[c] = if j <= self.own[n] {
                if j > i {
                    return false;
                }
                z[n][i - j]
            } else {
                0.0
            };
            c += 1;
        }
        for l in 1..=self.lambda {
            let mut v = 0.0;
            for (m, w) in self.weights.neighbors(l, n) {
                let lag = self.lags.lag(range, l, m, n).unwrap_or(usize::MAX);
                if lag > i {
                    return false;
                }
                v += w * z[m][i - lag];
            }
            out[c] = v;
            c += 1;
        }
        for (k, &m_k) in self.m_k.iter().enumerate() {
            let k = k + 1;
            if i < k || i - k < eps_start {
                return false;
            }
            for l in 0..=m_k {
                let mut v = 0.0;
                for (m, w) in self.weights.neighbors(l, n) {
                    v += w * eps[m][i - k];
                }
                out[c] = -v;
                c += 1;
            }
        }
        true
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
