//! Synthetic corridors with planted lags and speed regimes.
//!
//! Station 1 carries a daily flow profile plus a fluctuating source term
//! (an AR(1) deviation) plus measurement noise. Every station downstream
//! repeats the flow of its upstream neighbour after the travel-time lag of the
//! regime in force, blended with the local profile:
//!
//! ```text
//! flow_1(t) = profile(t) + source(t) + noise
//! flow_n(t) = blend * flow_{n-1}(t - lag(regime(t))) + (1 - blend) * profile(t) + noise
//! ```
//!
//! Speeds are the regime mean plus Gaussian jitter. Flows and speeds are
//! clamped at zero. All draws come from one ChaCha8 stream seeded with
//! `seed`, in slot order: the source innovation, then one noise draw per
//! station, then one speed jitter draw per station. Normal variates use the
//! ziggurat sampler of `rand_distr`. The first `warmup` slots are simulated in
//! the first regime and discarded so that early slots have upstream history.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{FlowPanel, StationNetwork};
use crate::error::{Error, Result};
use crate::lags::travel_lag;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    Flat,
    /// `base + amplitude * (1 - cos(4 pi t / day)) / 2`, peaking a quarter and
    /// three quarters into the day.
    TwoPeak,
}

/// Slots `start..end` driven at one mean speed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeSpec {
    pub start: usize,
    pub end: usize,
    /// Feet per second.
    pub mean_speed: f64,
    pub jitter_sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_stations: usize,
    pub spacing_feet: f64,
    /// Must tile `0..day_length` in order.
    pub regimes: Vec<RegimeSpec>,
    pub profile: Profile,
    pub base_flow: f64,
    pub amplitude: f64,
    pub noise_sd: f64,
    /// Innovation sd of the upstream source fluctuation.
    pub source_sd: f64,
    /// Persistence of the upstream source fluctuation, in `(-1, 1)`.
    pub source_ar: f64,
    /// Weight of the delayed upstream flow at downstream stations.
    pub blend: f64,
    pub tau_seconds: f64,
    pub seed: u64,
}

impl SynthConfig {
    /// Two stations 4000 ft apart: a slow regime at 44.45 ft/s for the first
    /// half of `n_slots`, then a fast one at 67.05 ft/s.
    pub fn two_regime_pair(n_slots: usize, seed: u64) -> Self {
        Self {
            n_stations: 2,
            spacing_feet: 4000.0,
            regimes: vec![
                RegimeSpec {
                    start: 0,
                    end: n_slots / 2,
                    mean_speed: 44.45,
                    jitter_sd: 1.0,
                },
                RegimeSpec {
                    start: n_slots / 2,
                    end: n_slots,
                    mean_speed: 67.05,
                    jitter_sd: 1.0,
                },
            ],
            profile: Profile::TwoPeak,
            base_flow: 40.0,
            amplitude: 20.0,
            noise_sd: 0.5,
            source_sd: 4.0,
            source_ar: 0.8,
            blend: 0.9,
            tau_seconds: 30.0,
            seed,
        }
    }

    pub fn day_length(&self) -> usize {
        self.regimes.last().map_or(0, |r| r.end)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Parameter(m));
        if self.n_stations == 0 {
            return fail("at least one station is required".into());
        }
        if !(self.spacing_feet > 0.0 && self.tau_seconds > 0.0) {
            return fail("spacing and slot length must be positive".into());
        }
        if self.regimes.is_empty() {
            return fail("at least one regime is required".into());
        }
        let mut next = 0;
        for (i, r) in self.regimes.iter().enumerate() {
            if r.start != next || r.end <= r.start {
                return fail(format!(
                    "regime {i} spans {}..{} but should start at {next}",
                    r.start, r.end
                ));
            }
            if !(r.mean_speed > 0.0 && r.jitter_sd >= 0.0) {
                return fail(format!("regime {i} needs a positive speed and jitter >= 0"));
            }
            next = r.end;
        }
        if !(0.0..=1.0).contains(&self.blend) {
            return fail(format!("blend must lie in [0, 1], got {}", self.blend));
        }
        if !(self.noise_sd >= 0.0 && self.source_sd >= 0.0) {
            return fail("noise standard deviations must be non-negative".into());
        }
        if !(self.source_ar.abs() < 1.0) {
            return fail(format!("source_ar must lie in (-1, 1), got {}", self.source_ar));
        }
        Ok(())
    }

    fn profile_at(&self, t: i64) -> f64 {
        match self.profile {
            Profile::Flat => self.base_flow,
            Profile::TwoPeak => {
                let x = t as f64 / self.day_length() as f64;
                self.base_flow
                    + self.amplitude * 0.5 * (1.0 - (4.0 * std::f64::consts::PI * x).cos())
            }
        }
    }
}

/// Lags planted in one regime.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedRegime {
    pub start: usize,
    pub end: usize,
    pub mean_speed: f64,
    /// Travel-time lag for spatial orders `1..n_stations`.
    pub lag_by_order: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub regimes: Vec<PlantedRegime>,
}

impl GroundTruth {
    /// Adjacent-station lag in force at `slot`.
    pub fn lag_at(&self, slot: usize) -> Option<usize> {
        self.regimes
            .iter()
            .find(|r| (r.start..r.end).contains(&slot))
            .and_then(|r| r.lag_by_order.first().copied())
    }
}

/// Generated corridor.
#[derive(Debug, Clone, PartialEq)]
pub struct Synthetic {
    pub network: StationNetwork,
    pub flows: FlowPanel,
    pub speeds: FlowPanel,
    pub truth: GroundTruth,
}

pub fn generate(config: &SynthConfig) -> Result<Synthetic> {
    config.validate()?;
    let n_st = config.n_stations;
    let network = StationNetwork::uniform(n_st, config.spacing_feet)?;
    let truth = GroundTruth {
        regimes: config
            .regimes
            .iter()
            .map(|r| {
                Ok(PlantedRegime {
                    start: r.start,
                    end: r.end,
                    mean_speed: r.mean_speed,
                    lag_by_order: (1..n_st)
                        .map(|l| {
                            travel_lag(l as f64 * config.spacing_feet, r.mean_speed, config.tau_seconds)
                        })
                        .collect::<Result<_>>()?,
                })
            })
            .collect::<Result<_>>()?,
    };
    let adjacent_lag: Vec<usize> = if n_st > 1 {
        truth.regimes.iter().map(|r| r.lag_by_order[0]).collect()
    } else {
        vec![0; truth.regimes.len()]
    };

    let day = config.day_length();
    let warmup = adjacent_lag.iter().copied().max().unwrap_or(0) + 50;
    let total = warmup + day;
    let regime_of = |t: usize| -> usize {
        if t < warmup {
            0
        } else {
            config
                .regimes
                .iter()
                .position(|r| (r.start..r.end).contains(&(t - warmup)))
                .expect("regimes tile the day")
        }
    };

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };
    let mut flows = vec![vec![0.0; total]; n_st];
    let mut speeds = vec![vec![0.0; total]; n_st];
    let mut source = 0.0;
    for t in 0..total {
        let clock = t as i64 - warmup as i64;
        let profile = config.profile_at(clock);
        let regime = regime_of(t);
        source = config.source_ar * source + config.source_sd * normal();
        for n in 0..n_st {
            let noise = config.noise_sd * normal();
            let value = if n == 0 {
                profile + source + noise
            } else {
                let lag = adjacent_lag[regime];
                let upstream = if t >= lag {
                    flows[n - 1][t - lag]
                } else {
                    config.profile_at(clock - lag as i64)
                };
                config.blend * upstream + (1.0 - config.blend) * profile + noise
            };
            flows[n][t] = value.max(0.0);
        }
        let spec = &config.regimes[regime];
        for speed in speeds.iter_mut() {
            speed[t] = (spec.mean_speed + spec.jitter_sd * normal()).max(0.0);
        }
    }

    let trim = |cols: Vec<Vec<f64>>| -> Vec<Vec<f64>> {
        cols.into_iter().map(|c| c[warmup..].to_vec()).collect()
    };
    let stations = network.stations().to_vec();
    Ok(Synthetic {
        flows: FlowPanel::new(stations.clone(), config.tau_seconds, 0, trim(flows))?,
        speeds: FlowPanel::new(stations, config.tau_seconds, 0, trim(speeds))?,
        network,
        truth,
    })
}
