//! Pipeline configuration read from a flat `key = value` file.
//!
//! Blank lines and lines starting with `#` are ignored. Keys are namespaced
//! by stage, e.g. `isodata.k_max = 3`. Every key has a default, so an empty
//! file (or no file) is a valid configuration.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use starima_core::clustering::IsodataParams;
use starima_core::evaluate::{ArOrder, EvalConfig, ModelConfig};
use starima_core::lags::LagMode;
use starima_core::partition::SpeedPooling;
use starima_core::starima::RefitMode;
use starima_core::synth::{Profile, RegimeSpec, SynthConfig};

use crate::error::CliError;

/// Synthetic corridor drawn by `generate`. Regimes alternate between the
/// fast and slow speed, starting fast.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSettings {
    pub n_stations: usize,
    pub spacing_feet: f64,
    pub n_slots: usize,
    pub regime_slots: usize,
    pub fast_speed: f64,
    pub slow_speed: f64,
    pub jitter_sd: f64,
    pub profile: Profile,
    pub base_flow: f64,
    pub amplitude: f64,
    pub noise_sd: f64,
    pub source_sd: f64,
    pub source_ar: f64,
    pub blend: f64,
}

impl Default for SynthSettings {
    fn default() -> Self {
        Self {
            n_stations: 4,
            spacing_feet: 16000.0,
            n_slots: 2880,
            regime_slots: 240,
            fast_speed: 82.0,
            slow_speed: 34.0,
            jitter_sd: 3.0,
            profile: Profile::TwoPeak,
            base_flow: 40.0,
            amplitude: 20.0,
            noise_sd: 0.5,
            source_sd: 4.0,
            source_ar: 0.8,
            blend: 0.9,
        }
    }
}

impl SynthSettings {
    pub fn to_config(&self, tau_seconds: f64, seed: u64) -> SynthConfig {
        let step = self.regime_slots.max(1);
        let regimes = (0..self.n_slots)
            .step_by(step)
            .enumerate()
            .map(|(i, start)| RegimeSpec {
                start,
                end: (start + step).min(self.n_slots),
                mean_speed: if i % 2 == 0 { self.fast_speed } else { self.slow_speed },
                jitter_sd: self.jitter_sd,
            })
            .collect();
        SynthConfig {
            n_stations: self.n_stations,
            spacing_feet: self.spacing_feet,
            regimes,
            profile: self.profile,
            base_flow: self.base_flow,
            amplitude: self.amplitude,
            noise_sd: self.noise_sd,
            source_sd: self.source_sd,
            source_ar: self.source_ar,
            blend: self.blend,
            tau_seconds,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Raw `slot,station,flow,speed` file; `<output>/data.csv` when unset.
    pub data: Option<PathBuf>,
    /// `station,position_feet` file; `<output>/network.csv` when unset.
    pub network: Option<PathBuf>,
    pub output: PathBuf,
    /// Width of one raw slot, seconds.
    pub slot_seconds: f64,
    pub x_speed: usize,
    pub x_flow: usize,
    pub isodata: IsodataParams,
    pub delta: usize,
    pub pooling: SpeedPooling,
    pub model: ModelConfig,
    /// Lag mode of the `lags`, `fit` and `forecast` stages.
    pub lag_mode: LagMode,
    pub horizon: usize,
    /// First forecast row; the last `horizon` rows when unset.
    pub forecast_origin: Option<usize>,
    pub eval_modes: Vec<LagMode>,
    pub arima: Option<(usize, usize, usize)>,
    pub seed: u64,
    pub synth: SynthSettings,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            data: None,
            network: None,
            output: PathBuf::from("out"),
            slot_seconds: 30.0,
            x_speed: 30,
            x_flow: 4,
            isodata: IsodataParams::default(),
            delta: 8,
            pooling: SpeedPooling::Mean,
            model: ModelConfig::default(),
            lag_mode: LagMode::SpeedVarying,
            horizon: 30,
            forecast_origin: None,
            eval_modes: EvalConfig::default().lag_modes,
            arima: Some((2, 1, 2)),
            seed: 0,
            synth: SynthSettings::default(),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|_| CliError::Config(format!("cannot parse `{value}` for `{key}`")))
}

fn core<T>(key: &str, r: starima_core::Result<T>) -> Result<T, CliError> {
    r.map_err(|e| CliError::Config(format!("`{key}`: {e}")))
}

fn list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>, CliError> {
    value
        .split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(|v| parse(key, v))
        .collect()
}

impl PipelineConfig {
    /// Defaults overridden by `path`.
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut config = Self::default();
        config.apply_text(&text)?;
        Ok(config)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<(), CliError> {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Config(format!("line {}: expected `key = value`", i + 1))
            })?;
            self.set(key.trim(), value.trim())
                .map_err(|e| CliError::Config(format!("line {}: {e}", i + 1)))?;
        }
        Ok(())
    }

    /// Applies one `key=value` override.
    pub fn apply_override(&mut self, assignment: &str) -> Result<(), CliError> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("expected key=value, got `{assignment}`")))?;
        self.set(key.trim(), value.trim())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let k = key;
        let v = value;
        match k {
            "paths.data" => self.data = Some(PathBuf::from(v)),
            "paths.network" => self.network = Some(PathBuf::from(v)),
            "paths.output" => self.output = PathBuf::from(v),
            "data.slot_seconds" => self.slot_seconds = parse(k, v)?,
            "smooth.x_speed" => self.x_speed = parse(k, v)?,
            "smooth.x_flow" => self.x_flow = parse(k, v)?,
            "isodata.k_max" => self.isodata.k_max = parse(k, v)?,
            "isodata.n_min" => self.isodata.n_min = parse(k, v)?,
            "isodata.sigma2_max" => self.isodata.sigma2_max = parse(k, v)?,
            "isodata.d_min" => self.isodata.d_min = parse(k, v)?,
            "isodata.max_iter" => self.isodata.max_iter = parse(k, v)?,
            "isodata.k_init" => self.isodata.k_init = parse(k, v)?,
            "partition.delta" => self.delta = parse(k, v)?,
            "partition.pooling" => self.pooling = core(k, v.parse())?,
            "ccf.k_max" => self.model.ccf_k_max = parse(k, v)?,
            "starima.lambda" => self.model.lambda = parse(k, v)?,
            "starima.d" => self.model.d = parse(k, v)?,
            "starima.q" => self.model.q = parse(k, v)?,
            "starima.m_k" => self.model.m_k = Some(list(k, v)?),
            "starima.ar_order" => {
                self.model.ar_order = if v == "pacf" {
                    ArOrder::Pacf {
                        max_lag: self.pacf_max_lag(),
                    }
                } else {
                    ArOrder::Fixed(parse(k, v)?)
                }
            }
            "starima.pacf_max_lag" => {
                let max_lag = parse(k, v)?;
                if let ArOrder::Pacf { .. } = self.model.ar_order {
                    self.model.ar_order = ArOrder::Pacf { max_lag };
                }
            }
            "starima.refit" => self.model.refit = core(k, v.parse::<RefitMode>())?,
            "starima.lag_mode" => self.lag_mode = core(k, v.parse())?,
            "forecast.horizon" => self.horizon = parse(k, v)?,
            "forecast.origin" => self.forecast_origin = Some(parse(k, v)?),
            "evaluate.modes" => {
                self.eval_modes = v
                    .split(',')
                    .map(str::trim)
                    .filter(|m| !m.is_empty())
                    .map(|m| core(k, m.parse()))
                    .collect::<Result<_, _>>()?
            }
            "evaluate.arima" => {
                self.arima = if v == "none" {
                    None
                } else {
                    match list::<usize>(k, v)?.as_slice() {
                        [p, d, q] => Some((*p, *d, *q)),
                        _ => return Err(CliError::Config(format!("`{k}` expects p,d,q or none"))),
                    }
                }
            }
            "seed" => self.seed = parse(k, v)?,
            "synth.n_stations" => self.synth.n_stations = parse(k, v)?,
            "synth.spacing_feet" => self.synth.spacing_feet = parse(k, v)?,
            "synth.n_slots" => self.synth.n_slots = parse(k, v)?,
            "synth.regime_slots" => self.synth.regime_slots = parse(k, v)?,
            "synth.fast_speed" => self.synth.fast_speed = parse(k, v)?,
            "synth.slow_speed" => self.synth.slow_speed = parse(k, v)?,
            "synth.jitter_sd" => self.synth.jitter_sd = parse(k, v)?,
            "synth.profile" => {
                self.synth.profile = match v {
                    "flat" => Profile::Flat,
                    "two_peak" => Profile::TwoPeak,
                    _ => return Err(CliError::Config(format!("`{k}` expects flat or two_peak"))),
                }
            }
            "synth.base_flow" => self.synth.base_flow = parse(k, v)?,
            "synth.amplitude" => self.synth.amplitude = parse(k, v)?,
            "synth.noise_sd" => self.synth.noise_sd = parse(k, v)?,
            "synth.source_sd" => self.synth.source_sd = parse(k, v)?,
            "synth.source_ar" => self.synth.source_ar = parse(k, v)?,
            "synth.blend" => self.synth.blend = parse(k, v)?,
            _ => return Err(CliError::Config(format!("unknown key `{k}`"))),
        }
        Ok(())
    }

    fn pacf_max_lag(&self) -> usize {
        match self.model.ar_order {
            ArOrder::Pacf { max_lag } => max_lag,
            ArOrder::Fixed(_) => 5,
        }
    }

    pub fn data_path(&self) -> PathBuf {
        self.data.clone().unwrap_or_else(|| self.output.join("data.csv"))
    }

    pub fn network_path(&self) -> PathBuf {
        self.network
            .clone()
            .unwrap_or_else(|| self.output.join("network.csv"))
    }

    pub fn isodata_params(&self) -> IsodataParams {
        IsodataParams {
            seed: self.seed,
            ..self.isodata.clone()
        }
    }

    pub fn eval_config(&self) -> EvalConfig {
        EvalConfig {
            model: self.model.clone(),
            horizon: self.horizon,
            lag_modes: self.eval_modes.clone(),
            arima: self.arima,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_overrides() {
        let mut c = PipelineConfig::default();
        assert_eq!(c.isodata.k_max, 3);
        assert_eq!(c.delta, 8);
        c.apply_text(
            "# comment\n\nisodata.k_max = 4\nstarima.ar_order = 2\nevaluate.arima = none\n\
             evaluate.modes = fixed_ccf, speed_varying\npartition.pooling = station:s2\n",
        )
        .unwrap();
        assert_eq!(c.isodata.k_max, 4);
        assert_eq!(c.model.ar_order, ArOrder::Fixed(2));
        assert_eq!(c.arima, None);
        assert_eq!(c.eval_modes, vec![LagMode::FixedCcf, LagMode::SpeedVarying]);
        assert_eq!(c.pooling, SpeedPooling::Station("s2".into()));
        c.apply_override("starima.ar_order=pacf").unwrap();
        c.apply_override("starima.pacf_max_lag=7").unwrap();
        assert_eq!(c.model.ar_order, ArOrder::Pacf { max_lag: 7 });
    }

    #[test]
    fn bad_lines_name_the_line() {
        let mut c = PipelineConfig::default();
        let e = c.apply_text("seed = 1\nnot a pair\n").unwrap_err().to_string();
        assert!(e.contains("line 2"), "{e}");
        let e = c.apply_text("isodata.k_max = many").unwrap_err().to_string();
        assert!(e.contains("isodata.k_max"), "{e}");
        assert!(c.apply_text("unknown.key = 1").is_err());
    }

    #[test]
    fn synth_regimes_alternate() {
        let s = SynthSettings {
            n_slots: 500,
            regime_slots: 200,
            ..Default::default()
        };
        let cfg = s.to_config(30.0, 1);
        let speeds: Vec<f64> = cfg.regimes.iter().map(|r| r.mean_speed).collect();
        assert_eq!(speeds, vec![82.0, 34.0, 82.0]);
        assert_eq!(cfg.regimes[2].end, 500);
        cfg.validate().unwrap();
    }
}
