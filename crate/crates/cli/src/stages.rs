//! Pipeline stages. Each stage reads the artifacts of the stages before it
//! from the output directory and writes its own, so any stage can be rerun
//! alone once its inputs exist.
//!
//! | stage       | reads                              | writes                          |
//! |-------------|------------------------------------|---------------------------------|
//! | `generate`  | config                             | data, network, `truth.json`     |
//! | `smooth`    | data, network                      | `flow.csv`, `speed.csv`         |
//! | `ccf`       | `flow.csv`, network                | `ccf.csv`                       |
//! | `cluster`   | `speed.csv`                        | `clusters.csv`                  |
//! | `partition` | `clusters.csv`                     | `partition.csv`                 |
//! | `lags`      | `flow.csv`, `partition.csv`        | `lags.csv`                      |
//! | `fit`       | `flow.csv`, `partition.csv`, `lags.csv` | `model.json`               |
//! | `forecast`  | `model.json`, `flow.csv`, `partition.csv` | `forecast.csv`           |
//! | `evaluate`  | `flow.csv`, `partition.csv`, network | `evaluation.csv`, `evaluation.txt` |

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use starima_core::ccf::{ccf_profile, write_ccf_csv};
use starima_core::clustering::{isodata_1d, read_clusters_csv, write_clusters_csv};
use starima_core::data::{
    load_csv, read_network, read_panel_csv, smooth_panel, write_network, write_observations,
    write_panel_csv, Corridor, FlowPanel, StationNetwork,
};
use starima_core::evaluate::{ar_orders, evaluate, lags_for_mode, Evaluation};
use starima_core::lags::{read_lags_csv, write_lags_csv};
use starima_core::metrics::write_reports;
use starima_core::partition::{classify_labels, pool_speeds, read_partition_csv, write_partition_csv, DayPartition};
use starima_core::starima::{build_weights, fit, forecast, StarimaModel, StarimaSpec};
use starima_core::synth::generate;
use starima_core::Error;

use crate::config::PipelineConfig;
use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Generate,
    Smooth,
    Ccf,
    Cluster,
    Partition,
    Lags,
    Fit,
    Forecast,
    Evaluate,
}

impl Stage {
    pub const PIPELINE: [Stage; 8] = [
        Stage::Smooth,
        Stage::Ccf,
        Stage::Cluster,
        Stage::Partition,
        Stage::Lags,
        Stage::Fit,
        Stage::Forecast,
        Stage::Evaluate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Generate => "generate",
            Stage::Smooth => "smooth",
            Stage::Ccf => "ccf",
            Stage::Cluster => "cluster",
            Stage::Partition => "partition",
            Stage::Lags => "lags",
            Stage::Fit => "fit",
            Stage::Forecast => "forecast",
            Stage::Evaluate => "evaluate",
        }
    }

    /// Runs the stage and returns a one-paragraph summary for the terminal.
    pub fn run(self, config: &PipelineConfig) -> Result<String, CliError> {
        match self {
            Stage::Generate => run_generate(config),
            Stage::Smooth => run_smooth(config),
            Stage::Ccf => run_ccf(config),
            Stage::Cluster => run_cluster(config),
            Stage::Partition => run_partition(config),
            Stage::Lags => run_lags(config),
            Stage::Fit => run_fit(config),
            Stage::Forecast => run_forecast(config),
            Stage::Evaluate => run_evaluate(config),
        }
    }
}

/// Runs `generate` when no data file is configured, then every later stage.
pub fn run_pipeline(config: &PipelineConfig) -> Result<String, CliError> {
    let mut summary = String::new();
    let stages = config
        .data
        .is_none()
        .then_some(Stage::Generate)
        .into_iter()
        .chain(Stage::PIPELINE);
    for stage in stages {
        summary.push_str(&stage.run(config)?);
    }
    Ok(summary)
}

fn artifact(config: &PipelineConfig, name: &str, stage: Stage) -> Result<PathBuf, CliError> {
    let path = config.output.join(name);
    if path.is_file() {
        Ok(path)
    } else {
        Err(CliError::Dependency {
            path,
            stage: stage.name(),
        })
    }
}

fn open(path: &Path) -> Result<std::fs::File, CliError> {
    std::fs::File::open(path).map_err(|e| {
        CliError::Core(Error::Io {
            path: path.to_path_buf(),
            source: e,
        })
    })
}

fn write_file(
    path: &Path,
    fill: impl FnOnce(&mut Vec<u8>) -> starima_core::Result<()>,
) -> Result<(), CliError> {
    let mut buf = Vec::new();
    fill(&mut buf)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Write {
            path: dir.to_path_buf(),
            source: e,
        })?;
    }
    std::fs::write(path, buf).map_err(|e| CliError::Write {
        path: path.to_path_buf(),
        source: e,
    })
}

fn network(config: &PipelineConfig) -> Result<StationNetwork, CliError> {
    let path = config.network_path();
    if config.network.is_none() && !path.is_file() {
        return Err(CliError::Dependency {
            path,
            stage: Stage::Generate.name(),
        });
    }
    Ok(read_network(path)?)
}

fn flow_seconds(config: &PipelineConfig) -> f64 {
    config.slot_seconds * config.x_flow as f64
}

fn speed_seconds(config: &PipelineConfig) -> f64 {
    config.slot_seconds * config.x_speed as f64
}

fn flows(config: &PipelineConfig, network: &StationNetwork) -> Result<FlowPanel, CliError> {
    let path = artifact(config, "flow.csv", Stage::Smooth)?;
    let panel = read_panel_csv(open(&path)?, flow_seconds(config))?;
    if panel.stations() != network.stations() {
        return Err(Error::Schema(format!(
            "{} lists stations {:?} but the network lists {:?}; rerun `starima smooth`",
            path.display(),
            panel.stations(),
            network.stations()
        ))
        .into());
    }
    Ok(panel)
}

fn partition(config: &PipelineConfig) -> Result<DayPartition, CliError> {
    let path = artifact(config, "partition.csv", Stage::Partition)?;
    Ok(read_partition_csv(open(&path)?, speed_seconds(config))?)
}

fn run_generate(config: &PipelineConfig) -> Result<String, CliError> {
    let synth = generate(&config.synth.to_config(config.slot_seconds, config.seed))?;
    let corridor = Corridor::from_panels(synth.network.clone(), &synth.flows, &synth.speeds)?;
    let (data, net) = (config.data_path(), config.network_path());
    write_file(&data, |b| write_observations(&corridor, b))?;
    write_file(&net, |b| write_network(&synth.network, b))?;
    let truth = serde_json::to_string_pretty(&synth.truth).map_err(Error::from)?;
    write_file(&config.output.join("truth.json"), |b| {
        b.extend_from_slice(truth.as_bytes());
        Ok(())
    })?;
    Ok(format!(
        "generate: {} stations, {} slots, {} regimes -> {}\n",
        synth.network.len(),
        synth.flows.len(),
        synth.truth.regimes.len(),
        data.display()
    ))
}

fn run_smooth(config: &PipelineConfig) -> Result<String, CliError> {
    let net = network(config)?;
    let data = config.data_path();
    if config.data.is_none() && !data.is_file() {
        return Err(CliError::Dependency {
            path: data,
            stage: Stage::Generate.name(),
        });
    }
    let corridor = load_csv(&data, net, config.slot_seconds)?;
    let flow = smooth_panel(&corridor.flow_panel()?, config.x_flow)?;
    let speed = smooth_panel(&corridor.speed_panel()?, config.x_speed)?;
    write_file(&config.output.join("flow.csv"), |b| write_panel_csv(&flow, b))?;
    write_file(&config.output.join("speed.csv"), |b| write_panel_csv(&speed, b))?;
    Ok(format!(
        "smooth: {} flow slots of {} s, {} speed slots of {} s\n",
        flow.len(),
        flow.slot_seconds(),
        speed.len(),
        speed.slot_seconds()
    ))
}

fn run_ccf(config: &PipelineConfig) -> Result<String, CliError> {
    let net = network(config)?;
    let flows = flows(config, &net)?;
    let max_order = config.model.lambda.min(net.len().saturating_sub(1));
    let mut profiles = Vec::new();
    for order in 1..=max_order {
        for down in 0..net.len() {
            if let Some(up) = net.upstream_neighbor(down, order) {
                profiles.push(
                    ccf_profile(flows.column(up), flows.column(down), config.model.ccf_k_max)?
                        .with_pair(&net.stations()[up], &net.stations()[down]),
                );
            }
        }
    }
    write_file(&config.output.join("ccf.csv"), |b| write_ccf_csv(&profiles, b))?;
    Ok(format!("ccf: {} station pairs\n", profiles.len()))
}

fn run_cluster(config: &PipelineConfig) -> Result<String, CliError> {
    let path = artifact(config, "speed.csv", Stage::Smooth)?;
    let speeds = read_panel_csv(open(&path)?, speed_seconds(config))?;
    if speeds.start_slot() != 0 {
        return Err(Error::Range(format!(
            "speeds start at slot {} but a day starts at slot 0",
            speeds.start_slot()
        ))
        .into());
    }
    let pooled = pool_speeds(&speeds, &config.pooling)?;
    let clusters = isodata_1d(&pooled, &config.isodata_params())?;
    write_file(&config.output.join("clusters.csv"), |b| {
        write_clusters_csv(&clusters, &pooled, b)
    })?;
    let centers: Vec<String> = clusters
        .clusters
        .iter()
        .map(|c| format!("{:.2} ft/s ({} slots)", c.center, c.members.len()))
        .collect();
    Ok(format!(
        "cluster: {} clusters: {}\n",
        clusters.len(),
        centers.join(", ")
    ))
}

fn run_partition(config: &PipelineConfig) -> Result<String, CliError> {
    let path = artifact(config, "clusters.csv", Stage::Cluster)?;
    let (labels, speeds) = read_clusters_csv(open(&path)?)?;
    let partition = classify_labels(&labels, &speeds, config.delta, speed_seconds(config))?;
    write_file(&config.output.join("partition.csv"), |b| {
        write_partition_csv(&partition, b)
    })?;
    let mut out = format!("partition: {} ranges\n", partition.len());
    for p in &partition.periods {
        let _ = writeln!(
            out,
            "  slots {:>4}..={:<4} cluster {} mean speed {:.2} ft/s",
            p.start, p.end, p.cluster_id, p.mean_speed
        );
    }
    Ok(out)
}

fn run_lags(config: &PipelineConfig) -> Result<String, CliError> {
    let net = network(config)?;
    let flows = flows(config, &net)?;
    let partition = partition(config)?;
    let lags = lags_for_mode(
        config.lag_mode,
        &net,
        &flows,
        &partition,
        config.model.lambda,
        config.model.ccf_k_max,
    )?;
    write_file(&config.output.join("lags.csv"), |b| write_lags_csv(&lags, &net, b))?;
    Ok(format!(
        "lags: {} lags for {} ranges, largest {} slots\n",
        config.lag_mode.as_str(),
        lags.n_ranges(),
        lags.max_lag()
    ))
}

fn run_fit(config: &PipelineConfig) -> Result<String, CliError> {
    let net = network(config)?;
    let flows = flows(config, &net)?;
    let partition = partition(config)?;
    let lags_path = artifact(config, "lags.csv", Stage::Lags)?;
    let lags = read_lags_csv(open(&lags_path)?, &net)?;
    let m = &config.model;
    let spec = StarimaSpec {
        lambda: m.lambda,
        d: m.d,
        q: m.q,
        m_k: m.m_k.clone().unwrap_or_else(|| vec![m.lambda; m.q]),
        lag_mode: config.lag_mode,
        ar_order_l0: ar_orders(&flows, m.d, m.ar_order)?,
        refit: m.refit,
    };
    let model = fit(&flows, &spec, &build_weights(&net, m.lambda)?, &lags, &partition)?;
    let json = model.to_json()?;
    write_file(&config.output.join("model.json"), |b| {
        b.extend_from_slice(json.as_bytes());
        Ok(())
    })?;
    Ok(format!(
        "fit: {} coefficient set(s), residual variance {:.4}\n",
        model.coefficients.len(),
        model.residual_variance
    ))
}

fn run_forecast(config: &PipelineConfig) -> Result<String, CliError> {
    let net = network(config)?;
    let flows = flows(config, &net)?;
    let partition = partition(config)?;
    let model_path = artifact(config, "model.json", Stage::Fit)?;
    let text = std::fs::read_to_string(&model_path).map_err(|e| Error::Io {
        path: model_path.clone(),
        source: e,
    })?;
    let model = StarimaModel::from_json(&text)?;
    let origin = match config.forecast_origin {
        Some(o) => o,
        None => flows.len().checked_sub(config.horizon).ok_or_else(|| Error::Length {
            context: "forecast history".into(),
            needed: config.horizon,
            got: flows.len(),
        })?,
    };
    if origin == 0 || origin > flows.len() {
        return Err(Error::Range(format!(
            "forecast origin {origin} outside 1..={}",
            flows.len()
        ))
        .into());
    }
    let pred = forecast(&model, &flows.slice(0..origin)?, config.horizon, &partition)?;
    write_file(&config.output.join("forecast.csv"), |b| {
        use std::io::Write;
        let io = |e| Error::Io {
            path: "<forecast output>".into(),
            source: e,
        };
        writeln!(b, "slot,station,forecast,actual").map_err(io)?;
        for t in 0..pred.len() {
            let row = origin + t;
            for (n, id) in pred.stations().iter().enumerate() {
                let actual = if row < flows.len() {
                    flows.value(row, n).to_string()
                } else {
                    String::new()
                };
                writeln!(b, "{},{id},{},{actual}", pred.start_slot() + t as i64, pred.value(t, n))
                    .map_err(io)?;
            }
        }
        Ok(())
    })?;
    Ok(format!(
        "forecast: {} slots from row {origin}\n",
        config.horizon
    ))
}

/// Per-window MAPE tables, one per method, followed by whole-day MAPE by
/// station and method.
pub fn evaluation_tables(ev: &Evaluation, stations: &[String]) -> String {
    let mut out = String::new();
    for m in &ev.methods {
        let _ = writeln!(out, "MAPE (%) {}", m.method);
        let _ = write!(out, "{:<10}", "station");
        for w in &ev.windows {
            let _ = write!(out, "{:>10}", w.label);
        }
        let _ = writeln!(out);
        for s in stations {
            let _ = write!(out, "{s:<10}");
            for w in &ev.windows {
                let r = m
                    .per_window
                    .iter()
                    .find(|r| &r.station_id == s && r.range_label == w.label);
                let _ = match r {
                    Some(r) => write!(out, "{:>10.2}", r.mape * 100.0),
                    None => write!(out, "{:>10}", "-"),
                };
            }
            let _ = writeln!(out);
        }
        let _ = writeln!(out);
    }
    let _ = writeln!(out, "MAPE (%) whole day");
    let _ = write!(out, "{:<10}", "station");
    for m in &ev.methods {
        let _ = write!(out, "{:>16}", m.method);
    }
    let _ = writeln!(out);
    for s in stations {
        let _ = write!(out, "{s:<10}");
        for m in &ev.methods {
            let _ = match m.overall_for(s) {
                Some(r) => write!(out, "{:>16.2}", r.mape * 100.0),
                None => write!(out, "{:>16}", "-"),
            };
        }
        let _ = writeln!(out);
    }
    out
}

fn run_evaluate(config: &PipelineConfig) -> Result<String, CliError> {
    let net = network(config)?;
    let flows = flows(config, &net)?;
    let partition = partition(config)?;
    let ev = evaluate(&net, &flows, &partition, &config.eval_config())?;
    write_file(&config.output.join("evaluation.csv"), |b| {
        write_reports(&ev.reports(), b)
    })?;
    let tables = evaluation_tables(&ev, net.stations());
    write_file(&config.output.join("evaluation.txt"), |b| {
        b.extend_from_slice(tables.as_bytes());
        Ok(())
    })?;
    Ok(format!("evaluate: {} windows\n{tables}", ev.windows.len()))
}
