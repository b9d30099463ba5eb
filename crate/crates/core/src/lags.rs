//! Temporal lags between upstream and downstream stations.
//!
//! A vehicle needs roughly `distance / speed` seconds to cover the gap between
//! two stations, so the downstream flow echoes the upstream flow
//! `round(distance / speed / tau)` slots later. Lags are derived per speed
//! regime from that travel time, or read off the cross-correlation peak as a
//! data-driven comparison.

use std::io::{Read, Write};
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::ccf::{best_lag, ccf_profile};
use crate::data::{FlowPanel, StationNetwork};
use crate::error::{Error, Result};
use crate::partition::{DayPartition, TimeRange};

/// Where a lag value came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LagSource {
    Speed,
    Ccf,
}

impl LagSource {
    pub fn as_str(self) -> &'static str {
        match self {
            LagSource::Speed => "speed",
            LagSource::Ccf => "ccf",
        }
    }
}

impl std::str::FromStr for LagSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "speed" => Ok(LagSource::Speed),
            "ccf" => Ok(LagSource::Ccf),
            other => Err(Error::Parameter(format!("unknown lag source `{other}`"))),
        }
    }
}

/// How the spatial lag structure is chosen for a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LagMode {
    /// Travel-time lags recomputed from each regime's mean speed.
    SpeedVarying,
    /// One cross-correlation lag per station pair for the whole day.
    FixedCcf,
    /// One travel-time lag per station pair from the day's mean speed.
    FixedConstant,
}

impl std::str::FromStr for LagMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "speed_varying" => Ok(LagMode::SpeedVarying),
            "fixed_ccf" => Ok(LagMode::FixedCcf),
            "fixed_constant" => Ok(LagMode::FixedConstant),
            other => Err(Error::Parameter(format!("unknown lag mode `{other}`"))),
        }
    }
}

impl LagMode {
    pub fn as_str(self) -> &'static str {
        match self {
            LagMode::SpeedVarying => "speed_varying",
            LagMode::FixedCcf => "fixed_ccf",
            LagMode::FixedConstant => "fixed_constant",
        }
    }
}

/// Lags at one spatial order. `entries[m][n]` is the delay in slots from
/// upstream station `m` to station `n`, defined only when `m` is exactly
/// `order` hops upstream of `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagMatrix {
    pub order: usize,
    pub entries: Vec<Vec<Option<usize>>>,
    pub source: LagSource,
    /// Regime speed the lags were derived from, for speed lags.
    pub speed: Option<f64>,
}

impl LagMatrix {
    pub fn get(&self, m: usize, n: usize) -> Option<usize> {
        self.entries[m][n]
    }

    /// `(upstream, downstream, lag)` for every defined entry.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        self.entries.iter().enumerate().flat_map(|(m, row)| {
            row.iter()
                .enumerate()
                .filter_map(move |(n, v)| v.map(|lag| (m, n, lag)))
        })
    }

    pub fn max_lag(&self) -> usize {
        self.pairs().map(|(_, _, l)| l).max().unwrap_or(0)
    }
}

/// Slots needed to travel `distance_feet` at `speed` (feet per second), rounded
/// half up and at least 1.
pub fn travel_lag(distance_feet: f64, speed: f64, tau_seconds: f64) -> Result<usize> {
    if !(speed.is_finite() && speed > 0.0) {
        return Err(Error::Parameter(format!(
            "speed must be positive, got {speed}; the regime is stalled"
        )));
    }
    if !(distance_feet.is_finite() && distance_feet > 0.0) {
        return Err(Error::Parameter(format!(
            "distance must be positive, got {distance_feet}"
        )));
    }
    if !(tau_seconds.is_finite() && tau_seconds > 0.0) {
        return Err(Error::Parameter(format!(
            "slot length must be positive, got {tau_seconds}"
        )));
    }
    let slots = (distance_feet / speed / tau_seconds + 0.5).floor();
    Ok((slots as usize).max(1))
}

fn check_lambda(network: &StationNetwork, lambda: usize) -> Result<()> {
    if lambda >= network.len() {
        return Err(Error::Parameter(format!(
            "spatial order {lambda} needs more than {} stations",
            network.len()
        )));
    }
    Ok(())
}

fn matrices_with(
    network: &StationNetwork,
    lambda: usize,
    source: LagSource,
    speed: Option<f64>,
    mut lag: impl FnMut(usize, usize, usize) -> Result<usize>,
) -> Result<Vec<LagMatrix>> {
    check_lambda(network, lambda)?;
    let n = network.len();
    (1..=lambda)
        .map(|order| {
            let mut entries = vec![vec![None; n]; n];
            for down in 0..n {
                if let Some(up) = network.upstream_neighbor(down, order) {
                    entries[up][down] = Some(lag(order, up, down)?);
                }
            }
            Ok(LagMatrix {
                order,
                entries,
                source,
                speed,
            })
        })
        .collect()
}

/// Travel-time lags for spatial orders `1..=lambda` at a single speed.
pub fn lag_matrices_at_speed(
    network: &StationNetwork,
    speed: f64,
    lambda: usize,
    tau_seconds: f64,
) -> Result<Vec<LagMatrix>> {
    matrices_with(network, lambda, LagSource::Speed, Some(speed), |_, m, n| {
        travel_lag(network.distance(m, n), speed, tau_seconds)
    })
}

/// Travel-time lags for spatial orders `1..=lambda` at the regime's mean speed.
pub fn build_lag_matrices(
    network: &StationNetwork,
    regime: &TimeRange,
    lambda: usize,
    tau_seconds: f64,
) -> Result<Vec<LagMatrix>> {
    lag_matrices_at_speed(network, regime.mean_speed, lambda, tau_seconds)
}

/// Lag `1..=k_max` with the largest cross-correlation of `u_t` and `y_{t+k}`.
pub fn lag_from_ccf(u: &[f64], y: &[f64], k_max: usize) -> Result<usize> {
    if k_max == 0 {
        return Err(Error::Parameter("k_max must be at least 1".into()));
    }
    let mut profile = ccf_profile(u, y, k_max)?;
    profile.lags.remove(0);
    profile.correlations.remove(0);
    best_lag(&profile)
}

/// Cross-correlation lags per station pair over panel rows `rows`.
pub fn ccf_lag_matrices(
    network: &StationNetwork,
    panel: &FlowPanel,
    lambda: usize,
    k_max: usize,
    rows: Range<usize>,
) -> Result<Vec<LagMatrix>> {
    if rows.end > panel.len() || rows.start >= rows.end {
        return Err(Error::Range(format!(
            "rows {rows:?} outside panel of length {}",
            panel.len()
        )));
    }
    matrices_with(network, lambda, LagSource::Ccf, None, |_, m, n| {
        lag_from_ccf(
            &panel.column(m)[rows.clone()],
            &panel.column(n)[rows.clone()],
            k_max,
        )
    })
}

/// Lag matrices for every range of a partition, indexed by range then by
/// spatial order minus one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeLags {
    pub per_range: Vec<Vec<LagMatrix>>,
}

impl RegimeLags {
    /// Speed-derived lags that follow each range's mean speed.
    pub fn speed_varying(
        network: &StationNetwork,
        partition: &DayPartition,
        lambda: usize,
        tau_seconds: f64,
    ) -> Result<Self> {
        let per_range = partition
            .periods
            .iter()
            .map(|r| build_lag_matrices(network, r, lambda, tau_seconds))
            .collect::<Result<_>>()?;
        Ok(Self { per_range })
    }

    /// The same matrices for every range.
    pub fn fixed(matrices: Vec<LagMatrix>, n_ranges: usize) -> Self {
        Self {
            per_range: vec![matrices; n_ranges],
        }
    }

    pub fn n_ranges(&self) -> usize {
        self.per_range.len()
    }

    pub fn lambda(&self) -> usize {
        self.per_range.first().map_or(0, Vec::len)
    }

    pub fn lag(&self, range: usize, order: usize, m: usize, n: usize) -> Option<usize> {
        self.per_range[range][order - 1].get(m, n)
    }

    pub fn max_lag(&self) -> usize {
        self.per_range
            .iter()
            .flatten()
            .map(LagMatrix::max_lag)
            .max()
            .unwrap_or(0)
    }
}

/// Writes `range,order,from,to,lag_slots,lag_source` rows, station ids in
/// `from` and `to`.
pub fn write_lags_csv(lags: &RegimeLags, network: &StationNetwork, mut out: impl Write) -> Result<()> {
    let io = |e| Error::io("<lag output>", e);
    let ids = network.stations();
    writeln!(out, "range,order,from,to,lag_slots,lag_source").map_err(io)?;
    for (r, mats) in lags.per_range.iter().enumerate() {
        for mat in mats {
            for (m, n, lag) in mat.pairs() {
                writeln!(
                    out,
                    "{r},{},{},{},{lag},{}",
                    mat.order,
                    ids[m],
                    ids[n],
                    mat.source.as_str()
                )
                .map_err(io)?;
            }
        }
    }
    Ok(())
}

/// Reads what [`write_lags_csv`] writes. Regime speeds are not stored, so
/// the matrices come back with `speed: None`.
pub fn read_lags_csv(input: impl Read, network: &StationNetwork) -> Result<RegimeLags> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    let n = network.len();
    let mut per_range: Vec<Vec<LagMatrix>> = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let line = row as u64 + 2;
        let record = record.map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        let field = |i: usize, what: &str| -> Result<String> {
            record.get(i).map(str::to_string).ok_or_else(|| Error::Parse {
                line,
                message: format!("missing {what}"),
            })
        };
        let num = |i: usize, what: &str| -> Result<usize> {
            field(i, what)?.parse().map_err(|_| Error::Parse {
                line,
                message: format!("cannot parse {what}"),
            })
        };
        let station = |i: usize, what: &str| -> Result<usize> {
            let id = field(i, what)?;
            network
                .index_of(&id)
                .ok_or_else(|| Error::Lookup(format!("station {id} at line {line} is not in the network")))
        };
        let (range, order) = (num(0, "range")?, num(1, "order")?);
        let (m, d) = (station(2, "from")?, station(3, "to")?);
        let lag = num(4, "lag_slots")?;
        let source: LagSource = field(5, "lag_source")?.parse()?;
        if order == 0 || network.spatial_order(m, d) != order || m >= d {
            return Err(Error::Parse {
                line,
                message: format!("{} -> {} is not an order {order} upstream pair", field(2, "from")?, field(3, "to")?),
            });
        }
        if range > per_range.len() {
            return Err(Error::Parse {
                line,
                message: format!("range {range} skips range {}", per_range.len()),
            });
        }
        if range == per_range.len() {
            per_range.push(Vec::new());
        }
        let mats = &mut per_range[range];
        while mats.len() < order {
            mats.push(LagMatrix {
                order: mats.len() + 1,
                entries: vec![vec![None; n]; n],
                source,
                speed: None,
            });
        }
        mats[order - 1].entries[m][d] = Some(lag);
    }
    if per_range.is_empty() {
        return Err(Error::Schema("lag file has no rows".into()));
    }
    let lambda = per_range[0].len();
    if per_range.iter().any(|m| m.len() != lambda) {
        return Err(Error::Schema("ranges list different spatial orders".into()));
    }
    Ok(RegimeLags { per_range })
}
