//! Domain types for detector readings, CSV ingestion, slot-mean smoothing and
//! differencing.
//!
//! Readings arrive as one row per station per slot:
//!
//! ```text
//! slot,station,flow,speed
//! 0,s3,12,67.2
//! 0,s4,11,66.9
//! ```
//!
//! and a separate network file lists the stations upstream to downstream:
//!
//! ```text
//! station,position_feet
//! s3,0
//! s4,1650
//! ```
//!
//! Missing readings are not imputed. A gap in a station's slot sequence is an
//! ingestion error.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// What a series measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesKind {
    /// Vehicles per slot.
    Flow,
    /// Feet per second.
    Speed,
}

/// A per-station sequence of fixed-width slot readings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotSeries {
    station_id: String,
    kind: SeriesKind,
    slot_seconds: f64,
    start_slot: i64,
    values: Vec<f64>,
}

impl SlotSeries {
    pub fn new(
        station_id: impl Into<String>,
        kind: SeriesKind,
        slot_seconds: f64,
        start_slot: i64,
        values: Vec<f64>,
    ) -> Result<Self> {
        let station_id = station_id.into();
        if !(slot_seconds.is_finite() && slot_seconds > 0.0) {
            return Err(Error::Parameter(format!(
                "slot_seconds must be positive, got {slot_seconds}"
            )));
        }
        if values.is_empty() {
            return Err(Error::Length {
                context: format!("series for station {station_id}"),
                needed: 1,
                got: 0,
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Input(format!(
                "non-finite value at index {i} for station {station_id}"
            )));
        }
        if kind == SeriesKind::Speed {
            if let Some(i) = values.iter().position(|&v| v < 0.0) {
                return Err(Error::Input(format!(
                    "negative speed at index {i} for station {station_id}"
                )));
            }
        }
        Ok(Self {
            station_id,
            kind,
            slot_seconds,
            start_slot,
            values,
        })
    }

    pub fn station_id(&self) -> &str {
        &self.station_id
    }

    pub fn kind(&self) -> SeriesKind {
        self.kind
    }

    pub fn slot_seconds(&self) -> f64 {
        self.slot_seconds
    }

    pub fn start_slot(&self) -> i64 {
        self.start_slot
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// Time-by-station matrix of readings. Row `t` is the corridor state at slot
/// `start_slot + t`, column `n` is station `n` in network order.
///
/// Used for both flows and speeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowPanel {
    stations: Vec<String>,
    slot_seconds: f64,
    start_slot: i64,
    columns: Vec<Vec<f64>>,
}

impl FlowPanel {
    pub fn new(
        stations: Vec<String>,
        slot_seconds: f64,
        start_slot: i64,
        columns: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if stations.len() != columns.len() {
            return Err(Error::Shape(format!(
                "{} station ids for {} columns",
                stations.len(),
                columns.len()
            )));
        }
        if stations.is_empty() {
            return Err(Error::Shape("panel has no stations".into()));
        }
        if !(slot_seconds.is_finite() && slot_seconds > 0.0) {
            return Err(Error::Parameter(format!(
                "slot_seconds must be positive, got {slot_seconds}"
            )));
        }
        let len = columns[0].len();
        if let Some(n) = columns.iter().position(|c| c.len() != len) {
            return Err(Error::Shape(format!(
                "column {} has length {}, expected {len}",
                stations[n],
                columns[n].len()
            )));
        }
        for (id, col) in stations.iter().zip(&columns) {
            if let Some(i) = col.iter().position(|v| !v.is_finite()) {
                return Err(Error::Input(format!(
                    "non-finite value at row {i} for station {id}"
                )));
            }
        }
        Ok(Self {
            stations,
            slot_seconds,
            start_slot,
            columns,
        })
    }

    /// Builds a panel from equally long series sharing slot width and start.
    pub fn from_series(series: &[SlotSeries]) -> Result<Self> {
        let first = series
            .first()
            .ok_or_else(|| Error::Shape("no series given".into()))?;
        for s in series {
            if s.slot_seconds != first.slot_seconds || s.start_slot != first.start_slot {
                return Err(Error::Shape(format!(
                    "series {} is not aligned with {}",
                    s.station_id, first.station_id
                )));
            }
        }
        Self::new(
            series.iter().map(|s| s.station_id.clone()).collect(),
            first.slot_seconds,
            first.start_slot,
            series.iter().map(|s| s.values.clone()).collect(),
        )
    }

    pub fn stations(&self) -> &[String] {
        &self.stations
    }

    pub fn n_stations(&self) -> usize {
        self.stations.len()
    }

    /// Number of time rows.
    pub fn len(&self) -> usize {
        self.columns[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn slot_seconds(&self) -> f64 {
        self.slot_seconds
    }

    pub fn start_slot(&self) -> i64 {
        self.start_slot
    }

    pub fn column(&self, n: usize) -> &[f64] {
        &self.columns[n]
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn value(&self, t: usize, n: usize) -> f64 {
        self.columns[n][t]
    }

    pub fn row(&self, t: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[t]).collect()
    }

    pub fn station_index(&self, id: &str) -> Option<usize> {
        self.stations.iter().position(|s| s == id)
    }

    /// Rows `range` as a new panel; the start slot moves with the range.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Result<Self> {
        if range.start >= range.end || range.end > self.len() {
            return Err(Error::Range(format!(
                "row range {range:?} outside panel of length {}",
                self.len()
            )));
        }
        Self::new(
            self.stations.clone(),
            self.slot_seconds,
            self.start_slot + range.start as i64,
            self.columns.iter().map(|c| c[range.clone()].to_vec()).collect(),
        )
    }

    /// Every value multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            columns: self
                .columns
                .iter()
                .map(|c| c.iter().map(|v| v * factor).collect())
                .collect(),
            ..self.clone()
        }
    }

    /// Per-slot mean across stations.
    pub fn row_means(&self) -> Vec<f64> {
        let n = self.n_stations() as f64;
        (0..self.len())
            .map(|t| self.columns.iter().map(|c| c[t]).sum::<f64>() / n)
            .collect()
    }

    pub fn to_series(&self, kind: SeriesKind) -> Result<Vec<SlotSeries>> {
        self.stations
            .iter()
            .zip(&self.columns)
            .map(|(id, col)| {
                SlotSeries::new(id.clone(), kind, self.slot_seconds, self.start_slot, col.clone())
            })
            .collect()
    }
}

/// Stations ordered along the travel direction, upstream first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationNetwork {
    stations: Vec<String>,
    positions: Vec<f64>,
}

impl StationNetwork {
    /// `positions` are cumulative distances in feet from the first station.
    pub fn new(stations: Vec<String>, positions: Vec<f64>) -> Result<Self> {
        if stations.is_empty() {
            return Err(Error::Schema("network has no stations".into()));
        }
        if stations.len() != positions.len() {
            return Err(Error::Shape(format!(
                "{} stations but {} positions",
                stations.len(),
                positions.len()
            )));
        }
        if positions.iter().any(|p| !p.is_finite()) {
            return Err(Error::Schema("non-finite station position".into()));
        }
        for w in positions.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::Schema(format!(
                    "station positions must strictly increase ({} then {})",
                    w[0], w[1]
                )));
            }
        }
        for (i, s) in stations.iter().enumerate() {
            if stations[..i].contains(s) {
                return Err(Error::Schema(format!("duplicate station {s}")));
            }
        }
        Ok(Self {
            stations,
            positions,
        })
    }

    /// Evenly spaced chain of `n` stations named `s1..sn`.
    pub fn uniform(n: usize, spacing_feet: f64) -> Result<Self> {
        Self::new(
            (1..=n).map(|i| format!("s{i}")).collect(),
            (0..n).map(|i| i as f64 * spacing_feet).collect(),
        )
    }

    pub fn stations(&self) -> &[String] {
        &self.stations
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.stations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stations.is_empty()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.stations.iter().position(|s| s == id)
    }

    /// Distance in feet between stations `m` and `n`.
    pub fn distance(&self, m: usize, n: usize) -> f64 {
        (self.positions[n] - self.positions[m]).abs()
    }

    /// Hop count between two stations along the chain.
    pub fn spatial_order(&self, m: usize, n: usize) -> usize {
        m.abs_diff(n)
    }

    /// The station `order` hops upstream of `n`, if any.
    pub fn upstream_neighbor(&self, n: usize, order: usize) -> Option<usize> {
        if order == 0 {
            return Some(n);
        }
        n.checked_sub(order)
    }
}

/// Flow and speed readings of one station over the same slots.
#[derive(Debug, Clone, PartialEq)]
pub struct StationSeries {
    pub flow: SlotSeries,
    pub speed: SlotSeries,
}

/// Everything read from a data file plus its network file.
#[derive(Debug, Clone, PartialEq)]
pub struct Corridor {
    pub network: StationNetwork,
    pub series: BTreeMap<String, StationSeries>,
}

impl Corridor {
    /// Builds a corridor from aligned flow and speed panels in network order.
    pub fn from_panels(
        network: StationNetwork,
        flows: &FlowPanel,
        speeds: &FlowPanel,
    ) -> Result<Self> {
        if flows.stations() != network.stations() || speeds.stations() != network.stations() {
            return Err(Error::Schema("panel stations differ from network order".into()));
        }
        if flows.len() != speeds.len() || flows.start_slot() != speeds.start_slot() {
            return Err(Error::Shape("flow and speed panels are not aligned".into()));
        }
        let mut series = BTreeMap::new();
        for (flow, speed) in flows
            .to_series(SeriesKind::Flow)?
            .into_iter()
            .zip(speeds.to_series(SeriesKind::Speed)?)
        {
            series.insert(flow.station_id.clone(), StationSeries { flow, speed });
        }
        Ok(Self { network, series })
    }

    fn panel(&self, pick: impl Fn(&StationSeries) -> &SlotSeries) -> Result<FlowPanel> {
        let series = self
            .network
            .stations()
            .iter()
            .map(|id| {
                self.series
                    .get(id)
                    .map(|s| pick(s).clone())
                    .ok_or_else(|| Error::Schema(format!("missing station {id}")))
            })
            .collect::<Result<Vec<_>>>()?;
        FlowPanel::from_series(&series)
    }

    /// Flows with columns in network order.
    pub fn flow_panel(&self) -> Result<FlowPanel> {
        self.panel(|s| &s.flow)
    }

    /// Speeds with columns in network order.
    pub fn speed_panel(&self) -> Result<FlowPanel> {
        self.panel(|s| &s.speed)
    }
}

fn open(path: &Path) -> Result<std::fs::File> {
    std::fs::File::open(path).map_err(|e| Error::io(path, e))
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(err) => Error::Parse {
            line,
            message: err.to_string(),
        },
        kind => Error::Parse {
            line,
            message: format!("{kind:?}"),
        },
    }
}

fn check_header(rdr: &mut csv::Reader<impl Read>, expected: &[&str]) -> Result<()> {
    let header = rdr.headers().map_err(csv_error)?;
    if header.is_empty() || (header.len() == 1 && header[0].trim().is_empty()) {
        return Err(Error::Schema("empty file, header required".into()));
    }
    let got: Vec<&str> = header.iter().map(str::trim).collect();
    if got != expected {
        return Err(Error::Schema(format!(
            "expected header `{}`, got `{}`",
            expected.join(","),
            got.join(",")
        )));
    }
    Ok(())
}

fn parse_field<T: std::str::FromStr>(record: &csv::StringRecord, idx: usize, name: &str) -> Result<T> {
    let line = record.position().map(|p| p.line()).unwrap_or(0);
    let raw = record.get(idx).ok_or_else(|| Error::Parse {
        line,
        message: format!("missing field `{name}`"),
    })?;
    raw.trim().parse().map_err(|_| Error::Parse {
        line,
        message: format!("cannot parse `{name}` from `{raw}`"),
    })
}

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(input)
}

/// Reads a `station,position_feet` network file.
pub fn read_network(path: impl AsRef<Path>) -> Result<StationNetwork> {
    parse_network(open(path.as_ref())?)
}

pub fn parse_network(input: impl Read) -> Result<StationNetwork> {
    let mut rdr = reader(input);
    check_header(&mut rdr, &["station", "position_feet"])?;
    let mut stations = Vec::new();
    let mut positions = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(csv_error)?;
        stations.push(parse_field::<String>(&record, 0, "station")?);
        let pos: f64 = parse_field(&record, 1, "position_feet")?;
        if !pos.is_finite() {
            return Err(Error::Parse {
                line: record.position().map(|p| p.line()).unwrap_or(0),
                message: "position_feet must be finite".into(),
            });
        }
        positions.push(pos);
    }
    StationNetwork::new(stations, positions)
}

struct Rows {
    first_slot: i64,
    last_line: u64,
    flow: Vec<f64>,
    speed: Vec<f64>,
}

/// Reads a `slot,station,flow,speed` data file, keeping the stations listed in
/// `network`. Stations present in the data but absent from the network are
/// ignored.
pub fn load_csv(
    data_path: impl AsRef<Path>,
    network: StationNetwork,
    slot_seconds: f64,
) -> Result<Corridor> {
    parse_observations(open(data_path.as_ref())?, network, slot_seconds)
}

/// Reads both files.
pub fn load_corridor(
    data_path: impl AsRef<Path>,
    network_path: impl AsRef<Path>,
    slot_seconds: f64,
) -> Result<Corridor> {
    let network = read_network(network_path)?;
    load_csv(data_path, network, slot_seconds)
}

pub fn parse_observations(
    input: impl Read,
    network: StationNetwork,
    slot_seconds: f64,
) -> Result<Corridor> {
    let mut rdr = reader(input);
    check_header(&mut rdr, &["slot", "station", "flow", "speed"])?;
    let mut rows: BTreeMap<String, Rows> = BTreeMap::new();
    for record in rdr.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != 4 {
            return Err(Error::Parse {
                line,
                message: format!("expected 4 fields, got {}", record.len()),
            });
        }
        let slot: i64 = parse_field(&record, 0, "slot")?;
        let station: String = parse_field(&record, 1, "station")?;
        let flow: f64 = parse_field(&record, 2, "flow")?;
        let speed: f64 = parse_field(&record, 3, "speed")?;
        for (name, v) in [("flow", flow), ("speed", speed)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Parse {
                    line,
                    message: format!("{name} must be finite and non-negative, got {v}"),
                });
            }
        }
        match rows.get_mut(&station) {
            None => {
                rows.insert(
                    station,
                    Rows {
                        first_slot: slot,
                        last_line: line,
                        flow: vec![flow],
                        speed: vec![speed],
                    },
                );
            }
            Some(r) => {
                let expected = r.first_slot + r.flow.len() as i64;
                if slot < expected {
                    return Err(Error::Ordering {
                        station,
                        line,
                        message: format!(
                            "slot {slot} does not increase past {} (previous at line {})",
                            expected - 1,
                            r.last_line
                        ),
                    });
                }
                if slot > expected {
                    return Err(Error::Ordering {
                        station,
                        line,
                        message: format!("gap: expected slot {expected}, got {slot}"),
                    });
                }
                r.flow.push(flow);
                r.speed.push(speed);
                r.last_line = line;
            }
        }
    }
    if rows.is_empty() {
        return Err(Error::Schema("data file has no rows".into()));
    }

    let mut series = BTreeMap::new();
    let mut reference: Option<(&str, i64, usize)> = None;
    for id in network.stations() {
        let r = rows
            .get(id)
            .ok_or_else(|| Error::Schema(format!("network station {id} missing from data")))?;
        match reference {
            None => reference = Some((id, r.first_slot, r.flow.len())),
            Some((ref_id, start, len)) => {
                if r.first_slot != start || r.flow.len() != len {
                    return Err(Error::Schema(format!(
                        "station {id} covers slots {}..{} but {ref_id} covers {start}..{}",
                        r.first_slot,
                        r.first_slot + r.flow.len() as i64,
                        start + len as i64
                    )));
                }
            }
        }
        series.insert(
            id.clone(),
            StationSeries {
                flow: SlotSeries::new(
                    id.clone(),
                    SeriesKind::Flow,
                    slot_seconds,
                    r.first_slot,
                    r.flow.clone(),
                )?,
                speed: SlotSeries::new(
                    id.clone(),
                    SeriesKind::Speed,
                    slot_seconds,
                    r.first_slot,
                    r.speed.clone(),
                )?,
            },
        );
    }
    Ok(Corridor { network, series })
}

/// Writes the canonical data file: rows ordered by slot, then by network order.
pub fn write_observations(corridor: &Corridor, out: impl Write) -> Result<()> {
    let flows = corridor.flow_panel()?;
    let speeds = corridor.speed_panel()?;
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Parse {
        line: 0,
        message: e.to_string(),
    };
    w.write_record(["slot", "station", "flow", "speed"])
        .map_err(csv_err)?;
    for t in 0..flows.len() {
        let slot = (flows.start_slot() + t as i64).to_string();
        for (n, id) in flows.stations().iter().enumerate() {
            w.write_record([
                slot.as_str(),
                id.as_str(),
                &flows.value(t, n).to_string(),
                &speeds.value(t, n).to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush().map_err(|e| Error::Parse {
        line: 0,
        message: e.to_string(),
    })
}

pub fn write_network(network: &StationNetwork, mut out: impl Write) -> Result<()> {
    let io = |e| Error::io("<network output>", e);
    writeln!(out, "station,position_feet").map_err(io)?;
    for (id, pos) in network.stations().iter().zip(network.positions()) {
        writeln!(out, "{id},{pos}").map_err(io)?;
    }
    Ok(())
}

/// Writes a panel in wide form: `slot,<station>,...`, one row per slot.
pub fn write_panel_csv(panel: &FlowPanel, mut out: impl Write) -> Result<()> {
    let io = |e| Error::io("<panel output>", e);
    writeln!(out, "slot,{}", panel.stations().join(",")).map_err(io)?;
    for t in 0..panel.len() {
        write!(out, "{}", panel.start_slot() + t as i64).map_err(io)?;
        for v in panel.row(t) {
            write!(out, ",{v}").map_err(io)?;
        }
        writeln!(out).map_err(io)?;
    }
    Ok(())
}

/// Reads what [`write_panel_csv`] writes. Slots must be consecutive.
pub fn read_panel_csv(input: impl Read, slot_seconds: f64) -> Result<FlowPanel> {
    let mut rdr = reader(input);
    let header = rdr.headers().map_err(csv_error)?.clone();
    if header.get(0).map(str::trim) != Some("slot") || header.len() < 2 {
        return Err(Error::Schema("expected header `slot,<station>,...`".into()));
    }
    let stations: Vec<String> = header.iter().skip(1).map(|h| h.trim().to_string()).collect();
    let mut columns = vec![Vec::new(); stations.len()];
    let mut start = None;
    for record in rdr.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let slot: i64 = parse_field(&record, 0, "slot")?;
        let first = *start.get_or_insert(slot);
        if slot != first + columns[0].len() as i64 {
            return Err(Error::Ordering {
                station: "*".into(),
                line,
                message: format!("slot {slot} is not consecutive"),
            });
        }
        for (n, col) in columns.iter_mut().enumerate() {
            col.push(parse_field(&record, n + 1, &stations[n])?);
        }
    }
    let Some(start) = start else {
        return Err(Error::Schema("panel file has no rows".into()));
    };
    FlowPanel::new(stations, slot_seconds, start, columns)
}

/// Averages every `x` consecutive readings into one slot of width
/// `x * slot_seconds`. A trailing partial window is dropped.
pub fn smooth(series: &SlotSeries, x: usize) -> Result<SlotSeries> {
    let values = smooth_values(series.values(), x)?;
    if values.is_empty() {
        return Err(Error::Length {
            context: format!("smoothing station {} with x={x}", series.station_id),
            needed: x,
            got: series.len(),
        });
    }
    SlotSeries::new(
        series.station_id.clone(),
        series.kind,
        series.slot_seconds * x as f64,
        series.start_slot.div_euclid(x as i64),
        values,
    )
}

/// [`smooth`] applied to every column of a panel.
pub fn smooth_panel(panel: &FlowPanel, x: usize) -> Result<FlowPanel> {
    let columns = panel
        .columns()
        .iter()
        .map(|c| smooth_values(c, x))
        .collect::<Result<Vec<_>>>()?;
    if columns[0].is_empty() {
        return Err(Error::Length {
            context: format!("smoothing panel with x={x}"),
            needed: x,
            got: panel.len(),
        });
    }
    FlowPanel::new(
        panel.stations().to_vec(),
        panel.slot_seconds() * x as f64,
        panel.start_slot().div_euclid(x as i64),
        columns,
    )
}

fn smooth_values(values: &[f64], x: usize) -> Result<Vec<f64>> {
    if x == 0 {
        return Err(Error::Parameter("smoothing window x must be at least 1".into()));
    }
    if x == 1 {
        return Ok(values.to_vec());
    }
    Ok(values
        .chunks_exact(x)
        .map(|w| w.iter().sum::<f64>() / x as f64)
        .collect())
}

/// Applies `d`-fold first differencing.
///
/// Returns the differenced values and the retained initial values: element
/// `i` is the first value of the `i`-times differenced series, which is what
/// [`undifference`] needs to integrate back.
pub fn difference(values: &[f64], d: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if values.len() < d + 1 {
        return Err(Error::Length {
            context: format!("differencing of order {d}"),
            needed: d + 1,
            got: values.len(),
        });
    }
    let mut current = values.to_vec();
    let mut initials = Vec::with_capacity(d);
    for _ in 0..d {
        initials.push(current[0]);
        current = current.windows(2).map(|w| w[1] - w[0]).collect();
    }
    Ok((current, initials))
}

/// Left inverse of [`difference`].
pub fn undifference(diffs: &[f64], initials: &[f64], d: usize) -> Result<Vec<f64>> {
    if initials.len() != d {
        return Err(Error::Shape(format!(
            "undifferencing of order {d} needs {d} initial values, got {}",
            initials.len()
        )));
    }
    let mut current = diffs.to_vec();
    for &start in initials.iter().rev() {
        let mut level = Vec::with_capacity(current.len() + 1);
        let mut acc = start;
        level.push(acc);
        for v in &current {
            acc += v;
            level.push(acc);
        }
        current = level;
    }
    Ok(current)
}
