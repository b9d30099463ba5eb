//! Turns speed clusters into contiguous speed regimes over the day.
//!
//! Slots are grouped into maximal runs of one cluster. Runs shorter than the
//! minimum length `delta` are dissolved and each of their slots goes to the
//! surviving range whose mean speed is closest to the slot's speed. Candidate
//! ranges are those of the same cluster; when the cluster has no other range,
//! all surviving ranges are candidates. Clusters are processed in index order,
//! runs within a cluster in time order, and distance ties go to the range that
//! grew from the earlier run.
//!
//! Reassigned slots take the cluster of the range they joined and runs are
//! regrouped. If regrouping leaves a run shorter than `delta`, the shortest such
//! run is folded into the adjacent run with the closer mean speed until none
//! remain.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::clustering::{isodata_1d, IsodataParams, SpeedClusterSet};
use crate::data::FlowPanel;
use crate::error::{Error, Result};

/// A maximal block of consecutive slots in one speed cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeRange {
    pub cluster_id: usize,
    /// First slot, inclusive.
    pub start: usize,
    /// Last slot, inclusive.
    pub end: usize,
    /// Mean speed over the range, feet per second.
    pub mean_speed: f64,
}

impl TimeRange {
    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, slot: usize) -> bool {
        (self.start..=self.end).contains(&slot)
    }
}

/// Ranges tiling one day in time order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayPartition {
    /// Width of one partition slot in seconds.
    pub slot_seconds: f64,
    pub periods: Vec<TimeRange>,
}

impl DayPartition {
    /// Validates that `periods` tile `0..n` in order with maximal ranges.
    pub fn new(slot_seconds: f64, periods: Vec<TimeRange>) -> Result<Self> {
        if !(slot_seconds.is_finite() && slot_seconds > 0.0) {
            return Err(Error::Parameter(format!(
                "slot_seconds must be positive, got {slot_seconds}"
            )));
        }
        if periods.is_empty() {
            return Err(Error::Input("partition has no ranges".into()));
        }
        let mut next = 0;
        for (i, p) in periods.iter().enumerate() {
            if p.start != next || p.end < p.start {
                return Err(Error::Input(format!(
                    "range {i} spans {}..={} but should start at {next}",
                    p.start, p.end
                )));
            }
            if i > 0 && periods[i - 1].cluster_id == p.cluster_id {
                return Err(Error::Input(format!(
                    "ranges {} and {i} are adjacent with the same cluster",
                    i - 1
                )));
            }
            next = p.end + 1;
        }
        Ok(Self {
            slot_seconds,
            periods,
        })
    }

    /// The whole day as one regime.
    pub fn single(n_slots: usize, slot_seconds: f64, mean_speed: f64) -> Result<Self> {
        if n_slots == 0 {
            return Err(Error::Input("partition needs at least one slot".into()));
        }
        Self::new(
            slot_seconds,
            vec![TimeRange {
                cluster_id: 0,
                start: 0,
                end: n_slots - 1,
                mean_speed,
            }],
        )
    }

    pub fn n_slots(&self) -> usize {
        self.periods.last().map_or(0, |p| p.end + 1)
    }

    pub fn len(&self) -> usize {
        self.periods.len()
    }

    pub fn is_empty(&self) -> bool {
        self.periods.is_empty()
    }

    /// Index into `periods` of the range holding `slot`.
    pub fn range_index(&self, slot: usize) -> Result<usize> {
        if slot >= self.n_slots() {
            return Err(Error::Lookup(format!(
                "slot {slot} outside partitioned day of {} slots",
                self.n_slots()
            )));
        }
        Ok(self.periods.partition_point(|p| p.end < slot))
    }

    /// Range index for a row of a series with a different slot width, where
    /// row 0 is the start of the day.
    pub fn range_index_for_row(&self, row: usize, row_seconds: f64) -> Result<usize> {
        let slot = ((row as f64 * row_seconds) / self.slot_seconds + 1e-9).floor() as usize;
        self.range_index(slot)
    }

    /// Ranges keyed by cluster id, each list in time order.
    pub fn by_cluster(&self) -> BTreeMap<usize, Vec<&TimeRange>> {
        let mut out: BTreeMap<usize, Vec<&TimeRange>> = BTreeMap::new();
        for p in &self.periods {
            out.entry(p.cluster_id).or_default().push(p);
        }
        out
    }

    /// Cluster id of every slot.
    pub fn labels(&self) -> Vec<usize> {
        self.periods
            .iter()
            .flat_map(|p| std::iter::repeat_n(p.cluster_id, p.len()))
            .collect()
    }
}

/// The range holding `slot`.
pub fn locate(partition: &DayPartition, slot: usize) -> Result<&TimeRange> {
    Ok(&partition.periods[partition.range_index(slot)?])
}

/// Absolute difference between the speed at `slot` and the range's mean speed
/// computed from `speeds`.
pub fn range_distance(slot: usize, range: &TimeRange, speeds: &[f64]) -> f64 {
    let mean = speeds[range.start..=range.end].iter().sum::<f64>() / range.len() as f64;
    (speeds[slot] - mean).abs()
}

struct Run {
    cluster: usize,
    start: usize,
    len: usize,
}

fn runs(labels: &[usize]) -> Vec<Run> {
    let mut out: Vec<Run> = Vec::new();
    for (t, &l) in labels.iter().enumerate() {
        match out.last_mut() {
            Some(r) if r.cluster == l => r.len += 1,
            _ => out.push(Run {
                cluster: l,
                start: t,
                len: 1,
            }),
        }
    }
    out
}

fn mean_over(slots: &[usize], speeds: &[f64]) -> f64 {
    slots.iter().map(|&t| speeds[t]).sum::<f64>() / slots.len() as f64
}

/// One pass of minimum-length enforcement with distance-based reassignment.
fn reassign_short_runs(labels: &[usize], speeds: &[f64], n_clusters: usize, delta: usize) -> Vec<usize> {
    let runs = runs(labels);
    let mut members: Vec<Vec<usize>> = runs
        .iter()
        .map(|r| (r.start..r.start + r.len).collect())
        .collect();
    let mut alive = vec![true; runs.len()];

    for cluster in 0..n_clusters {
        for r in (0..runs.len()).filter(|&r| runs[r].cluster == cluster) {
            if members[r].len() >= delta {
                continue;
            }
            let mut candidates: Vec<usize> = (0..runs.len())
                .filter(|&c| c != r && alive[c] && runs[c].cluster == cluster)
                .collect();
            if candidates.is_empty() {
                candidates = (0..runs.len()).filter(|&c| c != r && alive[c]).collect();
            }
            if candidates.is_empty() {
                continue;
            }
            let means: Vec<f64> = candidates
                .iter()
                .map(|&c| mean_over(&members[c], speeds))
                .collect();
            for t in std::mem::take(&mut members[r]) {
                let mut best = 0;
                for i in 1..candidates.len() {
                    if (speeds[t] - means[i]).abs() < (speeds[t] - means[best]).abs() {
                        best = i;
                    }
                }
                members[candidates[best]].push(t);
            }
            alive[r] = false;
        }
    }

    let mut out = labels.to_vec();
    for (r, slots) in members.iter().enumerate() {
        for &t in slots {
            out[t] = runs[r].cluster;
        }
    }
    out
}

/// Folds the shortest run below `delta` into its closer-speed neighbour until
/// every run reaches `delta` or one run is left.
fn fold_short_runs(labels: &mut [usize], speeds: &[f64], delta: usize) {
    loop {
        let runs = runs(labels);
        if runs.len() <= 1 {
            return;
        }
        let Some(short) = (0..runs.len())
            .filter(|&r| runs[r].len < delta)
            .min_by_key(|&r| (runs[r].len, r))
        else {
            return;
        };
        let span = |r: &Run| -> Vec<usize> { (r.start..r.start + r.len).collect() };
        let own = mean_over(&span(&runs[short]), speeds);
        let target = match (short.checked_sub(1), runs.get(short + 1)) {
            (Some(p), Some(next)) => {
                let dp = (own - mean_over(&span(&runs[p]), speeds)).abs();
                let dn = (own - mean_over(&span(next), speeds)).abs();
                if dn < dp {
                    short + 1
                } else {
                    p
                }
            }
            (Some(p), None) => p,
            (None, _) => short + 1,
        };
        let cluster = runs[target].cluster;
        let r = &runs[short];
        labels[r.start..r.start + r.len].fill(cluster);
    }
}

fn build_ranges(labels: &[usize], speeds: &[f64]) -> Vec<TimeRange> {
    runs(labels)
        .into_iter()
        .map(|r| TimeRange {
            cluster_id: r.cluster,
            start: r.start,
            end: r.start + r.len - 1,
            mean_speed: speeds[r.start..r.start + r.len].iter().sum::<f64>() / r.len as f64,
        })
        .collect()
}

/// Splits the day into contiguous speed regimes of at least `delta` slots.
pub fn classify_periods(
    clusters: &SpeedClusterSet,
    speeds: &[f64],
    delta: usize,
    slot_seconds: f64,
) -> Result<DayPartition> {
    if clusters.n_points() != speeds.len() {
        return Err(Error::Shape(format!(
            "clusters cover {} slots but {} speeds were given",
            clusters.n_points(),
            speeds.len()
        )));
    }
    let labels = clusters.labels();
    if labels.contains(&usize::MAX) {
        return Err(Error::Input("clusters do not cover every slot".into()));
    }
    classify_labels(&labels, speeds, delta, slot_seconds)
}

/// [`classify_periods`] on raw per-slot cluster labels.
pub fn classify_labels(
    labels: &[usize],
    speeds: &[f64],
    delta: usize,
    slot_seconds: f64,
) -> Result<DayPartition> {
    if labels.len() != speeds.len() {
        return Err(Error::Shape(format!(
            "{} labels for {} speeds",
            labels.len(),
            speeds.len()
        )));
    }
    if delta == 0 {
        return Err(Error::Parameter("delta must be at least 1".into()));
    }
    if delta > labels.len() {
        return Err(Error::Parameter(format!(
            "delta {delta} exceeds the day length of {} slots",
            labels.len()
        )));
    }
    let n_clusters = labels.iter().max().map_or(0, |m| m + 1);
    let mut labels = reassign_short_runs(labels, speeds, n_clusters, delta);
    fold_short_runs(&mut labels, speeds, delta);
    DayPartition::new(slot_seconds, build_ranges(&labels, speeds))
}

/// Writes `slot,cluster_id,range_index,mean_speed` rows.
pub fn write_partition_csv(partition: &DayPartition, mut out: impl Write) -> Result<()> {
    let io = |e| Error::io("<partition output>", e);
    writeln!(out, "slot,cluster_id,range_index,mean_speed").map_err(io)?;
    for (i, p) in partition.periods.iter().enumerate() {
        for slot in p.start..=p.end {
            writeln!(out, "{slot},{},{i},{}", p.cluster_id, p.mean_speed).map_err(io)?;
        }
    }
    Ok(())
}

/// Reads what [`write_partition_csv`] writes.
pub fn read_partition_csv(input: impl Read, slot_seconds: f64) -> Result<DayPartition> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut periods: Vec<TimeRange> = Vec::new();
    let mut current_index = None;
    for (row, record) in rdr.records().enumerate() {
        let line = row as u64 + 2;
        let record = record.map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        let field = |i: usize| -> Result<&str> {
            record.get(i).ok_or_else(|| Error::Parse {
                line,
                message: format!("missing column {i}"),
            })
        };
        let parse_err = |what: &str| Error::Parse {
            line,
            message: format!("cannot parse {what}"),
        };
        let slot: usize = field(0)?.parse().map_err(|_| parse_err("slot"))?;
        let cluster_id: usize = field(1)?.parse().map_err(|_| parse_err("cluster_id"))?;
        let range_index: usize = field(2)?.parse().map_err(|_| parse_err("range_index"))?;
        let mean_speed: f64 = field(3)?.parse().map_err(|_| parse_err("mean_speed"))?;
        if current_index == Some(range_index) {
            let last = periods.last_mut().expect("range started");
            if slot != last.end + 1 {
                return Err(Error::Parse {
                    line,
                    message: format!("slot {slot} breaks range {range_index}"),
                });
            }
            last.end = slot;
        } else {
            periods.push(TimeRange {
                cluster_id,
                start: slot,
                end: slot,
                mean_speed,
            });
            current_index = Some(range_index);
        }
    }
    DayPartition::new(slot_seconds, periods)
}

/// How per-station speeds become one speed per slot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpeedPooling {
    /// Average across stations.
    Mean,
    /// Speeds of one station.
    Station(String),
}

impl std::str::FromStr for SpeedPooling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(SpeedPooling::Mean),
            other => match other.strip_prefix("station:") {
                Some(id) if !id.is_empty() => Ok(SpeedPooling::Station(id.to_string())),
                _ => Err(Error::Parameter(format!(
                    "unknown speed pooling `{other}`, expected `mean` or `station:<id>`"
                ))),
            },
        }
    }
}

pub fn pool_speeds(speeds: &FlowPanel, pooling: &SpeedPooling) -> Result<Vec<f64>> {
    match pooling {
        SpeedPooling::Mean => Ok(speeds.row_means()),
        SpeedPooling::Station(id) => speeds
            .station_index(id)
            .map(|n| speeds.column(n).to_vec())
            .ok_or_else(|| Error::Lookup(format!("no speeds for station {id}"))),
    }
}

/// Clusters the pooled speeds and partitions the day. The panel must start at
/// slot 0 so that partition slots and rows coincide.
pub fn partition_day(
    speeds: &FlowPanel,
    pooling: &SpeedPooling,
    params: &IsodataParams,
    delta: usize,
) -> Result<(SpeedClusterSet, DayPartition)> {
    if speeds.start_slot() != 0 {
        return Err(Error::Range(format!(
            "speeds start at slot {} but a day starts at slot 0",
            speeds.start_slot()
        )));
    }
    let pooled = pool_speeds(speeds, pooling)?;
    let clusters = isodata_1d(&pooled, params)?;
    let partition = classify_periods(&clusters, &pooled, delta, speeds.slot_seconds())?;
    Ok((clusters, partition))
}
