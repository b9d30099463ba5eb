//! One-dimensional ISODATA clustering of slot speeds.
//!
//! Each iteration runs, in order: nearest-center assignment, discarding of
//! clusters smaller than `n_min`, center update, splitting of high-variance
//! clusters, and merging of the closest center pair. The loop stops when the
//! membership is unchanged over an iteration or after `max_iter` iterations.
//! A final assignment and discard pass runs after the loop, so the returned
//! set always satisfies the size and center-mean invariants.

use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsodataParams {
    /// Upper bound on the number of clusters.
    pub k_max: usize,
    /// Minimum cluster size; smaller clusters are dissolved.
    pub n_min: usize,
    /// Variance above which a cluster is split.
    pub sigma2_max: f64,
    /// Centers closer than this are merged.
    pub d_min: f64,
    pub max_iter: usize,
    /// Number of starting centers, placed at evenly spaced quantiles.
    pub k_init: usize,
    /// Only used to replace coinciding initial centers.
    pub seed: u64,
}

impl Default for IsodataParams {
    fn default() -> Self {
        Self {
            k_max: 3,
            n_min: 5,
            sigma2_max: 15.0,
            d_min: 30.0,
            max_iter: 10,
            k_init: 2,
            seed: 0,
        }
    }
}

impl IsodataParams {
    pub fn validate(&self) -> Result<()> {
        if self.k_max == 0 || self.n_min == 0 || self.max_iter == 0 {
            return Err(Error::Parameter(
                "k_max, n_min and max_iter must be positive".into(),
            ));
        }
        if self.k_init == 0 || self.k_init > self.k_max {
            return Err(Error::Parameter(format!(
                "k_init must lie in 1..={}, got {}",
                self.k_max, self.k_init
            )));
        }
        if !(self.sigma2_max > 0.0 && self.d_min > 0.0) {
            return Err(Error::Parameter(
                "sigma2_max and d_min must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedCluster {
    /// Mean speed of the members, feet per second.
    pub center: f64,
    /// Sorted slot indices.
    pub members: Vec<usize>,
}

/// Disjoint speed clusters covering every input slot, fastest first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedClusterSet {
    pub clusters: Vec<SpeedCluster>,
}

impl SpeedClusterSet {
    /// Builds a set from per-slot labels, with centers as member means.
    /// Labels must be dense in `0..k`.
    pub fn from_labels(labels: &[usize], speeds: &[f64]) -> Result<Self> {
        if labels.len() != speeds.len() {
            return Err(Error::Shape(format!(
                "{} labels for {} speeds",
                labels.len(),
                speeds.len()
            )));
        }
        let k = labels.iter().max().map_or(0, |m| m + 1);
        let mut members = vec![Vec::new(); k];
        for (t, &l) in labels.iter().enumerate() {
            members[l].push(t);
        }
        if members.iter().any(Vec::is_empty) {
            return Err(Error::Input("cluster labels are not dense".into()));
        }
        Ok(Self {
            clusters: members
                .into_iter()
                .map(|m| SpeedCluster {
                    center: mean_of(&m, speeds),
                    members: m,
                })
                .collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    pub fn centers(&self) -> Vec<f64> {
        self.clusters.iter().map(|c| c.center).collect()
    }

    pub fn n_points(&self) -> usize {
        self.clusters.iter().map(|c| c.members.len()).sum()
    }

    /// Cluster index of every slot.
    pub fn labels(&self) -> Vec<usize> {
        let mut labels = vec![usize::MAX; self.n_points()];
        for (i, c) in self.clusters.iter().enumerate() {
            for &m in &c.members {
                if let Some(slot) = labels.get_mut(m) {
                    *slot = i;
                }
            }
        }
        labels
    }
}

fn mean_of(members: &[usize], values: &[f64]) -> f64 {
    members.iter().map(|&i| values[i]).sum::<f64>() / members.len() as f64
}

fn variance_of(members: &[usize], values: &[f64], mean: f64) -> f64 {
    members
        .iter()
        .map(|&i| (values[i] - mean) * (values[i] - mean))
        .sum::<f64>()
        / members.len() as f64
}

fn nearest(value: f64, centers: &[f64]) -> usize {
    let mut best = 0;
    for (i, c) in centers.iter().enumerate().skip(1) {
        if (value - c).abs() < (value - centers[best]).abs() {
            best = i;
        }
    }
    best
}

/// Index of the center closest to `value`; ties go to the lower index.
pub fn assign_nearest(value: f64, clusters: &SpeedClusterSet) -> Result<usize> {
    if clusters.is_empty() {
        return Err(Error::Input("no clusters to assign to".into()));
    }
    Ok(nearest(value, &clusters.centers()))
}

struct State {
    centers: Vec<f64>,
    members: Vec<Vec<usize>>,
}

impl State {
    fn assign(&mut self, speeds: &[f64]) {
        let mut members = vec![Vec::new(); self.centers.len()];
        for (t, &v) in speeds.iter().enumerate() {
            members[nearest(v, &self.centers)].push(t);
        }
        self.members = members;
    }

    /// Drops clusters below `n_min` and moves their points to the nearest
    /// surviving center. Keeps the largest cluster if none qualifies.
    fn discard_small(&mut self, speeds: &[f64], n_min: usize) {
        let mut keep: Vec<bool> = self.members.iter().map(|m| m.len() >= n_min).collect();
        if !keep.iter().any(|&k| k) {
            let largest = (0..self.members.len())
                .rev()
                .max_by_key(|&i| self.members[i].len())
                .unwrap_or(0);
            keep[largest] = true;
        }
        if keep.iter().all(|&k| k) {
            return;
        }
        let mut orphans = Vec::new();
        let mut centers = Vec::new();
        let mut members = Vec::new();
        for (i, m) in self.members.drain(..).enumerate() {
            if keep[i] {
                centers.push(self.centers[i]);
                members.push(m);
            } else {
                orphans.extend(m);
            }
        }
        for t in orphans {
            members[nearest(speeds[t], &centers)].push(t);
        }
        for m in &mut members {
            m.sort_unstable();
        }
        self.centers = centers;
        self.members = members;
    }

    fn update_centers(&mut self, speeds: &[f64]) {
        for (c, m) in self.centers.iter_mut().zip(&self.members) {
            *c = mean_of(m, speeds);
        }
    }

    fn split(&mut self, speeds: &[f64], params: &IsodataParams) {
        let mut centers = Vec::with_capacity(params.k_max);
        let mut members = Vec::with_capacity(params.k_max);
        let mut k = self.centers.len();
        for (c, m) in self.centers.drain(..).zip(self.members.drain(..)) {
            let var = variance_of(&m, speeds, c);
            if k < params.k_max && m.len() >= 2 && var > params.sigma2_max {
                let sd = var.sqrt();
                let children = [c - sd, c + sd];
                let (low, high): (Vec<usize>, Vec<usize>) =
                    m.iter().partition(|&&t| nearest(speeds[t], &children) == 0);
                if !low.is_empty() && !high.is_empty() {
                    centers.push(children[0]);
                    members.push(low);
                    centers.push(children[1]);
                    members.push(high);
                    k += 1;
                    continue;
                }
                centers.push(c);
                members.push(low.into_iter().chain(high).collect());
                continue;
            }
            centers.push(c);
            members.push(m);
        }
        self.centers = centers;
        self.members = members;
    }

    fn merge_closest(&mut self, speeds: &[f64], d_min: f64) {
        let k = self.centers.len();
        if k < 2 {
            return;
        }
        let mut best: Option<(usize, usize, f64)> = None;
        for i in 0..k {
            for j in i + 1..k {
                let d = (self.centers[i] - self.centers[j]).abs();
                if best.map_or(true, |(_, _, b)| d < b) {
                    best = Some((i, j, d));
                }
            }
        }
        if let Some((i, j, d)) = best {
            if d < d_min {
                let absorbed = self.members.remove(j);
                self.centers.remove(j);
                self.members[i].extend(absorbed);
                self.members[i].sort_unstable();
                self.centers[i] = mean_of(&self.members[i], speeds);
            }
        }
    }

    fn signature(&self) -> Vec<Vec<usize>> {
        let mut sig: Vec<Vec<usize>> = self
            .members
            .iter()
            .map(|m| {
                let mut m = m.clone();
                m.sort_unstable();
                m
            })
            .collect();
        sig.sort();
        sig
    }
}

fn initial_centers(speeds: &[f64], params: &IsodataParams) -> Vec<f64> {
    let mut sorted = speeds.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let k = params.k_init;
    let mut centers: Vec<f64> = Vec::with_capacity(k);
    for i in 0..k {
        let idx = (((i as f64 + 0.5) / k as f64) * n as f64) as usize;
        centers.push(sorted[idx.min(n - 1)]);
    }
    // Coinciding quantiles: replace duplicates with distinct data values when
    // the data has any, otherwise drop them.
    let mut distinct: Vec<f64> = sorted.clone();
    distinct.dedup();
    let mut unique: Vec<f64> = Vec::with_capacity(k);
    let mut duplicates = 0;
    for c in centers {
        if unique.contains(&c) {
            duplicates += 1;
        } else {
            unique.push(c);
        }
    }
    if duplicates > 0 {
        let mut pool: Vec<f64> = distinct.into_iter().filter(|v| !unique.contains(v)).collect();
        pool.shuffle(&mut ChaCha8Rng::seed_from_u64(params.seed));
        unique.extend(pool.into_iter().take(duplicates));
    }
    unique.sort_by(f64::total_cmp);
    unique
}

/// Clusters `speeds` (indexed by slot) with ISODATA.
pub fn isodata_1d(speeds: &[f64], params: &IsodataParams) -> Result<SpeedClusterSet> {
    params.validate()?;
    if speeds.len() < params.n_min {
        return Err(Error::Input(format!(
            "{} points is fewer than n_min = {}",
            speeds.len(),
            params.n_min
        )));
    }
    if let Some(i) = speeds.iter().position(|v| !v.is_finite()) {
        return Err(Error::Input(format!("non-finite speed at slot {i}")));
    }

    let mut state = State {
        centers: initial_centers(speeds, params),
        members: Vec::new(),
    };
    let mut previous: Option<Vec<Vec<usize>>> = None;
    for _ in 0..params.max_iter {
        state.assign(speeds);
        state.discard_small(speeds, params.n_min);
        state.update_centers(speeds);
        state.split(speeds, params);
        state.merge_closest(speeds, params.d_min);
        let sig = state.signature();
        if previous.as_ref() == Some(&sig) {
            break;
        }
        previous = Some(sig);
    }

    state.assign(speeds);
    state.discard_small(speeds, params.n_min);
    state.update_centers(speeds);

    let mut clusters: Vec<SpeedCluster> = state
        .centers
        .into_iter()
        .zip(state.members)
        .map(|(center, mut members)| {
            members.sort_unstable();
            SpeedCluster { center, members }
        })
        .collect();
    clusters.sort_by(|a, b| b.center.total_cmp(&a.center));
    Ok(SpeedClusterSet { clusters })
}

/// Writes `slot,speed,cluster_id,center` rows, slots counted from 0.
pub fn write_clusters_csv(
    clusters: &SpeedClusterSet,
    speeds: &[f64],
    mut out: impl Write,
) -> Result<()> {
    if clusters.n_points() != speeds.len() {
        return Err(Error::Shape(format!(
            "clusters cover {} slots but {} speeds were given",
            clusters.n_points(),
            speeds.len()
        )));
    }
    let io = |e| Error::io("<cluster output>", e);
    let centers = clusters.centers();
    writeln!(out, "slot,speed,cluster_id,center").map_err(io)?;
    for (t, (l, v)) in clusters.labels().iter().zip(speeds).enumerate() {
        writeln!(out, "{t},{v},{l},{}", centers[*l]).map_err(io)?;
    }
    Ok(())
}

/// Reads the labels and speeds written by [`write_clusters_csv`].
pub fn read_clusters_csv(input: impl Read) -> Result<(Vec<usize>, Vec<f64>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut labels = Vec::new();
    let mut speeds = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let line = row as u64 + 2;
        let err = |what: &str| Error::Parse {
            line,
            message: format!("cannot parse {what}"),
        };
        let record = record.map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        let slot: usize = record.get(0).and_then(|v| v.parse().ok()).ok_or_else(|| err("slot"))?;
        if slot != row {
            return Err(Error::Ordering {
                station: "*".into(),
                line,
                message: format!("expected slot {row}, got {slot}"),
            });
        }
        speeds.push(record.get(1).and_then(|v| v.parse().ok()).ok_or_else(|| err("speed"))?);
        labels.push(
            record
                .get(2)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| err("cluster_id"))?,
        );
    }
    Ok((labels, speeds))
}
