#![allow(dead_code)]

pub mod oracle;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use starima_core::data::{FlowPanel, StationNetwork};

pub fn noise(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// Chain process on the differenced scale:
/// z_n(t) = sum_j own[j] z_n(t-1-j) + spatial z_{n-1}(t - lag(t)) + e_n(t) - theta e_n(t-1)
pub struct Truth<'a> {
    pub n_stations: usize,
    pub len: usize,
    pub own: &'a [f64],
    pub spatial: f64,
    pub theta: f64,
    pub seed: u64,
}

pub fn simulate(truth: &Truth, lag: impl Fn(usize) -> usize) -> Vec<Vec<f64>> {
    let burn = 300;
    let total = truth.len + burn;
    let e: Vec<Vec<f64>> = (0..truth.n_stations)
        .map(|n| noise(total, truth.seed * 97 + n as u64))
        .collect();
    let mut z = vec![vec![0.0; total]; truth.n_stations];
    for t in 0..total {
        let clock = t.saturating_sub(burn);
        for n in 0..truth.n_stations {
            let mut v = e[n][t];
            if t >= 1 {
                v -= truth.theta * e[n][t - 1];
            }
            for (j, c) in truth.own.iter().enumerate() {
                if t > j {
                    v += c * z[n][t - 1 - j];
                }
            }
            let l = lag(clock);
            if n > 0 && t >= l {
                v += truth.spatial * z[n - 1][t - l];
            }
            z[n][t] = v;
        }
    }
    z.into_iter().map(|c| c[burn..].to_vec()).collect()
}

pub fn integrate(z: &[Vec<f64>], start: f64) -> Vec<Vec<f64>> {
    z.iter()
        .map(|c| {
            let mut acc = start;
            std::iter::once(start)
                .chain(c.iter().map(|v| {
                    acc += v;
                    acc
                }))
                .collect()
        })
        .collect()
}

pub fn panel(columns: Vec<Vec<f64>>, slot_seconds: f64) -> FlowPanel {
    let network = StationNetwork::uniform(columns.len(), 60.0).unwrap();
    FlowPanel::new(network.stations().to_vec(), slot_seconds, 0, columns).unwrap()
}
