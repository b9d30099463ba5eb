//! Set-based transcription of the short-range reassignment procedure, used
//! as an exhaustive oracle on short label sequences.

use std::collections::BTreeSet;

use starima_core::partition::classify_labels;

type Range = BTreeSet<usize>;

fn mean(set: &Range, v: &[f64]) -> f64 {
    set.iter().map(|&t| v[t]).sum::<f64>() / set.len() as f64
}

fn maximal_ranges(labels: &[usize], cluster: usize) -> Vec<Range> {
    let mut out: Vec<Range> = Vec::new();
    let mut current = Range::new();
    for (t, &l) in labels.iter().enumerate() {
        if l == cluster {
            current.insert(t);
        } else if !current.is_empty() {
            out.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        out.push(current);
    }
    out
}

pub fn oracle(labels: &[usize], v: &[f64], delta: usize) -> Vec<usize> {
    let k = labels.iter().max().unwrap() + 1;
    // L[i]: the ranges of cluster i, in time order.
    let mut l: Vec<Vec<Range>> = (0..k).map(|i| maximal_ranges(labels, i)).collect();
    for i in 0..k {
        for j in 0..l[i].len() {
            if l[i][j].is_empty() || l[i][j].len() >= delta {
                continue;
            }
            let mut targets: Vec<(usize, usize)> = (0..l[i].len())
                .filter(|&c| c != j && !l[i][c].is_empty())
                .map(|c| (i, c))
                .collect();
            if targets.is_empty() {
                for (a, ranges) in l.iter().enumerate() {
                    for (c, r) in ranges.iter().enumerate() {
                        if (a, c) != (i, j) && !r.is_empty() {
                            targets.push((a, c));
                        }
                    }
                }
                // Candidates in time order of their first slot.
                targets.sort_by_key(|&(a, c)| *l[a][c].iter().next().unwrap());
            }
            if targets.is_empty() {
                continue;
            }
            let means: Vec<f64> = targets.iter().map(|&(a, c)| mean(&l[a][c], v)).collect();
            let moved = std::mem::take(&mut l[i][j]);
            for t in moved {
                let mut best = 0;
                for c in 1..targets.len() {
                    if (v[t] - means[c]).abs() < (v[t] - means[best]).abs() {
                        best = c;
                    }
                }
                let (a, c) = targets[best];
                l[a][c].insert(t);
            }
        }
    }
    let mut out = vec![usize::MAX; labels.len()];
    for (i, ranges) in l.iter().enumerate() {
        for r in ranges {
            for &t in r {
                out[t] = i;
            }
        }
    }
    fold(&mut out, v, delta);
    out
}

fn runs(labels: &[usize]) -> Vec<(usize, usize)> {
    let mut out: Vec<(usize, usize)> = Vec::new();
    for t in 0..labels.len() {
        if t == 0 || labels[t] != labels[t - 1] {
            out.push((t, t + 1));
        } else {
            out.last_mut().unwrap().1 = t + 1;
        }
    }
    out
}

fn fold(labels: &mut [usize], v: &[f64], delta: usize) {
    loop {
        let r = runs(labels);
        if r.len() <= 1 {
            return;
        }
        let mut short: Option<usize> = None;
        for (i, &(s, e)) in r.iter().enumerate() {
            if e - s < delta && short.map_or(true, |b| e - s < r[b].1 - r[b].0) {
                short = Some(i);
            }
        }
        let Some(i) = short else { return };
        let m = |(s, e): (usize, usize)| v[s..e].iter().sum::<f64>() / (e - s) as f64;
        let own = m(r[i]);
        let into = if i == 0 {
            1
        } else if i + 1 == r.len() {
            i - 1
        } else if (own - m(r[i + 1])).abs() < (own - m(r[i - 1])).abs() {
            i + 1
        } else {
            i - 1
        };
        let c = labels[r[into].0];
        labels[r[i].0..r[i].1].fill(c);
    }
}

pub fn check_all(n_clusters: usize, max_len: usize, max_delta: usize) -> usize {
    let mut checked = 0;
    for len in 1..=max_len {
        let total = n_clusters.pow(len as u32);
        for code in 0..total {
            let mut c = code;
            let labels: Vec<usize> = (0..len)
                .map(|_| {
                    let l = c % n_clusters;
                    c /= n_clusters;
                    l
                })
                .collect();
            let speeds: Vec<f64> = labels
                .iter()
                .enumerate()
                .map(|(t, &l)| 20.0 * l as f64 + ((t as f64 + 1.0) * 0.754_877_666_2).fract() * 9.0)
                .collect();
            for delta in 1..=max_delta.min(len) {
                let got = classify_labels(&labels, &speeds, delta, 30.0).unwrap();
                let want = oracle(&labels, &speeds, delta);
                assert_eq!(got.labels(), want, "labels {labels:?} delta {delta}");
                checked += 1;
            }
        }
    }
    checked
}
