//! Exhaustive comparison with a set-based transcription of the reassignment
//! procedure on short label sequences.

mod common;

use common::oracle::check_all;
use starima_core::partition::classify_labels;

#[test]
fn two_clusters_up_to_twelve_slots() {
    assert!(check_all(2, 12, 4) > 20_000);
}

#[test]
fn three_clusters_up_to_eight_slots() {
    assert!(check_all(3, 8, 4) > 20_000);
}

#[test]
fn short_interruption_is_absorbed() {
    let mut labels = vec![0; 10];
    labels.extend([1, 1]);
    labels.extend([0; 12]);
    let speeds: Vec<f64> = labels.iter().map(|&l| if l == 0 { 60.0 } else { 30.0 }).collect();
    let p = classify_labels(&labels, &speeds, 4, 30.0).unwrap();
    assert_eq!(p.len(), 1);
    assert_eq!(p.periods[0].len(), 24);
}
