use std::io::Write;

use starima_core::data::{
    load_corridor, load_csv, parse_observations, read_network, write_network, write_observations,
    Corridor, FlowPanel, StationNetwork,
};
use starima_core::synth::{generate, SynthConfig};
use starima_core::Error;

fn write_files(corridor: &Corridor, dir: &std::path::Path) -> (std::path::PathBuf, std::path::PathBuf) {
    let data = dir.join("data.csv");
    let net = dir.join("network.csv");
    write_observations(corridor, std::fs::File::create(&data).unwrap()).unwrap();
    write_network(&corridor.network, std::fs::File::create(&net).unwrap()).unwrap();
    (data, net)
}

fn four_station_day() -> Corridor {
    let cfg = SynthConfig {
        n_stations: 4,
        ..SynthConfig::two_regime_pair(2880, 3)
    };
    let s = generate(&cfg).unwrap();
    Corridor::from_panels(s.network, &s.flows, &s.speeds).unwrap()
}

#[test]
fn four_station_day_loads() {
    let corridor = four_station_day();
    let dir = tempfile::tempdir().unwrap();
    let (data, net) = write_files(&corridor, dir.path());
    let back = load_corridor(&data, &net, 30.0).unwrap();
    let flows = back.flow_panel().unwrap();
    assert_eq!(flows.n_stations(), 4);
    assert_eq!(flows.len(), 2880);
    assert_eq!(flows.stations(), ["s1", "s2", "s3", "s4"]);
    assert_eq!(back, corridor);
}

#[test]
fn write_then_load_is_idempotent() {
    let corridor = four_station_day();
    let dir = tempfile::tempdir().unwrap();
    let (data, net) = write_files(&corridor, dir.path());
    let first = std::fs::read(&data).unwrap();
    let back = load_csv(&data, read_network(&net).unwrap(), 30.0).unwrap();
    let again = dir.path().join("again.csv");
    write_observations(&back, std::fs::File::create(&again).unwrap()).unwrap();
    assert_eq!(first, std::fs::read(&again).unwrap());
}

fn net2() -> StationNetwork {
    StationNetwork::uniform(2, 100.0).unwrap()
}

#[test]
fn malformed_files_are_reported_with_context() {
    let bad_value = "slot,station,flow,speed\n0,s1,1,50\n0,s2,x,50\n";
    match parse_observations(bad_value.as_bytes(), net2(), 30.0).unwrap_err() {
        Error::Parse { line, .. } => assert_eq!(line, 3),
        e => panic!("{e:?}"),
    }
    let gap = "slot,station,flow,speed\n0,s1,1,50\n0,s2,1,50\n2,s1,1,50\n";
    assert!(matches!(
        parse_observations(gap.as_bytes(), net2(), 30.0).unwrap_err(),
        Error::Ordering { .. }
    ));
    let header = "slot,station,flows,speed\n0,s1,1,50\n";
    assert!(matches!(
        parse_observations(header.as_bytes(), net2(), 30.0).unwrap_err(),
        Error::Schema(_)
    ));
    assert!(matches!(
        parse_observations("".as_bytes(), net2(), 30.0).unwrap_err(),
        Error::Schema(_)
    ));
    let uneven = "slot,station,flow,speed\n0,s1,1,50\n0,s2,1,50\n1,s1,1,50\n";
    assert!(matches!(
        parse_observations(uneven.as_bytes(), net2(), 30.0).unwrap_err(),
        Error::Schema(_)
    ));
}

#[test]
fn extra_stations_are_ignored() {
    let text = "slot,station,flow,speed\n0,s1,1,50\n0,s9,7,50\n0,s2,2,40\n1,s1,3,50\n1,s2,4,40\n1,s9,7,50\n";
    let c = parse_observations(text.as_bytes(), net2(), 30.0).unwrap();
    let flows: FlowPanel = c.flow_panel().unwrap();
    assert_eq!(flows.column(0), &[1.0, 3.0]);
    assert_eq!(flows.column(1), &[2.0, 4.0]);
}

#[test]
fn missing_file_names_the_path() {
    let err = load_csv("/nonexistent/data.csv", net2(), 30.0).unwrap_err();
    assert!(err.to_string().contains("/nonexistent/data.csv"), "{err}");
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("net.csv");
    let mut f = std::fs::File::create(&p).unwrap();
    writeln!(f, "station,position_feet\ns1,0\ns2,0").unwrap();
    assert!(read_network(&p).is_err());
}

#[test]
fn stage_artifacts_round_trip() {
    use starima_core::clustering::{isodata_1d, read_clusters_csv, write_clusters_csv, IsodataParams};
    use starima_core::data::{read_panel_csv, write_panel_csv};
    use starima_core::lags::{read_lags_csv, write_lags_csv, RegimeLags};
    use starima_core::partition::classify_labels;

    let syn = generate(&SynthConfig::two_regime_pair(400, 3)).unwrap();
    let mut buf = Vec::new();
    write_panel_csv(&syn.flows, &mut buf).unwrap();
    let back = read_panel_csv(buf.as_slice(), syn.flows.slot_seconds()).unwrap();
    assert_eq!(back, syn.flows);

    let speeds: Vec<f64> = syn.speeds.row_means();
    let clusters = isodata_1d(&speeds, &IsodataParams { d_min: 10.0, ..Default::default() }).unwrap();
    let mut buf = Vec::new();
    write_clusters_csv(&clusters, &speeds, &mut buf).unwrap();
    let (labels, read_speeds) = read_clusters_csv(buf.as_slice()).unwrap();
    assert_eq!(labels, clusters.labels());
    assert_eq!(read_speeds, speeds);

    let partition = classify_labels(&labels, &speeds, 8, 30.0).unwrap();
    let lags = RegimeLags::speed_varying(&syn.network, &partition, 1, 30.0).unwrap();
    let mut buf = Vec::new();
    write_lags_csv(&lags, &syn.network, &mut buf).unwrap();
    let back = read_lags_csv(buf.as_slice(), &syn.network).unwrap();
    assert_eq!(back.n_ranges(), lags.n_ranges());
    for (a, b) in back.per_range.iter().flatten().zip(lags.per_range.iter().flatten()) {
        assert_eq!(a.entries, b.entries);
        assert_eq!(a.source, b.source);
    }

    let bad = "range,order,from,to,lag_slots,lag_source\n0,1,s2,s1,3,speed\n";
    assert!(read_lags_csv(bad.as_bytes(), &syn.network).is_err());
    let gap = "slot,s1,s2\n0,1,2\n2,1,2\n";
    assert!(matches!(read_panel_csv(gap.as_bytes(), 30.0), Err(Error::Ordering { .. })));
}
