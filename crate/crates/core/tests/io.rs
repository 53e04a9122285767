use std::fs;
use std::sync::Arc;

use proptest::prelude::*;
use u2flow::flow::{self, InitialData};
use u2flow::grid::{Grading, RadialGrid};
use u2flow::io::{self, IoError};

fn tanh_state(grading: Grading) -> u2flow::state::MetricState {
    let grid = Arc::new(RadialGrid::build(20.0, 256, grading).unwrap());
    flow::make_initial_data(&InitialData::TanhCap, 2, grid).unwrap().with_time(0.125)
}

#[test]
fn snapshot_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    for grading in [Grading::Uniform, Grading::Geometric { ratio: 1.05 }] {
        let path = dir.path().join("snap.csv");
        let st = tanh_state(grading);
        io::write_snapshot(&path, &st).unwrap();
        let back = io::read_snapshot(&path).unwrap();
        assert_eq!(back, st);
    }
}

#[test]
fn missing_sidecar_key_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("snap.csv");
    io::write_snapshot(&path, &tanh_state(Grading::Uniform)).unwrap();
    let side = io::sidecar_path(&path);
    let text = fs::read_to_string(&side).unwrap();
    let trimmed: String = text.lines().filter(|l| !l.starts_with("inner")).map(|l| format!("{l}\n")).collect();
    fs::write(&side, trimmed).unwrap();
    match io::read_snapshot(&path) {
        Err(IoError::MissingKey { key, .. }) => assert_eq!(key, "inner"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn malformed_values_report_their_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("snap.csv");
    io::write_snapshot(&path, &tanh_state(Grading::Uniform)).unwrap();
    let side = io::sidecar_path(&path);
    let text = fs::read_to_string(&side).unwrap().replace("k = 2", "k = two");
    fs::write(&side, text).unwrap();
    assert!(matches!(io::read_snapshot(&path), Err(IoError::Parse { line: 1, .. })));
}

#[test]
fn missing_file_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(io::read_snapshot(&dir.path().join("none.csv")), Err(IoError::File { .. })));
}

proptest! {
    #[test]
    fn fixed_format_round_trips(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
        prop_assert_eq!(io::fmt17(x).parse::<f64>().unwrap(), x);
    }
}
