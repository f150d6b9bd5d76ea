//! Trajectory files and manifests: round trips, normalization applied once,
//! axis flips, split selection and error reporting.

use std::path::Path;

use priorgp::dataset::{load, read_csv, read_csv_from, write_csv, write_csv_to, LoadEcho};
use priorgp::{Error, Trajectory};
use proptest::prelude::*;
use tempfile::TempDir;

fn write(dir: &Path, name: &str, text: &str) {
    std::fs::write(dir.join(name), text).unwrap();
}

/// Hudak-style crack data: 21 trajectories, crack length in inches sampled
/// every 10,000 cycles up to 90,000.
fn hudak_like_csv() -> String {
    let mut s = String::from("trajectory_id,x,y\n");
    for j in 1..=21 {
        let rate = 1.0 + 0.02 * j as f64;
        for i in 0..10 {
            let n = 10_000.0 * i as f64;
            let a = 0.9 * (1.0 + (rate * n / 90_000.0).powi(2) * 0.8);
            s.push_str(&format!("{j},{n},{a}\n"));
        }
    }
    s
}

#[test]
fn hudak_manifest_normalizes_by_initial_crack() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "hudak.csv", &hudak_like_csv());
    write(
        dir.path(),
        "hudak.json",
        r#"{
            "name": "hudak",
            "x_axis": {"role": "load cycles", "unit": "cycles"},
            "y_axis": {"role": "crack length", "unit": "a/a0"},
            "normalization": {"y_divisor": 0.9},
            "files": ["hudak.csv"]
        }"#,
    );
    let ds = load(&dir.path().join("hudak.json")).unwrap();
    assert_eq!(ds.trajectories.len(), 21);
    for t in &ds.trajectories {
        assert_eq!(t.ys[0], 1.0);
        assert!(t.xs.iter().all(|&x| x <= 90_000.0));
        assert_eq!(t.len(), 10);
    }
    assert_eq!(ds.echo.y_divisor, 0.9);
    assert_eq!(ds.echo.sample_count, 210);
    assert!(ds.split().is_none());
}

#[test]
fn flipped_manifest_swaps_axes_after_normalization() {
    let dir = TempDir::new().unwrap();
    // file columns: x = cycles, y = crack length in mm
    write(
        dir.path(),
        "v.csv",
        "trajectory_id,x,y\n1,0,9.0\n1,50000,20.0\n1,120000,49.8\n2,0,9.0\n2,60000,25.0\n2,110000,49.8\n",
    );
    write(
        dir.path(),
        "v.json",
        r#"{
            "name": "virkler",
            "x_axis": {"role": "crack length", "unit": "mm"},
            "y_axis": {"role": "cycles", "unit": "cycles"},
            "flip_axes": true,
            "paris": {"width": 152.4, "stress_range": 48.26, "initial_crack": 9.0,
                      "material_c": 8.7096e-11, "alphas": [2.9]},
            "files": ["v.csv"],
            "split": {"inference": ["1-1"]}
        }"#,
    );
    let ds = load(&dir.path().join("v.json")).unwrap();
    let t = &ds.trajectories[0];
    assert_eq!(t.xs, vec![9.0, 20.0, 49.8]);
    assert_eq!(t.ys, vec![0.0, 50000.0, 120000.0]);
    assert!(ds.echo.flipped);
    let (inf, eval) = ds.split().unwrap();
    assert_eq!(inf.len(), 1);
    assert_eq!(eval.len(), 1);
    assert_eq!(eval[0].id, "2");
}

#[test]
fn loading_twice_gives_identical_values() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "h.csv", &hudak_like_csv());
    write(
        dir.path(),
        "h.json",
        r#"{"name": "h", "normalization": {"x_divisor": 1000, "y_divisor": 0.9}, "files": ["h.csv"]}"#,
    );
    let a = load(&dir.path().join("h.json")).unwrap();
    let b = load(&dir.path().join("h.json")).unwrap();
    assert_eq!(a.trajectories, b.trajectories);
    assert_eq!(a.echo, b.echo);
    // normalization is not compounded by reloading the echo's manifest
    let echo: LoadEcho = serde_json::from_str(&serde_json::to_string(&a.echo).unwrap()).unwrap();
    assert_eq!(echo.manifest.normalization.x_divisor, 1000.0);
    let raw = read_csv(&dir.path().join("h.csv")).unwrap();
    assert_eq!(a.trajectories[3].xs[2], raw[3].xs[2] / 1000.0);
}

#[test]
fn empty_file_is_a_schema_error() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "e.csv", "");
    write(dir.path(), "e.json", r#"{"name": "e", "files": ["e.csv"]}"#);
    assert!(matches!(load(&dir.path().join("e.json")), Err(Error::Schema { .. })));
}

#[test]
fn parse_errors_report_the_row() {
    let text = "trajectory_id,x,y\n1,0,1\n1,1,2\n1,2,oops\n";
    match read_csv_from(text.as_bytes(), "f.csv") {
        Err(Error::Parse { row, message, .. }) => {
            assert_eq!(row, 4);
            assert!(message.contains("oops"));
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn duplicate_ids_across_files_are_rejected() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "a.csv", "trajectory_id,x,y\n1,0,1\n");
    write(dir.path(), "b.csv", "trajectory_id,x,y\n1,0,1\n");
    write(dir.path(), "m.json", r#"{"name": "m", "files": ["a.csv", "b.csv"]}"#);
    assert!(matches!(load(&dir.path().join("m.json")), Err(Error::Schema { .. })));
}

#[test]
fn missing_file_is_an_io_error() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "m.json", r#"{"name": "m", "files": ["nope.csv"]}"#);
    assert!(matches!(load(&dir.path().join("m.json")), Err(Error::Io(_))));
}

#[test]
fn file_round_trip_is_byte_identical() {
    let dir = TempDir::new().unwrap();
    let text = "trajectory_id,x,y\na,0,1.5\na,0.1,2.25\nb,3,1e-7\nb,4,123456.789\n";
    write(dir.path(), "in.csv", text);
    let t = read_csv(&dir.path().join("in.csv")).unwrap();
    write_csv(&dir.path().join("out.csv"), &t).unwrap();
    let back = read_csv(&dir.path().join("out.csv")).unwrap();
    assert_eq!(back, t);
    let again = std::fs::read_to_string(dir.path().join("out.csv")).unwrap();
    let mut buf = Vec::new();
    write_csv_to(&mut buf, &back).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap(), again);
}

fn trajectories() -> impl Strategy<Value = Vec<Trajectory>> {
    prop::collection::vec(
        prop::collection::vec((1e-6f64..10.0, -1e6f64..1e6), 1..12),
        1..6,
    )
    .prop_map(|groups| {
        groups
            .into_iter()
            .enumerate()
            .map(|(j, pts)| {
                let mut x = 0.0;
                let (xs, ys) = pts
                    .into_iter()
                    .map(|(dx, y)| {
                        x += dx;
                        (x, y)
                    })
                    .unzip();
                Trajectory::new(format!("t{j}"), xs, ys).unwrap()
            })
            .collect()
    })
}

proptest! {
    #[test]
    fn write_then_read_is_exact(ts in trajectories()) {
        let mut buf = Vec::new();
        write_csv_to(&mut buf, &ts).unwrap();
        let back = read_csv_from(buf.as_slice(), "mem.csv").unwrap();
        prop_assert_eq!(back, ts);
    }
}
