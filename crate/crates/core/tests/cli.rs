//! End-to-end checks of the `mpdetect` binary.

use std::path::Path;
use std::process::Command;

use mpdetect::io::{read_events, read_stream};
use mpdetect::Decision;

fn run(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_mpdetect")).args(args).output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

const SCENARIO: &str = r#"{"duration_s": 4.0, "mode": "STL",
    "receiver": {"d": 0.5, "T": 0.001, "f_s": 2046000.0, "c_over_n0_dbhz": 45.0},
    "segments": [{"start_s": 0.0, "alpha": 0.0},
                 {"start_s": 2.0, "alpha": 0.5, "delta_M_chips": 0.3, "theta_M_deg": 60.0}],
    "seed": 5}"#;

#[test]
fn simulate_then_detect_flips_after_onset() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n).display().to_string();
    std::fs::write(p("s.json"), SCENARIO).unwrap();
    let (code, _, err) = run(&["simulate", "--scenario", &p("s.json"), "--out", &p("stream.csv")]);
    assert_eq!(code, 0, "{err}");
    let stream = read_stream(&std::fs::read(p("stream.csv")).unwrap(), Path::new("stream.csv")).unwrap();
    assert_eq!(stream.len(), 4000);

    let (code, _, err) = run(&["detect", "--in", &p("stream.csv"), "--pfa", "1e-4", "--out", &p("events.csv")]);
    assert_eq!(code, 0, "{err}");
    let events = read_events(&std::fs::read(p("events.csv")).unwrap(), Path::new("events.csv")).unwrap();
    assert!(!events.is_empty());
    for e in &events {
        if e.window_end_epoch <= 2000 {
            assert_eq!(e.decision, Decision::H0, "false alarm at {}", e.window_end_epoch);
        } else if e.window_end_epoch >= 2000 + 1024 {
            assert_eq!(e.decision, Decision::H1, "missed at {}", e.window_end_epoch);
        }
    }
}

#[test]
fn csv_outputs_start_with_manifest() {
    let (code, out, _) = run(&["theory", "--detector", "d1", "--snr-db", "10"]);
    assert_eq!(code, 0);
    let first = out.lines().next().unwrap();
    assert!(first.starts_with('#'));
    for key in ["theory", "config_sha256"] {
        assert!(first.contains(key), "{first}");
    }
    assert!(!out.contains('\r'));
}

#[test]
fn theory_default_grid_has_fifty_rows() {
    let (code, out, err) = run(&["theory", "--detector", "d2", "--snr-db", "10", "--N", "1024"]);
    assert_eq!(code, 0, "{err}");
    let data: Vec<&str> = out.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
    assert_eq!(data.len(), 50);
}

#[test]
fn theory_rejects_vtl() {
    let (code, _, err) = run(&["theory", "--detector", "vtl"]);
    assert_eq!(code, 1);
    assert!(!err.is_empty());
}

#[test]
fn short_stream_warns_and_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n).display().to_string();
    let short = SCENARIO
        .replace("\"duration_s\": 4.0", "\"duration_s\": 0.1")
        .replace("\"start_s\": 2.0", "\"start_s\": 0.05");
    std::fs::write(p("s.json"), short).unwrap();
    assert_eq!(run(&["simulate", "--scenario", &p("s.json"), "--out", &p("stream.csv")]).0, 0);
    let (code, out, err) = run(&["detect", "--in", &p("stream.csv"), "--N", "1024"]);
    assert_eq!(code, 0);
    assert!(!err.trim().is_empty());
    let events = read_events(out.as_bytes(), Path::new("stdout")).unwrap();
    assert!(events.is_empty());
}

#[test]
fn help_lists_flags_and_defaults() {
    let (code, out, _) = run(&["detect", "--help"]);
    assert_eq!(code, 0);
    for flag in ["--in", "--detector", "--N", "--pfa", "--threshold", "[default: 1024]", "[default: 0.01]"] {
        assert!(out.contains(flag), "missing {flag}");
    }
}

#[test]
fn exit_codes_map_error_classes() {
    assert_eq!(run(&["detect", "--bogus"]).0, 1);
    assert_eq!(run(&["theory", "--N", "1000"]).0, 1);
    assert_eq!(run(&["theory", "--pfa-grid", "list:0.5,0"]).0, 1);
    let (code, _, err) = run(&["detect", "--in", "/nonexistent/stream.csv"]);
    assert_eq!(code, 2);
    assert!(err.contains("/nonexistent/stream.csv"));
}

#[test]
fn invalid_scenario_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, SCENARIO.replace("\"start_s\": 2.0", "\"start_s\": -1.0")).unwrap();
    let (code, _, err) = run(&["simulate", "--scenario", path.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(err.contains("segments[1].start_s"), "{err}");
}

#[test]
fn envelope_svg_has_three_series() {
    let dir = tempfile::tempdir().unwrap();
    let svg = dir.path().join("env.svg");
    let (code, out, err) = run(&["envelope", "--mode", "stl", "--points", "51", "--svg", svg.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(out.lines().filter(|l| !l.starts_with('#')).count(), 52);
    let text = std::fs::read_to_string(svg).unwrap();
    assert_eq!(text.matches("<polyline").count(), 3);
}

#[test]
fn calibrate_prints_a_threshold() {
    let (code, out, err) = run(&["calibrate", "--detector", "d1", "--N", "64", "--pfa", "0.1", "--trials", "2000"]);
    assert_eq!(code, 0, "{err}");
    let eta: f64 = out.trim().parse().unwrap();
    assert!(eta > 0.0 && eta < 0.2, "{eta}");
}
