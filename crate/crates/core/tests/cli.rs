use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shallow-approx")).args(args).output().unwrap()
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["exponents", "--d", "2"]).status.code(), Some(0));
    assert_eq!(run(&["exponents", "--d", "zero"]).status.code(), Some(2));
    let out = run(&["packing", "--kind", "relu", "--d", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
}

#[test]
fn rates_json_schema() {
    let out = run(&["rates", "--kind", "greedy-fourier", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    for key in ["kind", "config", "samples", "fit", "predicted", "verdict"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert_eq!(v["predicted"], -2.5);
    assert!(v["fit"]["slope"].as_f64().unwrap() <= -2.35);
    assert!(v.get("seconds").is_none_or(|s| s.is_null()));
}

#[test]
fn rejects_short_grids() {
    let out = run(&["rates", "--kind", "sphere-cover", "--n-grid", "4,8,16"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn csv_floats_round_trip() {
    let out = run(&["greedy-fourier", "--n-grid", "2,4,8", "--xi-max", "64"]);
    let text = String::from_utf8(out.stdout).unwrap();
    for line in text.lines().skip(1) {
        for field in line.split(',').skip(1) {
            let x: f64 = field.parse().unwrap();
            assert_eq!(format!("{x:.16e}"), field);
        }
    }
}
