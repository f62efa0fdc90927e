use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

const THIRD: &str = "0.3333333333333333";

fn kovtop(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kovtop")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn csv(o: &Output) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = stdout(o);
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(str::to_string).collect();
    let rows = lines.map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    (header, rows)
}

fn tmp(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("kovtop-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn equilibrium_simulation_is_constant() {
    let o = kovtop(&["simulate", "--m", THIRD, "--l", THIRD, "--t-end", "5", "--dt", "0.5"]);
    assert_eq!(code(&o), 0);
    let (header, rows) = csv(&o);
    assert_eq!(header.len(), 18);
    assert_eq!(header[0], "t");
    assert_eq!(header[17], "resF2");
    assert_eq!(rows.len(), 11);
    for r in &rows {
        for (x, x0) in r[1..].iter().zip(&rows[0][1..]) {
            assert_eq!(x, x0);
        }
    }
    assert_eq!(rows[0][10], -3.0);
}

#[test]
fn level_start_drift_is_small() {
    let out = tmp("sim.csv");
    let o = kovtop(&["simulate", "--m", "1", "--l", "3.5", "--t-end", "20", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let m: Value = serde_json::from_str(&std::fs::read_to_string(out.with_extension("csv.manifest.json")).unwrap()).unwrap();
    let d = &m["summary"]["drift"];
    for k in ["h", "k", "g", "f", "m"] {
        assert!(d[k].as_f64().unwrap() < 1e-6, "{k}: {d}");
    }
    assert!(m["summary"]["max_casimir_drift"].as_f64().unwrap() <= 1e-9);
}

#[test]
fn raw_fields_are_normalized() {
    let o = kovtop(&["simulate", "--omega", "0.1,-0.2,0.3", "--alpha", "2,0.5,0", "--beta", "0.3,1,0.2", "--t-end", "1"]);
    assert_eq!(code(&o), 0);
    let (_, rows) = csv(&o);
    let r = &rows[0];
    let dot = r[4] * r[7] + r[5] * r[8] + r[6] * r[9];
    assert!(dot.abs() < 1e-12);
}

#[test]
fn usage_errors_exit_2() {
    for args in [
        &["simulate", "--bogus"][..],
        &["simulate", "--t-end", "abc", "--m", "1", "--l", "3.5"],
        &["simulate"],
        &["simulate", "--m", "1", "--l", "3.5", "--omega", "0,0,0"],
        &["crosscheck", "--m", "1"],
        &["bifurcation", "--resolution", "0"],
        &["frobnicate"],
    ] {
        let o = kovtop(args);
        assert_eq!(code(&o), 2, "{args:?}");
        assert!(String::from_utf8_lossy(&o.stderr).to_lowercase().contains("usage") || !o.stderr.is_empty());
    }
}

#[test]
fn invalid_params_exit_1() {
    let o = kovtop(&["params", "--a", "1", "--b", "2"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn check_passes_and_mutation_fails() {
    let o = kovtop(&["check", "--n-samples", "30"]);
    assert_eq!(code(&o), 0);
    let rep: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(rep["passed"], true);
    assert_eq!(rep["suites"].as_array().unwrap().len(), 7);

    let o = kovtop(&["check", "--n-samples", "30", "--inject-f2", "overall"]);
    assert_eq!(code(&o), 1);
    let rep: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let ratio = rep["suites"].as_array().unwrap().iter().find(|s| s["name"] == "bracket_ratio").unwrap();
    assert_eq!(ratio["passed"], false);
}

#[test]
fn empty_check_warns() {
    let o = kovtop(&["check", "--n-samples", "0"]);
    assert_eq!(code(&o), 0);
    let rep: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(!rep["warnings"].as_array().unwrap().is_empty());
}

#[test]
fn crosscheck_agrees_on_admissible_level() {
    let out = tmp("cc.csv");
    let o = kovtop(&["crosscheck", "--m", "1", "--l", "3.5", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("t,s1_full,s1_sep,s2_full,s2_sep,abs_delta\n"));
    let worst = text.lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse::<f64>().unwrap()).fold(0.0, f64::max);
    assert!(worst < 1e-6, "{worst}");
}

#[test]
fn crosscheck_rejects_empty_s1() {
    let o = kovtop(&["crosscheck", "--m", "1", "--l", "2.5"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("s1 interval empty"));
}

#[test]
fn crosscheck_equilibrium_is_constant() {
    let o = kovtop(&["crosscheck", "--m", THIRD, "--l", THIRD, "--dt", "0.5"]);
    assert_eq!(code(&o), 0);
    let (_, rows) = csv(&o);
    assert!(rows.len() > 2);
    for r in &rows {
        assert_eq!(&r[1..], &[2.0, 2.0, -1.0, -1.0, 0.0]);
    }
}

#[test]
fn bifurcation_grid_matches_hand_cases() {
    // step 1/12 in m and 1/6 in l hits (1, 3.5), (1, 2.5) and (1/3, 1/3)
    let o = kovtop(&["bifurcation", "--m-min", "0", "--m-max", "2", "--l-min", "0", "--l-max", "4", "--resolution", "25"]);
    assert_eq!(code(&o), 0);
    let (header, rows) = csv(&o);
    assert_eq!(&header[..7], &["m", "l", "n_s1", "n_s2", "admissible", "on_set", "lines_active"]);
    let find = |m: f64, l: f64| rows.iter().find(|r| (r[0] - m).abs() < 1e-12 && (r[1] - l).abs() < 1e-12).unwrap().clone();
    assert_eq!(&find(1.0, 3.5)[2..6], &[1.0, 1.0, 1.0, 0.0]);
    assert_eq!(&find(1.0, 2.5)[2..5], &[0.0, 1.0, 0.0]);
    let eq = find(1.0 / 3.0, 1.0 / 3.0);
    assert_eq!(eq[5], 1.0);
    assert_eq!(eq[6], 2.0);
    assert_eq!(&eq[8..], &[1.0, 1.0]);
}

#[test]
fn bifurcation_empty_range_is_header_only() {
    let o = kovtop(&["bifurcation", "--m-min", "1", "--m-max", "0"]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o).lines().count(), 1);
}

#[test]
fn periods_agree() {
    for which in ["s1", "s2"] {
        let o = kovtop(&["period", "--m", "1", "--l", "3.5", "--which", which]);
        assert_eq!(code(&o), 0);
        let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
        assert!(v["rel_diff"].as_f64().unwrap() < 1e-8);
        assert!(v["period_closed_form"].as_f64().unwrap() > 0.0);
    }
}

#[test]
fn degenerate_period_exits_1() {
    let o = kovtop(&["period", "--m", THIRD, "--l", THIRD, "--which", "s1"]);
    assert_eq!(code(&o), 1);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["degenerate"], true);
}

#[test]
fn params_reports_lines_and_level() {
    let o = kovtop(&["params", "--m", "1", "--l", "3.5"]);
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["p2"], 5.0);
    assert_eq!(v["r2"], 3.0);
    assert_eq!(v["lines"].as_array().unwrap().len(), 8);
    assert_eq!(v["level"]["H"], (3.5f64 * 3.5 - 1.0 - 10.0) / 2.0);
    assert_eq!(v["level"]["s1_intervals"][0]["hi"], 2.25);
}

#[test]
fn outputs_are_deterministic() {
    for args in [
        &["check", "--seed", "7", "--n-samples", "20"][..],
        &["simulate", "--m", "1", "--l", "3.5", "--t-end", "3"],
        &["bifurcation", "--resolution", "9", "--format", "json"],
    ] {
        let a = kovtop(args);
        let b = kovtop(args);
        assert_eq!(code(&a), 0);
        assert_eq!(a.stdout, b.stdout, "{args:?}");
    }
}

#[test]
fn manifest_written_on_failure() {
    let out = tmp("fail.csv");
    let o = kovtop(&["crosscheck", "--m", "1", "--l", "2.5", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    let m: Value = serde_json::from_str(&std::fs::read_to_string(out.with_extension("csv.manifest.json")).unwrap()).unwrap();
    assert_eq!(m["exit_code"], 1);
    assert_eq!(m["command"], "crosscheck");
    assert!(m["error"].as_str().unwrap().contains("s1 interval empty"));
    assert!(m["library_version"].is_string());
    assert_eq!(m["args"]["crosscheck"]["level"]["l"], 2.5);
}
