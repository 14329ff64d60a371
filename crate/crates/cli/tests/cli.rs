use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const STAR3: &str = r#"{"vertices":[{"id":"c"},{"id":"a"},{"id":"b"},{"id":"d"}],
"edges":[{"id":"e1","endpoints":["c","a"],"length":1},{"id":"e2","endpoints":["c","b"],"length":1},{"id":"e3","endpoints":["c","d"],"length":1}]}"#;

fn qg(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qg")).current_dir(dir).args(args).output().expect("qg runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

/// CSV body without the `#` header lines.
fn body(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap().lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect()
}

fn rows(path: &Path) -> Vec<Vec<String>> {
    body(path).lines().skip(1).map(|l| l.split(',').map(str::to_string).collect()).collect()
}

#[test]
fn star_spectrum_has_double_eigenvalue() {
    let t = TempDir::new().unwrap();
    std::fs::write(t.path().join("star3.json"), STAR3).unwrap();
    let o = qg(t.path(), &["spectrum", "--graph", "star3.json", "--k", "5", "--mesh-h", "0.005", "--method", "fem", "--out", "out"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = rows(&t.path().join("out/spectrum.csv"));
    let ev: Vec<f64> = r.iter().map(|row| row[2].parse().unwrap()).collect();
    let target = std::f64::consts::PI.powi(2) / 4.0;
    assert!((ev[1] - target).abs() < 1e-8 * target);
    assert!((ev[2] - target).abs() < 1e-8 * target);
    let text = std::fs::read_to_string(t.path().join("out/spectrum.csv")).unwrap();
    assert!(text.contains("# anchor: spectrum"));
    assert!(text.contains("# mesh_h=0.005"));
    assert!(t.path().join("out/spectrum_plot_fem-extrapolated.csv").exists());
}

#[test]
fn both_methods_agree() {
    let t = TempDir::new().unwrap();
    std::fs::write(t.path().join("star3.json"), STAR3).unwrap();
    let o = qg(t.path(), &["spectrum", "--graph", "star3.json", "--method", "both", "--out", "out"]);
    assert_eq!(code(&o), 0);
    for row in rows(&t.path().join("out/spectrum_compare.csv")) {
        assert!(row[3].parse::<f64>().unwrap() < 1e-6);
    }
}

#[test]
fn loop_bounds_flag_equality() {
    let t = TempDir::new().unwrap();
    let o = qg(t.path(), &["bounds", "--family", r#"{"family":"loop","length":1}"#, "--check", "all", "--out", "out"]);
    assert_eq!(code(&o), 0);
    let r = rows(&t.path().join("out/bounds.csv"));
    let c = r.iter().find(|row| row[0] == "length-doubly-connected").unwrap();
    assert_eq!(c[8], "equality");
    assert!(r.iter().all(|row| row[8] != "violated"));
}

#[test]
fn underresolved_mesh_reports_violation() {
    // a very coarse mesh overestimates the higher interval modes past the
    // sharp upper bound, which must surface as exit code 3
    let t = TempDir::new().unwrap();
    let o = qg(t.path(), &["bounds", "--family", r#"{"family":"interval","length":1}"#, "--mesh-h", "0.25", "--check", "betti-diameter", "--out", "out"]);
    assert_eq!(code(&o), 3);
    assert!(rows(&t.path().join("out/bounds.csv")).iter().any(|row| row[8] == "violated"));
}

#[test]
fn comb_probe_stays_below_bound() {
    let t = TempDir::new().unwrap();
    let o = qg(t.path(), &["comb-probe", "--alpha", "0.5", "--n", "1000,10000", "--out", "out"]);
    assert_eq!(code(&o), 0);
    let r = rows(&t.path().join("out/comb_probe.csv"));
    assert_eq!(r.len(), 2);
    for row in r {
        let rq: f64 = row[8].parse().unwrap();
        let rel: f64 = row[10].parse().unwrap();
        assert!(rq <= 154.51 && rel < 1e-8);
    }
    let plot = body(&t.path().join("out/comb_probe_plot_alpha0.5.csv"));
    assert!(plot.starts_with("x,y\n"));
}

#[test]
fn comb_probe_rejects_alpha_outside_range() {
    let t = TempDir::new().unwrap();
    let o = qg(t.path(), &["comb-probe", "--alpha", "0.75", "--n", "100", "--out", "out"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn identical_runs_give_identical_bodies() {
    let t = TempDir::new().unwrap();
    let args = |out: &'static str| vec!["oracle-compare", "--seed", "4", "--out", out];
    assert_eq!(code(&qg(t.path(), &args("a"))), 0);
    assert_eq!(code(&qg(t.path(), &args("b"))), 0);
    assert_eq!(body(&t.path().join("a/oracle_compare.csv")), body(&t.path().join("b/oracle_compare.csv")));
}

#[test]
fn refuses_to_overwrite() {
    let t = TempDir::new().unwrap();
    std::fs::write(t.path().join("star3.json"), STAR3).unwrap();
    let args = ["geometry", "--graph", "star3.json", "--out", "out"];
    assert_eq!(code(&qg(t.path(), &args)), 0);
    assert_eq!(code(&qg(t.path(), &args)), 1);
    let mut forced = args.to_vec();
    forced.push("--force");
    assert_eq!(code(&qg(t.path(), &forced)), 0);
}

#[test]
fn input_errors_exit_one() {
    let t = TempDir::new().unwrap();
    std::fs::write(t.path().join("bad.json"), r#"{"vertices":[{"id":"a"}],"edges":[{"id":"e","endpoints":["a","z"],"length":1}]}"#).unwrap();
    assert_eq!(code(&qg(t.path(), &["spectrum", "--graph", "bad.json"])), 1);
    assert_eq!(code(&qg(t.path(), &["spectrum", "--graph", "missing.json"])), 1);
    assert_eq!(code(&qg(t.path(), &["spectrum"])), 1);
    assert_eq!(code(&qg(t.path(), &["frobnicate"])), 1);
    assert_eq!(code(&qg(t.path(), &["bounds", "--family", r#"{"family":"loop"}"#, "--check", "nonsense"])), 1);
}

#[test]
fn thread_cap_is_validated() {
    let t = TempDir::new().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_qg"))
        .current_dir(t.path())
        .env("QG_THREADS", "0")
        .args(["comb-probe", "--n", "10"])
        .output()
        .unwrap();
    assert_eq!(code(&o), 1);
    let o = Command::new(env!("CARGO_BIN_EXE_qg"))
        .current_dir(t.path())
        .env("QG_THREADS", "1")
        .args(["comb-probe", "--n", "10", "--out", "one"])
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
}

#[test]
fn json_output_names_anchor() {
    let t = TempDir::new().unwrap();
    let o = qg(t.path(), &["geometry", "--family", r#"{"family":"star","arms":3,"arm_length":1,"dirichlet":"leaves"}"#, "--format", "json", "--out", "out"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(t.path().join("out/geometry.json")).unwrap()).unwrap();
    assert_eq!(v["anchor"], "geometry");
    assert_eq!(v["config"]["command"], "geometry");
    assert_eq!(v["data"]["hypotheses"]["centred"], true);
    assert!((v["data"]["geometry"]["inradius"].as_f64().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn exhaust_writes_table_and_plots() {
    let t = TempDir::new().unwrap();
    let o = qg(
        t.path(),
        &["exhaust", "--family", r#"{"family":"diagonal_comb","alpha":1.5,"teeth":10}"#, "--sizes", "5,10", "--k", "1", "--mesh-h", "0.01", "--out", "out"],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = rows(&t.path().join("out/exhaust.csv"));
    assert_eq!(r.len(), 2);
    let (a, b): (f64, f64) = (r[0][2].parse().unwrap(), r[1][2].parse().unwrap());
    assert!(b <= a * (1.0 + 1e-8));
    assert!(t.path().join("out/exhaust_plot_k1.csv").exists());
    assert_eq!(code(&qg(t.path(), &["exhaust", "--family", r#"{"family":"loop"}"#, "--out", "x"])), 1);
}

#[test]
fn equality_suite_passes() {
    let t = TempDir::new().unwrap();
    let o = qg(t.path(), &["equality-suite", "--out", "out"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = rows(&t.path().join("out/equality_suite.csv"));
    assert!(r.iter().all(|row| row.last().unwrap() == "true"));
}
