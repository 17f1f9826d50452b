use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_breaklab"))
        .args(args)
        .output()
        .unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn noiseless(dir: &Path) -> std::path::PathBuf {
    let d = dir.join("d.csv");
    let out = run(&[
        "simulate",
        "--family",
        "location",
        "--T",
        "4",
        "--s",
        "0.5",
        "--mu-pre",
        "0",
        "--mu-post",
        "2",
        "--sigma-eps",
        "0",
        "--out",
        s(&d),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    d
}

#[test]
fn simulate_noiseless_location() {
    let dir = tempfile::tempdir().unwrap();
    let d = noiseless(dir.path());
    assert_eq!(
        fs::read_to_string(&d).unwrap(),
        "t,y,x1\n1,0,1\n2,0,1\n3,2,1\n4,2,1\n"
    );
    let prov: Value = serde_json::from_str(
        &fs::read_to_string(dir.path().join("d.csv.provenance.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(prov["schema_version"], 1);
    assert_eq!(prov["break_index"], 2);
    assert_eq!(prov["provenance"]["config"]["sigma_eps_sq"], 0.0);
    assert_eq!(prov["provenance"]["config"]["beta_post"][0], 2.0);
}

#[test]
fn critvals_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    for p in [&a, &b] {
        let out = run(&[
            "critvals",
            "--kind",
            "supabsbb",
            "--reps",
            "1000",
            "--seed",
            "7",
            "--out",
            s(p),
        ]);
        assert!(out.status.success(), "{}", stderr(&out));
    }
    let ta = fs::read(&a).unwrap();
    assert_eq!(ta, fs::read(&b).unwrap());
    let t: Value = serde_json::from_slice(&ta).unwrap();
    assert_eq!(t["kind"], "supabsbb");
    assert_eq!(t["meta"]["seed"], 7);
    assert!(t["levels"]["0.95"].as_f64().unwrap() > 1.2);
    let hex = run(&[
        "critvals", "--kind", "supabsbb", "--reps", "1000", "--seed", "0x7",
    ]);
    assert_eq!(hex.stdout, ta);
}

#[test]
fn missing_input_is_a_data_error_naming_the_file() {
    let out = run(&["test", "--stat", "wald", "--input", "missing.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("missing.csv"));
    assert!(out.stdout.is_empty());
}

#[test]
fn usage_errors_exit_1_and_help_exits_0() {
    assert_eq!(
        run(&["test", "--stat", "wald", "--bogus"]).status.code(),
        Some(1)
    );
    assert_eq!(
        run(&["test", "--stat", "nope", "--input", "x.csv"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(run(&["simulate", "--T", "10"]).status.code(), Some(1));
    let help = run(&["simulate", "--help"]);
    assert_eq!(help.status.code(), Some(0));
    let text = stderr(&help);
    for flag in [
        "--family",
        "--T",
        "--mu-pre",
        "--sigma-eps",
        "--seed",
        "--stream",
        "12648430",
    ] {
        assert!(text.contains(flag), "help lacks {flag}");
    }
}

#[test]
fn round_trip_hand_values() {
    let dir = tempfile::tempdir().unwrap();
    let d = noiseless(dir.path());
    let path = dir.path().join("p.csv");
    let out = run(&[
        "test",
        "--stat",
        "cusum",
        "--input",
        s(&d),
        "--path-out",
        s(&path),
        "--sided",
        "signed",
    ]);
    let v = json(&out);
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["stat"], "cusum");
    assert!((v["sup"].as_f64().unwrap() + 0.5).abs() < 1e-12, "{v}");
    let p = fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = p.lines().collect();
    assert_eq!(lines[0], "k,value");
    assert_eq!(lines.len(), 4);
    assert!(lines[2].starts_with("2,-1"));

    let v = json(&run(&["test", "--stat", "zmean", "--input", s(&d)]));
    assert_eq!(v["k_hat"], 2);
    assert_eq!(v["k_min"], 1);
    assert_eq!(v["k_max"], 3);
    let v = json(&run(&["fit", "--input", s(&d), "--k", "2"]));
    assert_eq!(v["pre"]["beta_hat"][0], 0.0);
    assert_eq!(v["post"]["beta_hat"][0], 2.0);
    assert_eq!(v["pre"]["k"], 2);
}

#[test]
fn decision_against_a_table() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("t.json");
    run(&[
        "critvals",
        "--kind",
        "supqp",
        "--reps",
        "1000",
        "--steps",
        "200",
        "--out",
        s(&table),
    ]);
    let data = dir.path().join("shift.csv");
    run(&[
        "simulate",
        "--family",
        "location",
        "--T",
        "200",
        "--s",
        "0.5",
        "--mu-post",
        "2",
        "--seed",
        "3",
        "--out",
        s(&data),
    ]);
    let v = json(&run(&[
        "test",
        "--stat",
        "wald",
        "--input",
        s(&data),
        "--critvals",
        s(&table),
    ]));
    assert_eq!(v["reject"], true);
    assert!(v["cv"].as_f64().unwrap() > 5.0);
    assert!((95..=105).contains(&v["k_hat"].as_u64().unwrap()));
    // level with no tabulated quantile, and a table for the wrong trimming
    let out = run(&[
        "test",
        "--stat",
        "wald",
        "--input",
        s(&data),
        "--critvals",
        s(&table),
        "--level",
        "0.2",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("critical value"));
    let out = run(&[
        "test",
        "--stat",
        "wald",
        "--nu",
        "0.2",
        "--input",
        s(&data),
        "--critvals",
        s(&table),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn numerical_failures_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let flat = dir.path().join("flat.csv");
    fs::write(&flat, "t,y\n1,5\n2,5\n3,5\n4,5\n5,5\n").unwrap();
    let out = run(&["test", "--stat", "cusum", "--input", s(&flat)]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));

    let sing = dir.path().join("sing.csv");
    let mut text = String::from("t,y,x1,x2\n");
    for t in 1..=20 {
        let x2 = if t <= 6 { 0.0 } else { (t as f64).sin() };
        text.push_str(&format!("{t},{},1,{x2}\n", (t as f64 * 0.7).cos()));
    }
    fs::write(&sing, text).unwrap();
    let skip = run(&["test", "--stat", "wald", "--nu", "0.1", "--input", s(&sing)]);
    assert!(skip.status.success());
    assert!(stderr(&skip).contains("singular"));
    assert!(!json(&skip)["skipped"].as_array().unwrap().is_empty());
    let fail = run(&[
        "test",
        "--stat",
        "wald",
        "--nu",
        "0.1",
        "--input",
        s(&sing),
        "--on-singular",
        "fail",
    ]);
    assert_eq!(fail.status.code(), Some(3));
}

#[test]
fn flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(
        &cfg,
        r#"{"family":"predictive_lur","T":10,"c":-5,"beta_pre":[0.5],"sigma_eps_u":-0.9}"#,
    )
    .unwrap();
    let out_path = dir.path().join("x.csv");
    let out = run(&[
        "simulate",
        "--config",
        s(&cfg),
        "--T",
        "30",
        "--c",
        "-10",
        "--out",
        s(&out_path),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = fs::read_to_string(&out_path).unwrap();
    assert_eq!(text.lines().count(), 31);
    assert!(text.starts_with("t,y,x1,x2\n"));
    let prov: Value = serde_json::from_str(
        &fs::read_to_string(dir.path().join("x.csv.provenance.json")).unwrap(),
    )
    .unwrap();
    let c = &prov["provenance"]["config"];
    assert_eq!(c["T"], 30);
    assert_eq!(c["c"], -10.0);
    assert_eq!(c["sigma_eps_u"], -0.9);

    fs::write(&cfg, r#"{"family":"location","T":3}"#).unwrap();
    let out = run(&["simulate", "--config", s(&cfg)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("`T`"));
}

#[test]
fn experiment_with_precomputed_tables_and_paths() {
    let dir = tempfile::tempdir().unwrap();
    let bb = dir.path().join("bb.json");
    let qp = dir.path().join("qp.json");
    run(&[
        "critvals",
        "--kind",
        "supabsbb",
        "--reps",
        "2000",
        "--steps",
        "200",
        "--out",
        s(&bb),
    ]);
    run(&[
        "critvals",
        "--kind",
        "supqp",
        "--reps",
        "2000",
        "--steps",
        "200",
        "--out",
        s(&qp),
    ]);
    let spec = dir.path().join("spec.json");
    fs::write(
        &spec,
        r#"{"dgp_grid":[{"family":"location","T":100,"beta_pre":[0.0]}],"stat_kinds":["cusum","wald"],"n_reps":200}"#,
    )
    .unwrap();
    let report = dir.path().join("r.csv");
    let critvals = format!("{},{}", s(&bb), s(&qp));
    let out = run(&[
        "experiment",
        "--spec",
        s(&spec),
        "--out",
        s(&report),
        "--critvals",
        &critvals,
        "--paths-sample",
        "3",
        "--seed",
        "11",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = fs::read_to_string(&report).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "family,T,s,c,corr,stat,nu,level,n_reps,failed,reject_rate,mc_se,sup_q50,sup_q95"
    );
    assert_eq!(lines.count(), 2);
    let paths = fs::read_to_string(dir.path().join("r.csv.paths.csv")).unwrap();
    assert!(paths.starts_with("cell,rep,stat,k,value\n"));
    assert_eq!(
        paths
            .lines()
            .filter(|l| l.starts_with("0,2,cusum,"))
            .count(),
        99
    );
    let prov: Value = serde_json::from_str(
        &fs::read_to_string(dir.path().join("r.csv.provenance.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(prov["provenance"]["config"]["master_seed"], 11);
    assert_eq!(
        prov["provenance"]["config"]["table_source"]["precomputed"][0],
        s(&bb)
    );
    assert_eq!(prov["rows"][0]["seed"], 11);

    // wald needs a supqp table
    let out = run(&["experiment", "--spec", s(&spec), "--critvals", s(&bb)]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["experiment", "--spec", s(&spec), "--reps", "10"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("n_reps"));
}

#[test]
fn distortion_writes_the_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("dist.csv");
    let out = run(&[
        "distortion",
        "--c-grid",
        "0,-20",
        "--corr-grid",
        "0,-0.9",
        "--T",
        "80",
        "--reps",
        "200",
        "--table-reps",
        "1000",
        "--table-steps",
        "100",
        "--out",
        s(&out_path),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = fs::read_to_string(&out_path).unwrap();
    assert_eq!(text.lines().count(), 1 + 2 * 2 * 2);
    assert!(text.contains("predictive_lur,80,0,-20,-0.9,wald,0.15,0.05,200,0,"));
}
