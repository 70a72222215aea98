use std::path::Path;
use std::process::{Command, Output};
use std::time::Instant;

fn blocksim(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_blocksim"))
        .args(args)
        .current_dir(dir)
        .env_remove("BLOCKSIM_SEED")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("JSON on stdout")
}

const INF: &[&str] = &["simulate", "--engine", "infinite", "--alpha", "exp:1", "--beta", "exp:0.1", "--n", "1000", "--seed", "7"];

#[test]
fn simulate_outcome_contract() {
    let dir = tempfile::tempdir().unwrap();
    let a = blocksim(INF, dir.path());
    let v = json(&a);
    let p = v["p_n"].as_f64().unwrap();
    assert!(p > 0.0 && p <= 1.0);
    assert_eq!(v["n"], 1000);
    assert_eq!(v["engine"], "infinite");
    assert_eq!(v["seed"], 7);
    assert_eq!(v["height"].as_u64().unwrap() as f64 / 1000.0, p);
    assert_eq!(a.stdout, blocksim(INF, dir.path()).stdout);
}

#[test]
fn single_worker_network_is_a_chain() {
    let dir = tempfile::tempdir().unwrap();
    let v = json(&blocksim(
        &["simulate", "--engine", "network", "--m", "1", "--alpha", "exp:1", "--beta", "exp:4", "--n", "300"],
        dir.path(),
    ));
    assert_eq!(v["p_n"], 1.0);
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let cases: [&[&str]; 5] = [
        &["simulate", "--engine", "matrix", "--m", "3", "--alpha", "exp:1", "--beta", "exp:1", "--n", "20", "--tree-out", "t.json"],
        &["simulate", "--engine", "matrix", "--alpha", "exp:1", "--beta", "exp:1", "--n", "20"],
        &["simulate", "--engine", "infinite", "--alpha", "const:0", "--beta", "exp:1", "--n", "20"],
        &["simulate", "--engine", "infinite", "--alpha", "weird:1", "--beta", "exp:1", "--n", "20"],
        &["simulate", "--engine", "network", "--m", "2", "--alpha", "exp:1", "--beta", "exp:1", "--n", "20", "--tree-out", "t.xml", "--tree-format", "xml"],
    ];
    for args in cases {
        assert_eq!(blocksim(args, dir.path()).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn tree_exports() {
    let dir = tempfile::tempdir().unwrap();
    let base = ["simulate", "--engine", "network", "--m", "4", "--alpha", "exp:1", "--beta", "exp:2", "--n", "50", "--seed", "3"];
    let mut args = base.to_vec();
    args.extend(["--out", "o.json", "--tree-out", "t.dot"]);
    assert!(blocksim(&args, dir.path()).status.success());
    let dot = std::fs::read_to_string(dir.path().join("t.dot")).unwrap();
    assert!(dot.starts_with("digraph blocktree {"));
    assert_eq!(dot.matches(" -> ").count(), 49);

    let mut args = base.to_vec();
    args.extend(["--tree-out", "t.json"]);
    assert!(blocksim(&args, dir.path()).status.success());
    let tree: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("t.json")).unwrap()).unwrap();
    assert_eq!(tree["parents"].as_array().unwrap().len(), 49);
    assert_eq!(tree["times"].as_array().unwrap().len(), 50);
}

#[test]
fn config_file_with_flag_override_and_env_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{"engine":"matrix","m":4,"n":80,"alpha":{"kind":"exponential","mean":1},
                  "beta":{"kind":"gamma","mean":2,"shape":3},"seed":9}"#;
    std::fs::write(dir.path().join("c.json"), cfg).unwrap();
    let v = json(&blocksim(&["simulate", "--config", "c.json", "--n", "60"], dir.path()));
    assert_eq!((v["n"].as_u64(), v["seed"].as_u64(), v["m"].as_u64()), (Some(60), Some(9), Some(4)));

    let out = Command::new(env!("CARGO_BIN_EXE_blocksim"))
        .args(["simulate", "--engine", "infinite", "--alpha", "exp:1", "--beta", "exp:1", "--n", "40"])
        .env("BLOCKSIM_SEED", "123")
        .output()
        .unwrap();
    assert_eq!(json(&out)["seed"], 123);

    std::fs::write(dir.path().join("bad.json"), r#"{"engine":"matrix","colour":1}"#).unwrap();
    assert_eq!(blocksim(&["simulate", "--config", "bad.json"], dir.path()).status.code(), Some(2));
}

#[test]
fn validate_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    assert_eq!(blocksim(&["validate", "--quick"], dir.path()).status.code(), Some(0));
    assert!(start.elapsed().as_secs_f64() < 10.0);
    assert_eq!(blocksim(&["validate"], dir.path()).status.code(), Some(0));
    let faulty = blocksim(&["validate", "--quick", "--inject-fault"], dir.path());
    assert_eq!(faulty.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&faulty.stdout).contains("FAIL engine_equivalence"));
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn experiment_csv_schemas() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(blocksim(&["experiment", "efficiency", "--reps", "3", "--n", "100", "--out", "e.csv"], d).status.success());
    let rows = csv_rows(&d.join("e.csv"));
    assert_eq!(rows[0].join(","), "ratio,alpha_mean,beta_mean,mean_p,std_err,predicted_p,abs_error");
    assert_eq!(rows.len(), 52);
    for r in &rows[1..] {
        let ratio: f64 = r[0].parse().unwrap();
        let predicted: f64 = r[5].parse().unwrap();
        assert!((predicted - 1.0 / (1.0 + ratio)).abs() < 1e-12);
    }

    assert!(blocksim(&["experiment", "convergence", "--sweep", "1,5", "--reps", "5", "--n", "100", "--out", "c.csv"], d)
        .status
        .success());
    let rows = csv_rows(&d.join("c.csv"));
    assert_eq!(rows[0].join(","), "m,mean_p,q25,q75,replications");
    assert_eq!(rows[1][1], "1");
    assert_eq!(rows.last().unwrap()[0], "inf");

    assert!(blocksim(&["experiment", "histogram", "--m", "10", "--reps", "50", "--n", "100", "--bins", "8", "--out", "h.csv"], d)
        .status
        .success());
    let rows = csv_rows(&d.join("h.csv"));
    assert_eq!(rows[0].join(","), "bin_left,bin_right,density_Am,density_Ainf");
    assert_eq!(rows.len(), 9);
    for w in rows[1..].windows(2) {
        assert_eq!(w[0][1], w[1][0]);
    }
    assert!(d.join("h.csv.manifest.json").exists());
}

#[test]
fn rerun_detects_tampering() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let mut args = INF.to_vec();
    args.extend(["--out", "o.json"]);
    assert!(blocksim(&args, d).status.success());
    assert_eq!(blocksim(&["rerun", "o.json.manifest.json"], d).status.code(), Some(0));

    let path = d.join("o.json.manifest.json");
    let mut manifest: serde_json::Value = serde_json::from_slice(&std::fs::read(&path).unwrap()).unwrap();
    manifest["outputs"][0]["sha256"] = "00".repeat(32).into();
    std::fs::write(&path, serde_json::to_vec(&manifest).unwrap()).unwrap();
    assert_eq!(blocksim(&["rerun", "o.json.manifest.json"], d).status.code(), Some(1));
    assert_eq!(blocksim(&["rerun", "missing.json"], d).status.code(), Some(2));
}

#[test]
fn predict_reports_ratio_and_regime() {
    let dir = tempfile::tempdir().unwrap();
    let v = json(&blocksim(&["predict", "--alpha-mean", "600", "--beta-mean", "12.6"], dir.path()));
    assert!((v["predicted_p"].as_f64().unwrap() - 0.9794).abs() < 5e-5);
    assert_eq!(v["regime"], "fast");
    assert!((v["ratio"].as_f64().unwrap() - 0.021).abs() < 1e-12);
}
