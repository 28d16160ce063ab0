use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lowrank_markov::estimation::PipelineConfig;
use lowrank_markov::harness::{ExperimentConfig, TaxiIngestConfig};
use lowrank_markov::markov::read_trajectory;
use lowrank_markov::tensor::io::{read_model, read_tensor};
use lowrank_markov::{Model, Tensor};

fn lrmc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lrmc"))
        .args(args)
        .current_dir(env!("CARGO_MANIFEST_DIR"))
        .output()
        .expect("spawn lrmc")
}

fn ok(args: &[&str]) -> String {
    let out = lrmc(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn crate_path(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join(rel)
}

#[test]
fn synth_sample_estimate_eval() {
    let dir = tempfile::tempdir().unwrap();
    let truth_model = dir.path().join("truth.model");
    let truth = dir.path().join("truth.tensor");
    let traj = dir.path().join("x.traj");
    ok(&["--seed", "3", "synth", "--dims", "2,3", "--rank", "2", "--out", s(&truth_model), "--transition-out", s(&truth)]);
    let model: Model = read_model(&truth_model).unwrap();
    assert_eq!(model.rank(), 2);
    assert!(model.simplex_violation() < 1e-12);

    ok(&["--seed", "4", "sample", "--chain", s(&truth_model), "--transitions", "2000", "--out", s(&traj)]);
    let x = read_trajectory(&traj).unwrap();
    assert_eq!(x.len(), 2001);
    assert_eq!(x.space().dims(), &[2, 3]);

    for method in ["empirical", "slrm-2", "lrt-2"] {
        let est = dir.path().join(format!("{method}.tensor"));
        let manifest = dir.path().join(format!("{method}.json"));
        let stdout = ok(&[
            "estimate", "--trajectory", s(&traj), "--method", method, "--restarts", "2", "--max-cycles", "500",
            "--out", s(&est), "--manifest", s(&manifest),
        ]);
        assert!(stdout.starts_with(&format!("method {method}")), "{stdout}");
        let p: Tensor = read_tensor(&est).unwrap();
        assert_eq!(p.shape(), &[2, 3, 2, 3]);
        let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&manifest).unwrap()).unwrap();
        assert_eq!(json["method"], method);
        assert_eq!(json["fit"].is_null(), method != "lrt-2");

        let stdout = ok(&["eval", "--estimate", s(&est), "--truth", s(&truth)]);
        let err: f64 = stdout.trim().strip_prefix("error ").unwrap().parse().unwrap();
        assert!(err.is_finite() && err < 0.5, "{method}: {err}");
    }

    let stdout = ok(&["eval", "--estimate", s(&truth), "--truth", s(&truth)]);
    assert_eq!(stdout.trim(), "error 0");
}

#[test]
fn derive_from_model() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("m.model");
    let p = dir.path().join("p.tensor");
    let r = dir.path().join("r.tensor");
    ok(&["synth", "--dims", "3", "--rank", "2", "--asymmetric", "--out", s(&m)]);
    ok(&["derive", "--model", s(&m), "--out", s(&p), "--marginal-out", s(&r)]);
    let p: Tensor = read_tensor(&p).unwrap();
    let r: Tensor = read_tensor(&r).unwrap();
    assert_eq!(p.shape(), &[3, 3]);
    assert!((r.sum() - 1.0).abs() < 1e-12);
    for row in p.data().chunks(3) {
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn exit_codes() {
    assert_eq!(lrmc(&["synth", "--bogus"]).status.code(), Some(2));
    assert_eq!(lrmc(&["eval", "--estimate", "missing.tensor", "--truth", "missing.tensor"]).status.code(), Some(1));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "trials = 0\nunknown_key = 1\n").unwrap();
    let out = lrmc(&["sweep", "--config", s(&bad)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
}

#[test]
fn ingest_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let joint = dir.path().join("q.tensor");
    let report = dir.path().join("report.json");
    let stdout = ok(&[
        "ingest-taxi", "--config", "configs/taxi-fixture.toml", "--joint-out", s(&joint), "--report-out", s(&report),
    ]);
    assert!(stdout.starts_with("states 396 total 20 kept 14 dropped 4 malformed 2"), "{stdout}");
    let q: Tensor = read_tensor(&joint).unwrap();
    assert_eq!(q.shape(), &[66, 6, 66, 6]);
    assert!((q.sum() - 1.0).abs() < 1e-12);
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(json["kept"], 14);
}

#[test]
fn tiny_sweep_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.toml");
    let rows = dir.path().join("rows.csv");
    let summary = dir.path().join("summary.csv");
    std::fs::write(
        &cfg,
        r#"
sample_sizes = [200, 2000]
trials = 2
methods = ["lrt-2", "slrm-2", "empirical"]
seed = 5

[source]
kind = "synthetic"
dims = [2, 2]
rank = 2

[pipeline.fit]
restarts = 1
max_cycles = 300
"#,
    )
    .unwrap();
    ok(&["sweep", "--config", s(&cfg), "--out", s(&rows), "--summary", s(&summary)]);
    let table = std::fs::read_to_string(&rows).unwrap();
    let mut lines = table.lines();
    assert_eq!(lines.next().unwrap(), "method,hyperparam,N,trial,error,parameters,wall_time,seed,status");
    assert_eq!(lines.count(), 12);
    assert_eq!(std::fs::read_to_string(&summary).unwrap().lines().count(), 7);

    ok(&["sweep", "--config", s(&cfg), "--out", s(&dir.path().join("again.csv")), "--threads", "2"]);
    assert_eq!(std::fs::read_to_string(dir.path().join("again.csv")).unwrap(), table);
}

#[test]
fn shipped_configs_parse() {
    let mut seen = 0;
    for entry in std::fs::read_dir(crate_path("configs")).unwrap() {
        let path = entry.unwrap().path();
        let text = std::fs::read_to_string(&path).unwrap();
        let name = path.file_name().unwrap().to_str().unwrap().to_owned();
        if name.starts_with("taxi-fixture") {
            let cfg: TaxiIngestConfig = toml::from_str(&text).unwrap();
            cfg.validate().unwrap();
        } else if name == "pipeline.toml" {
            let cfg: PipelineConfig = toml::from_str(&text).unwrap();
            cfg.fit.validate().unwrap();
        } else {
            ExperimentConfig::from_toml(&text).unwrap_or_else(|e| panic!("{name}: {e}")).validate().unwrap();
        }
        seen += 1;
    }
    assert_eq!(seen, 5);
}
