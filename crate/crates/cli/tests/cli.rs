use std::path::Path;
use std::process::{Command, Output};

fn ils(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ils")).args(args).output().unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(dir: &Path) {
    let out = ils(&["synth", "--out", path(dir), "--per-class", "30"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn synth_then_run_writes_all_outputs() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path());
    let out_dir = dir.path().join("run");
    let model = dir.path().join("exported.txt");
    let out = ils(&[
        "run",
        "--source",
        path(&dir.path().join("source.csv")),
        "--target",
        path(&dir.path().join("target.csv")),
        "--dim",
        "3",
        "--max-iters",
        "40",
        "--out",
        path(&out_dir),
        "--export-model",
        path(&model),
        "--trace",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let stdout = String::from_utf8(out.stdout).unwrap();
    let records: Vec<serde_json::Value> = stdout.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert!(records.len() >= 2);
    assert_eq!(records[0]["iteration"], 0);

    let metrics: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("metrics.json")).unwrap()).unwrap();
    let accuracy = metrics["accuracy"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&accuracy));
    assert_eq!(metrics["iterations"].as_u64().unwrap() as usize + 1, records.len());

    for file in ["trace.jsonl", "predictions.csv", "model.txt"] {
        assert!(out_dir.join(file).is_file(), "{file} missing");
    }
    assert_eq!(
        std::fs::read(&model).unwrap(),
        std::fs::read(out_dir.join("model.txt")).unwrap()
    );
}

#[test]
fn sweep_writes_one_directory_per_lambda() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path());
    let out_dir = dir.path().join("sweep");
    let out = ils(&[
        "sweep",
        "--source",
        path(&dir.path().join("source.csv")),
        "--target",
        path(&dir.path().join("target.csv")),
        "--dim",
        "2",
        "--max-iters",
        "10",
        "--lambdas",
        "0,1",
        "--out",
        path(&out_dir),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out_dir.join("lambda-0/metrics.json").is_file());
    assert!(out_dir.join("lambda-1/metrics.json").is_file());
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("sweep.json")).unwrap()).unwrap();
    assert_eq!(summary.as_array().unwrap().len(), 2);
}

#[test]
fn malformed_input_fails_with_a_stage_label() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path());
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "label,f0,f1\n0,1.0,2.0\n1,oops,3.0\n").unwrap();
    let out = ils(&[
        "run",
        "--source",
        path(&bad),
        "--target",
        path(&dir.path().join("target.csv")),
        "--out",
        path(&dir.path().join("run")),
    ]);
    assert!(!out.status.success());
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("[load]"), "{stderr}");
    assert!(stderr.contains("line 3"), "{stderr}");
}

#[test]
fn oversized_latent_dimension_is_reported_by_stage() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path());
    let out = ils(&[
        "run",
        "--source",
        path(&dir.path().join("source.csv")),
        "--target",
        path(&dir.path().join("target.csv")),
        "--dim",
        "50",
        "--out",
        path(&dir.path().join("run")),
    ]);
    assert!(!out.status.success());
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.starts_with("error: ["), "{stderr}");
}
