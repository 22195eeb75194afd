use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures").join(name)
}

fn qssvm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qssvm")).args(args).output().unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn simulate_prints_report() {
    let data = fixture("two_cluster_m8.csv");
    let grid = fixture("grid20.csv");
    let out = qssvm(&["simulate", path(&data), "--testset", path(&grid)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(&out);
    assert!(report["quantum_fidelity"].as_f64().unwrap() >= 0.99);
    assert_eq!(report["prediction_agreement"].as_f64(), Some(1.0));
    assert_eq!(report["predictions"].as_array().unwrap().len(), 20);
}

#[test]
fn simulate_writes_report_file() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("run.json");
    let data = fixture("two_cluster_m8.csv");
    let out = qssvm(&["simulate", path(&data), "--knn", "2", "--shots", "1000", "--report", path(&out_path)]);
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(report["config"]["shots"], 1000);
    assert_eq!(report["config"]["graph"]["knn"], 2);
}

#[test]
fn train_accepts_any_kernel() {
    let data = fixture("two_cluster_m8.csv");
    let out = qssvm(&["train", path(&data), "--kernel", "rbf:1.5", "--laplacian", "combinatorial", "--sigma-thresh", "0"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(&out);
    assert_eq!(report["alpha"].as_array().unwrap().len(), 8);
    assert!(report["relative_residual"].as_f64().unwrap() < 1e-8);
}

#[test]
fn bench_reports_three_channels() {
    let data = fixture("two_cluster_m8.csv");
    let out = qssvm(&["bench", path(&data), "--dts", "0.2,0.1,0.05"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["channels"].as_array().unwrap().len(), 3);
    let out = qssvm(&["bench", path(&data), "--dts", "0.2,0.1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn costmodel_full_rank() {
    let out = qssvm(&["costmodel", "--m", "64", "--p", "4", "--q", "64", "--epsilon", "0.5"]);
    assert_eq!(out.status.code(), Some(0));
    let report = json(&out);
    assert_eq!(report["regime"], "full_rank");
    assert_eq!(report["quantum_rank_factor"].as_f64(), Some(64f64.powi(3)));
    assert_eq!(report["dequantized_rank_factor"].as_f64(), Some(64f64.powi(9)));
}

#[test]
fn exit_codes_by_error_class() {
    let data = fixture("two_cluster_m8.csv");
    let edgeless = fixture("edgeless_m8.json");
    let input = qssvm(&["simulate", path(&data), "--graph", path(&edgeless), "--laplacian", "combinatorial"]);
    assert_eq!(input.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&input.stderr).contains("graph stage"));

    assert_eq!(qssvm(&["train", path(&data), "--kernel", "cubic"]).status.code(), Some(2));
    assert_eq!(qssvm(&["costmodel", "--m", "4", "--p", "1", "--q", "5", "--epsilon", "0.1"]).status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let zero = dir.path().join("zero.csv");
    std::fs::write(&zero, "x1,x2\n0,0\n").unwrap();
    assert_eq!(qssvm(&["simulate", path(&data), "--testset", path(&zero)]).status.code(), Some(3));

    let missing = dir.path().join("none.csv");
    assert_eq!(qssvm(&["train", path(&missing)]).status.code(), Some(4));
    let unwritable = dir.path().join("no/such/dir/r.json");
    assert_eq!(qssvm(&["train", path(&data), "--report", path(&unwritable)]).status.code(), Some(4));
}
