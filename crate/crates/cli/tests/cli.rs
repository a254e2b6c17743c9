use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;
use tidt_cli::manifest::RunManifest;
use tidt_cli::tensor_file;
use tidt_core::DenseTensor;

fn tidt(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tidt")).current_dir(dir).args(args).output().expect("spawn tidt")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn sine(t: usize, n: usize) -> DenseTensor {
    DenseTensor::from_fn(&[t, n], |i| ((i[0] as f64) * 0.4 + i[1] as f64).sin()).unwrap()
}

fn put(dir: &Path, name: &str, t: &DenseTensor) -> PathBuf {
    let p = dir.join(name);
    tensor_file::write(&p, t).unwrap();
    p
}

#[test]
fn recover_with_full_mask_returns_input() {
    let dir = TempDir::new().unwrap();
    let x = sine(12, 3);
    put(dir.path(), "x.tidt", &x);
    put(dir.path(), "m.tidt", &DenseTensor::ones(&[12, 3]).unwrap());
    let out = tidt(dir.path(), &["recover", "--input", "x.tidt", "--mask", "m.tidt", "--k", "6", "--lambda", "1e10", "--out", "y.tidt"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let y = tensor_file::read(&dir.path().join("y.tidt")).unwrap();
    assert!(y.max_abs_diff(&x).unwrap() < 1e-6);
}

#[test]
fn missing_input_fails_without_output() {
    let dir = TempDir::new().unwrap();
    put(dir.path(), "m.tidt", &DenseTensor::ones(&[4, 2]).unwrap());
    let out = tidt(dir.path(), &["recover", "--input", "absent.tidt", "--mask", "m.tidt", "--out", "y.tidt"]);
    assert_eq!(code(&out), 1);
    let err = String::from_utf8_lossy(&out.stderr);
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");
    assert!(!dir.path().join("y.tidt").exists());
}

#[test]
fn shape_mismatch_is_a_data_error() {
    let dir = TempDir::new().unwrap();
    put(dir.path(), "x.tidt", &sine(6, 2));
    put(dir.path(), "m.tidt", &DenseTensor::ones(&[6, 3]).unwrap());
    let out = tidt(dir.path(), &["recover", "--input", "x.tidt", "--mask", "m.tidt", "--out", "y.tidt"]);
    assert_eq!(code(&out), 1);
    assert!(!dir.path().join("y.tidt").exists());
}

#[test]
fn iteration_cap_exits_two_and_still_writes() {
    let dir = TempDir::new().unwrap();
    put(dir.path(), "x.tidt", &sine(16, 2));
    let out = tidt(dir.path(), &["mask", "gen", "--pattern", "1", "--rate", "0.5", "--shape", "16,2", "--out", "m.tidt"]);
    assert_eq!(code(&out), 0);
    let out = tidt(dir.path(), &["recover", "--input", "x.tidt", "--mask", "m.tidt", "--max-iters", "2", "--out", "y.tidt"]);
    assert_eq!(code(&out), 2);
    assert!(dir.path().join("y.tidt").exists());
}

#[test]
fn config_file_sits_below_flags() {
    let dir = TempDir::new().unwrap();
    put(dir.path(), "x.tidt", &sine(16, 2));
    put(dir.path(), "m.tidt", &DenseTensor::ones(&[16, 2]).unwrap());
    std::fs::write(dir.path().join("c.json"), r#"{"max_iters": 1, "k": 4}"#).unwrap();
    let base = ["recover", "--input", "x.tidt", "--mask", "m.tidt", "--config", "c.json", "--out", "y.tidt", "--report", "r.json"];
    assert_eq!(code(&tidt(dir.path(), &base)), 2);
    let m: RunManifest = serde_json::from_str(&std::fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();
    assert_eq!((m.solver.max_iters, m.solver.k), (1, Some(4)));
    let mut flagged = base.to_vec();
    flagged.extend(["--max-iters", "300"]);
    assert_eq!(code(&tidt(dir.path(), &flagged)), 0);
    std::fs::write(dir.path().join("c.json"), "{not json").unwrap();
    assert_eq!(code(&tidt(dir.path(), &base)), 1);
}

#[test]
fn manifest_replays_bit_for_bit() {
    let dir = TempDir::new().unwrap();
    put(dir.path(), "x.tidt", &sine(20, 3));
    put(dir.path(), "truth.tidt", &sine(20, 3));
    let gen = ["mask", "gen", "--pattern", "2", "--rate", "0.8", "--shape", "20,3", "--seed", "4", "--out", "m.tidt"];
    assert_eq!(code(&tidt(dir.path(), &gen)), 0);
    let out = tidt(
        dir.path(),
        &["recover", "--input", "x.tidt", "--mask", "m.tidt", "--transform", "dct", "--truth", "truth.tidt", "--out", "y.tidt", "--report", "r.json"],
    );
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("rmse"));
    let m: RunManifest = serde_json::from_str(&std::fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();
    assert!(m.report.rmse.is_some());
    assert_eq!(m.mask.generator.as_ref().unwrap().seed, Some(4));
    let out = tidt(dir.path(), &["replay", "--manifest", "r.json", "--out", "z.tidt"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read(dir.path().join("y.tidt")).unwrap(), std::fs::read(dir.path().join("z.tidt")).unwrap());
    // tampering with an input is detected
    put(dir.path(), "x.tidt", &sine(20, 3).scaled(2.0));
    assert_eq!(code(&tidt(dir.path(), &["replay", "--manifest", "r.json"])), 1);
}

#[test]
fn mask_generation_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let args = |out: &'static str| ["mask", "gen", "--pattern", "1", "--rate", "0.2", "--shape", "204,12,12", "--seed", "9", "--out", out];
    let out = tidt(dir.path(), &args("a.tidt"));
    assert_eq!(code(&out), 0);
    let rho: f64 = stdout(&out).trim().strip_prefix("rho ").unwrap().parse().unwrap();
    assert!((rho - 0.2).abs() <= 1.0 / 204.0);
    assert_eq!(code(&tidt(dir.path(), &args("b.tidt"))), 0);
    assert_eq!(std::fs::read(dir.path().join("a.tidt")).unwrap(), std::fs::read(dir.path().join("b.tidt")).unwrap());

    let out = tidt(dir.path(), &["mask", "gen", "--pattern", "prediction", "--horizon", "0", "--shape", "5,2", "--out", "p.tidt"]);
    assert_eq!(code(&out), 0);
    assert_eq!(tensor_file::read(&dir.path().join("p.tidt")).unwrap(), DenseTensor::ones(&[5, 2]).unwrap());
    let out = tidt(dir.path(), &["mask", "gen", "--pattern", "1", "--shape", "5,2", "--out", "q.tidt"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn analyze_reports_consistent_bound() {
    let dir = TempDir::new().unwrap();
    let x = tidt_core::experiments::generate_synthetic(24, 6, 1, 2).unwrap();
    put(dir.path(), "x.tidt", &x);
    let out = tidt(dir.path(), &["analyze", "--input", "x.tidt", "--k", "24"]);
    assert_eq!(code(&out), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["satisfied"], true);
    let (mu, r, rs, alpha) =
        (v["mu"].as_f64().unwrap(), v["r"].as_f64().unwrap(), v["r_s"].as_f64().unwrap(), v["alpha"].as_f64().unwrap());
    assert!(r <= 2.0);
    let by_hand = (1.0 - alpha * 24.0 / (2.0 * mu * r * (rs + 1.0) * 24.0)).clamp(0.0, 1.0);
    assert!((by_hand - v["rho_bound"].as_f64().unwrap()).abs() < 1e-12);

    put(dir.path(), "zero.tidt", &DenseTensor::zeros(&[6, 2]).unwrap());
    assert_eq!(code(&tidt(dir.path(), &["analyze", "--input", "zero.tidt", "--k", "3"])), 1);
}

#[test]
fn metrics_bench_and_phase() {
    let dir = TempDir::new().unwrap();
    put(dir.path(), "x.tidt", &sine(4, 2));
    let out = tidt(dir.path(), &["metrics", "--est", "x.tidt", "--truth", "x.tidt"]);
    assert_eq!(stdout(&out).trim(), "0.0 0.0");

    assert_eq!(code(&tidt(dir.path(), &["bench", "--sizes", "10", "--reps", "1", "--out", "b.csv"])), 0);
    let csv = std::fs::read_to_string(dir.path().join("b.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);

    let out = tidt(
        dir.path(),
        &["simulate", "phase", "--t", "8", "--ranks", "2", "--rhos", "0.5,0.875", "--trials", "1", "--out-grid", "g.csv", "--out-records", "r.json"],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(std::fs::read_to_string(dir.path().join("g.csv")).unwrap().lines().count() >= 2);
}

#[test]
fn csv_ingest_and_export_round_trip() {
    let dir = TempDir::new().unwrap();
    std::fs::write(dir.path().join("a.csv"), "1.5,2\nNaN,4\n5,6\n").unwrap();
    let out = tidt(dir.path(), &["ingest", "--csv", "a.csv", "--time-major", "--out", "a.tidt", "--mask-out", "a.mask"]);
    assert_eq!(code(&out), 0);
    let a = tensor_file::read(&dir.path().join("a.tidt")).unwrap();
    assert_eq!(a.shape(), &[3, 2]);
    assert_eq!(tensor_file::read(&dir.path().join("a.mask")).unwrap().data(), &[1.0, 1.0, 0.0, 1.0, 1.0, 1.0]);
    assert_eq!(code(&tidt(dir.path(), &["export", "--input", "a.tidt", "--time-major", "--out", "b.csv"])), 0);
    assert_eq!(code(&tidt(dir.path(), &["ingest", "--csv", "b.csv", "--time-major", "--out", "b.tidt"])), 0);
    assert_eq!(std::fs::read(dir.path().join("a.tidt")).unwrap(), std::fs::read(dir.path().join("b.tidt")).unwrap());

    std::fs::write(dir.path().join("bad.csv"), "1,2\n3\n").unwrap();
    assert_eq!(code(&tidt(dir.path(), &["ingest", "--csv", "bad.csv", "--out", "c.tidt"])), 1);
}
