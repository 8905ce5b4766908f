use std::path::Path;
use std::process::{Command, Output};
use std::time::Instant;

use moilab::pipeline::{read_records, replay};
use moilab::MatrixJson;

fn moilab(args: &[&str], envs: &[(&str, &Path)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_moilab"));
    cmd.args(args).env_remove("MOILAB_OUT");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn verify_default_passes_with_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = moilab(&["verify", "--out", path(dir.path())], &[]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("verify.json")).unwrap()).unwrap();
    let checks = report["checks"].as_array().unwrap();
    assert!(checks.len() >= 7);
    assert!(checks.iter().all(|c| c["residual"].is_number() && c["threshold"].is_number()));
}

#[test]
fn verify_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path());
    assert_eq!(code(&moilab(&["verify", "--tol", "taylor=-1", "--out", out], &[])), 2);
    assert_eq!(code(&moilab(&["verify", "--tol", "nonsense=1", "--out", out], &[])), 2);
    assert_eq!(code(&moilab(&["verify", "--inject-fault", "--instances", "2", "--out", out], &[])), 1);
    assert_eq!(code(&moilab(&["bogus"], &[])), 2);
    assert_eq!(code(&moilab(&["pipeline", "--n-ladder", "16,8"], &[])), 2);
    assert_eq!(code(&moilab(&["report", "--alpha-series", "harmonic"], &[])), 2);
}

#[test]
fn minimal_ladder_entry_gives_replayable_record() {
    let dir = tempfile::tempdir().unwrap();
    let o = moilab(&["pipeline", "--n-ladder", "3", "--out", path(dir.path())], &[]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let recs = read_records(dir.path()).unwrap();
    assert_eq!(recs.len(), 1);
    let r = &recs[0];
    assert_eq!((r.dim_small, r.dim_big), (7, 28));
    assert!(r.m >= 3);
    assert!((r.z_hs - 1.0 / r.m as f64).abs() < 1e-12);
    for e in replay(dir.path(), r).unwrap() {
        assert!(e.rel_diff < 1e-9, "{e:?}");
    }
}

#[test]
fn smoke_run_is_fast_and_deterministic() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let t = Instant::now();
    assert_eq!(code(&moilab(&["pipeline", "--n-ladder", "8", "--seed", "11", "--out", path(a.path())], &[])), 0);
    assert!(t.elapsed().as_secs() < 60);
    assert_eq!(code(&moilab(&["pipeline", "--n-ladder", "8", "--seed", "11"], &[("MOILAB_OUT", b.path())])), 0);
    let files: Vec<_> = std::fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(files.len(), 8);
    for f in files {
        assert_eq!(std::fs::read(a.path().join(&f)).unwrap(), std::fs::read(b.path().join(&f)).unwrap(), "{f:?}");
    }
}

#[test]
fn stored_matrices_round_trip_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&moilab(&["pipeline", "--n-ladder", "4", "--out", path(dir.path())], &[])), 0);
    let text = std::fs::read_to_string(dir.path().join("n0004_W.json")).unwrap();
    let j: MatrixJson = serde_json::from_str(&text).unwrap();
    assert_eq!(j.dim, 36);
    let w = moilab::ComplexMatrix::from_json(&j).unwrap();
    assert_eq!(serde_json::to_string(&w.to_json()).unwrap(), text);
}

#[test]
fn report_over_three_records() {
    let dir = tempfile::tempdir().unwrap();
    let d = path(dir.path());
    assert_eq!(code(&moilab(&["pipeline", "--n-ladder", "3,4,5", "--out", d], &[])), 0);
    let o = moilab(&["report", "--out", d], &[]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("sum bound true"));
    assert!(stdout.contains("fit ratio_h"));
    let json = std::fs::read(dir.path().join("report.json")).unwrap();
    let csv = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
    let rep: serde_json::Value = serde_json::from_slice(&json).unwrap();
    assert_eq!(rep["rows"].as_array().unwrap().len(), 3);
    assert_eq!(csv.lines().next().unwrap(), "n,ratio_h,ratio_g,toi_lb,scaled");
    assert_eq!(csv.lines().count(), 4);

    assert_eq!(code(&moilab(&["report", "--out", d, "--alpha-series", "inverse-nlogn"], &[])), 0);
    assert_eq!(code(&moilab(&["report", "--out", d], &[])), 0);
    assert_eq!(std::fs::read(dir.path().join("report.json")).unwrap(), json);
}

#[test]
fn report_on_empty_directory_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    let o = moilab(&["report", "--records", path(dir.path()), "--out", path(out.path())], &[]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("at least 3 records"));
}

#[test]
fn schur_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let d = path(dir.path());
    let o = moilab(&["schur", "--triangular", "4", "--out", d], &[]);
    assert_eq!(code(&o), 0);
    let cert: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("schur.json")).unwrap()).unwrap();
    let (lo, hi) = (cert["lower"].as_f64().unwrap(), cert["upper"].as_f64().unwrap());
    assert!(lo > 1.0 && (hi - lo) / hi < 0.1);

    let sym = dir.path().join("ones.json");
    std::fs::write(&sym, r#"{"n":2,"re":[1,1,1,1,1,1,1,1],"im":[0,0,0,0,0,0,0,0]}"#).unwrap();
    let o = moilab(&["schur", "--symbol", path(&sym), "--starts", "3", "--out", d], &[]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("consistent true"));

    std::fs::write(&sym, r#"{"n":2,"re":[1,1,1],"im":[0,0,0]}"#).unwrap();
    assert_eq!(code(&moilab(&["schur", "--symbol", path(&sym), "--out", d], &[])), 2);
    assert_eq!(code(&moilab(&["schur", "--out", d], &[])), 2);
}

#[test]
fn plot_csv() {
    let dir = tempfile::tempdir().unwrap();
    let o = moilab(&["plot", "--function", "f", "--resolution", "16"], &[("MOILAB_OUT", dir.path())]);
    assert_eq!(code(&o), 0);
    let csv = std::fs::read_to_string(dir.path().join("f.csv")).unwrap();
    assert_eq!(csv.lines().count(), 17);
    assert_eq!(code(&moilab(&["plot", "--function", "q"], &[("MOILAB_OUT", dir.path())])), 2);
}
