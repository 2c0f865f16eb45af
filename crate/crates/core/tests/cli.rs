use std::path::Path;
use std::process::Command;

use ris_amp::config::SystemConfig;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ris-amp"))
}

fn quick_config(dir: &Path) -> std::path::PathBuf {
    let mut cfg = SystemConfig::desk();
    cfg.amp.max_iter = 30;
    let path = dir.join("quick.toml");
    std::fs::write(&path, cfg.to_toml_string()).unwrap();
    path
}

#[test]
fn selftest_exits_zero() {
    let out = bin().arg("selftest").output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(String::from_utf8_lossy(&out.stdout).contains("[PASS]"));
}

#[test]
fn config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "pilot_length = 0\n").unwrap();
    let out = bin().args(["--config", bad.to_str().unwrap(), "simulate"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = bin().args(["--profile", "huge", "simulate"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = bin().args(["sweep", "--param", "Q", "--values", "1"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_writes_dumps() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = quick_config(dir.path());
    let out_dir = dir.path().join("sim");
    let out = bin()
        .args(["--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap(), "simulate", "--genie"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["report.csv", "report.json", "trajectory.csv", "dictionaries.bin"] {
        assert!(out_dir.join(f).is_file(), "missing {f}");
    }
    let json: serde_json::Value = serde_json::from_slice(&std::fs::read(out_dir.join("report.json")).unwrap()).unwrap();
    assert!(json["provenance"]["config_sha256"].as_str().unwrap().len() == 64);
    assert!(json["genie_nmse_g_db"].is_number());
}

#[test]
fn sweep_csv_is_identical_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = quick_config(dir.path());
    let run = |workers: &str, name: &str| {
        let out_dir = dir.path().join(name);
        let out = bin()
            .args(["--config", cfg.to_str().unwrap(), "--workers", workers, "--out", out_dir.to_str().unwrap()])
            .args(["sweep", "--param", "snr_db", "--values", "0,20", "--trials", "3"])
            .output()
            .unwrap();
        assert!(out.status.success());
        std::fs::read(out_dir.join("report.csv")).unwrap()
    };
    let a = run("1", "a");
    assert_eq!(a, run("1", "b"));
    assert_eq!(a, run("2", "c"));
    let text = String::from_utf8(a).unwrap();
    assert_eq!(text.lines().count(), 1 + 2 * 3);
    assert!(text.lines().next().unwrap().contains("nmse_g_db"));
}

#[test]
fn phase_transition_writes_grid() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = quick_config(dir.path());
    let out_dir = dir.path().join("pt");
    let out = bin()
        .args(["--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()])
        .args(["phase-transition", "--rows", "L=20,40", "--cols", "snr_db=10,30", "--trials", "2"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(out_dir.join("phase_transition.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 4);
}
