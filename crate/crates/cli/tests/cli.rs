use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn regcalc(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_regcalc"))
        .current_dir(dir)
        .env_remove("REGCALC_OUT")
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

#[test]
fn ito_check_on_brownian_square_passes() {
    let dir = TempDir::new().unwrap();
    let out = regcalc(dir.path(), &["--out", "o", "ito-check", "--scenario", "bm", "--fn", "square"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("o/bm_square_ito.json")).unwrap()).unwrap();
    assert_eq!(json["schema_version"], 1);
}

#[test]
fn rough_fbm_qv_fails_with_exit_one() {
    let dir = TempDir::new().unwrap();
    let out = regcalc(dir.path(), &["--out", "o", "qv", "--scenario", "fbm02"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn unknown_scenario_exits_two() {
    let dir = TempDir::new().unwrap();
    let out = regcalc(dir.path(), &["qv", "--scenario", "no_such_thing"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("no_such_thing"));
}

#[test]
fn unwritable_output_exits_three() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("blocker"), "").unwrap();
    let out = regcalc(dir.path(), &["--out", "blocker", "simulate", "--scenario", "bm", "--n", "100"]);
    assert_eq!(code(&out), 3);
    let missing = regcalc(dir.path(), &["--config", "absent.conf", "list"]);
    assert_eq!(code(&missing), 3);
}

#[test]
fn reruns_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let args = ["qv", "--scenario", "cp", "--seed", "11"];
    for sub in ["a", "b"] {
        let mut full = vec!["--out", sub];
        full.extend(args);
        assert_eq!(code(&regcalc(dir.path(), &full)), 0);
    }
    for name in ["cp_qv.json", "cp_qv.csv"] {
        let a = fs::read(dir.path().join("a").join(name)).unwrap();
        let b = fs::read(dir.path().join("b").join(name)).unwrap();
        assert_eq!(a, b, "{name}");
    }
}

#[test]
fn flags_beat_config_and_config_beats_env() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("run.conf"), "# sample\nn = 200\nseed=5\nout=from_config\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_regcalc"))
        .current_dir(dir.path())
        .env("REGCALC_OUT", "from_env")
        .args(["--config", "run.conf", "simulate", "--scenario", "bm", "--n", "300"])
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
    let csv = fs::read_to_string(dir.path().join("from_config/bm_path.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 301);
    assert!(!dir.path().join("from_env").exists());
}

#[test]
fn env_sets_default_output_dir() {
    let dir = TempDir::new().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_regcalc"))
        .current_dir(dir.path())
        .env("REGCALC_OUT", "from_env")
        .args(["simulate", "--scenario", "poisson", "--n", "100"])
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
    assert!(dir.path().join("from_env/poisson_truth.json").exists());
}

#[test]
fn bad_config_value_exits_two() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("bad.conf"), "n = many\n").unwrap();
    let out = regcalc(dir.path(), &["--config", "bad.conf", "simulate", "--scenario", "bm"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn list_filters_entries() {
    let dir = TempDir::new().unwrap();
    let out = regcalc(dir.path(), &["list", "fbm"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("fbm02"));
    assert!(!text.contains("poisson"));
}
