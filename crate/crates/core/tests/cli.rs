use std::path::Path;
use std::process::{Command, Output};

use lipdream::data_io::{synth_ohlcv, write_ohlcv, OhlcvSynthParams};

fn lipdream(args: &[&str], out_dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lipdream"))
        .args(args)
        .env("LIPDREAM_OUT_DIR", out_dir)
        .output()
        .unwrap()
}

fn bars_file(dir: &Path, days: usize) -> String {
    let path = dir.join(format!("bars{days}.csv"));
    let bars = synth_ohlcv(&OhlcvSynthParams {
        n_days: days,
        seed: 3,
        ..OhlcvSynthParams::default()
    })
    .unwrap();
    write_ohlcv(&path, &bars).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn run_currency_writes_report_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let input = bars_file(dir.path(), 25);
    let out = lipdream(&["run", "--scenario", "currency", "--input", &input, "--seed", "7"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("cum_realized=") && stdout.contains("survival=n/a"), "{stdout}");
    let report = dir.path().join("report-currency-7.json");
    let value: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(report).unwrap()).unwrap();
    assert_eq!(value["meta"]["seed"], 7);
    assert_eq!(value["meta"]["config"]["run"]["epsilon"], 0.1);
}

#[test]
fn run_allocation_writes_both_reports() {
    let dir = tempfile::tempdir().unwrap();
    let prices = dir.path().join("p.csv");
    let out = lipdream(
        &["synth", "--steps", "120", "--seed", "2", "--output", prices.to_str().unwrap()],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let report = dir.path().join("alloc.csv");
    let out = lipdream(
        &[
            "run",
            "--scenario",
            "allocation",
            "--input",
            prices.to_str().unwrap(),
            "--output",
            report.to_str().unwrap(),
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("alloc.real.csv").exists());
    assert!(dir.path().join("alloc.dreams.csv").exists());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let code = |args: &[&str]| lipdream(args, dir.path()).status.code();
    assert_eq!(code(&["run", "--epsilon", "-0.5"]), Some(2));
    assert_eq!(code(&["run", "--extension", "blend:2"]), Some(2));
    assert_eq!(code(&["run", "--scenario", "allocation", "--beta", "1.0"]), Some(2));
    assert_eq!(code(&["run", "--input", "/no/such/bars.csv"]), Some(3));
    let tiny = bars_file(dir.path(), 1);
    assert_eq!(code(&["run", "--input", &tiny]), Some(4));
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "seed = 1\nunknown_key = 2\n").unwrap();
    assert_eq!(code(&["run", "--config", cfg.to_str().unwrap()]), Some(2));
    assert_eq!(code(&["--help"]), Some(0));
}

#[test]
fn verify_exit_codes_and_verbose_example() {
    let dir = tempfile::tempdir().unwrap();
    let out = lipdream(&["verify", "-v", "--instances", "30"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("R^M((-1,0)) = -150"));
    let out = lipdream(&["verify", "--inject-k-scale", "0.5"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("K = 50"));
}

#[test]
fn synth_is_byte_identical_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let a = lipdream(&["synth", "--steps", "800", "--products", "4", "--seed", "1"], dir.path());
    assert_eq!(a.status.code(), Some(0));
    let path = dir.path().join("synth-prices-1.csv");
    let first = std::fs::read(&path).unwrap();
    lipdream(&["synth", "--steps", "800", "--products", "4", "--seed", "1"], dir.path());
    assert_eq!(std::fs::read(&path).unwrap(), first);
    let text = String::from_utf8(first).unwrap();
    assert_eq!(text.lines().count(), 801);
    assert_eq!(text.lines().next().unwrap(), "t,p1,p2,p3,p4");
    assert!(text.lines().skip(1).all(|l| l.split(',').count() == 5));

    let flat = dir.path().join("flat.csv");
    lipdream(
        &["synth", "--steps", "5", "--products", "2", "--drift", "0.5", "--volatility", "0", "--output", flat.to_str().unwrap()],
        dir.path(),
    );
    let rows: Vec<String> = std::fs::read_to_string(flat).unwrap().lines().skip(1).map(String::from).collect();
    assert_eq!(rows, vec!["0,0,0", "1,0.5,0.5", "2,1,1", "3,1.5,1.5", "4,2,2"]);
}

#[test]
fn in_process_entry_point() {
    let dir = tempfile::tempdir().unwrap();
    let input = bars_file(dir.path(), 12);
    let out = dir.path().join("r.csv");
    let code = lipdream::cli::main_from(["lipdream", "run", "--input", &input, "--output", out.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(std::fs::read_to_string(out).unwrap().starts_with("step,action,"));
}
