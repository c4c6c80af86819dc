use std::path::Path;
use std::process::{Command, Output};

fn beamtrack(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_beamtrack"))
        .args(args)
        .current_dir(dir)
        .env_remove("RUST_BACKTRACE")
        .env_remove("RUST_LIB_BACKTRACE")
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Vec<u8> {
    let out = beamtrack(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out.stdout
}

fn fail(dir: &Path, args: &[&str]) -> String {
    let out = beamtrack(dir, args);
    assert!(!out.status.success(), "{args:?} should fail");
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// A two-second drive keeps every verb fast.
const SHORT: &str = "[scenario]\ntotal_time = 2.0\nphases = [[2.0, 0.0]]\ninitial_acceleration = 0.0\n\
[agent]\nhidden_units = 20\nepisodes = 3\n[tracker]\nparticles = 100\n";

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("short.toml"), SHORT).unwrap();
    dir
}

#[test]
fn emit_defaults_parses_back() {
    let dir = setup();
    let d = dir.path();
    ok(d, &["emit-defaults", "--out", "defaults.toml"]);
    let text = std::fs::read_to_string(d.join("defaults.toml")).unwrap();
    assert!(text.contains("[experiment]") && text.contains("gamma = 0.9"));
    assert_eq!(ok(d, &["emit-defaults"]), text.as_bytes());
    ok(d, &["--config", "defaults.toml", "run", "--out", "rows.csv"]);
}

#[test]
fn run_and_sweep_are_byte_identical() {
    let dir = setup();
    let d = dir.path();
    let a = ok(d, &["--config", "short.toml", "--seed", "4", "run"]);
    let b = ok(d, &["--config", "short.toml", "--seed", "4", "run", "--jobs", "1"]);
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("schema_version,mode,source,"));
    assert_eq!(text.lines().count(), 2);

    std::fs::write(
        d.join("sweep.toml"),
        format!("{SHORT}[experiment]\nmode = \"pf\"\nseeds = [1, 2]\n[sweep]\ntracking_interval = [0.05, 0.1]\n"),
    )
    .unwrap();
    ok(d, &["--config", "sweep.toml", "sweep", "--out", "a.csv", "--plot", "a.tsv", "--jobs", "2"]);
    ok(d, &["--config", "sweep.toml", "sweep", "--out", "b.csv", "--plot", "b.tsv", "--jobs", "1"]);
    let read = |f: &str| std::fs::read(d.join(f)).unwrap();
    assert_eq!(read("a.csv"), read("b.csv"));
    assert_eq!(read("a.tsv"), read("b.tsv"));
    assert_eq!(String::from_utf8(read("a.csv")).unwrap().lines().count(), 5);
    assert_eq!(String::from_utf8(read("a.tsv")).unwrap().lines().count(), 4);
}

#[test]
fn train_eval_round_trip() {
    let dir = setup();
    let d = dir.path();
    ok(d, &["--config", "short.toml", "--seed", "2", "train", "--out", "log1.csv", "--checkpoint", "actor.btnn"]);
    ok(d, &["--config", "short.toml", "--seed", "2", "train", "--out", "log2.csv"]);
    let log = std::fs::read_to_string(d.join("log1.csv")).unwrap();
    assert_eq!(log, std::fs::read_to_string(d.join("log2.csv")).unwrap());
    assert!(log.starts_with("episode,steps,ep_packet,ep_reward,avg_delay_ms,wall_seconds\n"));
    assert_eq!(log.lines().count(), 4);

    let a = ok(d, &["--config", "short.toml", "eval", "--checkpoint", "actor.btnn"]);
    let b = ok(d, &["--config", "short.toml", "eval", "--checkpoint", "actor.btnn"]);
    assert_eq!(a, b);
    assert!(String::from_utf8(a).unwrap().lines().nth(1).unwrap().starts_with("1,ddpg-eval,"));

    let timed = ok(d, &["--config", "short.toml", "train", "--timing"]);
    let row = String::from_utf8(timed).unwrap().lines().nth(1).unwrap().to_string();
    assert!(!row.ends_with(','), "{row}");
}

#[test]
fn gen_trace_feeds_a_run() {
    let dir = setup();
    let d = dir.path();
    let a = ok(d, &["--config", "short.toml", "--seed", "9", "gen-trace", "--spacing", "1.0"]);
    let b = ok(d, &["--config", "short.toml", "--seed", "9", "gen-trace", "--spacing", "1.0", "--out", "t.csv"]);
    assert!(b.is_empty());
    assert_eq!(a, std::fs::read(d.join("t.csv")).unwrap());
    let rows = ok(d, &["--config", "short.toml", "run"]);
    std::fs::write(d.join("trace.toml"), format!("{SHORT}[experiment]\nsource = \"trace:t.csv\"\n")).unwrap();
    let traced = String::from_utf8(ok(d, &["--config", "trace.toml", "run"])).unwrap();
    assert!(traced.lines().nth(1).unwrap().contains(",trace:t.csv,"));
    assert_ne!(rows, traced.as_bytes());
}

#[test]
fn config_errors_name_key_and_line() {
    let dir = setup();
    let d = dir.path();
    std::fs::write(d.join("bad.toml"), "[agent]\nepisodes = 3\ngamma = 1.5\n").unwrap();
    let err = fail(d, &["--config", "bad.toml", "run"]);
    assert!(err.contains("line 3") && err.contains("agent.gamma"), "{err}");

    std::fs::write(d.join("typo.toml"), "[channel]\nn_rr = 8\n").unwrap();
    let err = fail(d, &["--config", "typo.toml", "run"]);
    assert!(err.contains("line 2") && err.contains("n_rr"), "{err}");

    let err = fail(d, &["--config", "missing.toml", "run"]);
    assert!(err.contains("missing.toml"), "{err}");

    let out = Command::new(env!("CARGO_BIN_EXE_beamtrack"))
        .args(["run"])
        .current_dir(d)
        .env("BEAMTRACK_CHANNEL_RHO", "2.0")
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("BEAMTRACK_CHANNEL_RHO"));

    let err = fail(d, &["eval"]);
    assert!(err.contains("checkpoint"), "{err}");
}

#[test]
fn env_override_changes_rows() {
    let dir = setup();
    let d = dir.path();
    let out = Command::new(env!("CARGO_BIN_EXE_beamtrack"))
        .args(["--config", "short.toml", "run"])
        .current_dir(d)
        .env("BEAMTRACK_CHANNEL_N_R", "8")
        .env("BEAMTRACK_CHANNEL_N_T", "8")
        .output()
        .unwrap();
    assert!(out.status.success());
    let row = String::from_utf8(out.stdout).unwrap();
    assert_eq!(row.lines().nth(1).unwrap().split(',').nth(7), Some("8"));
}
