//! End-to-end tests of the `qme` binary and the config layer.

use std::path::Path;
use std::process::{Command, Output};

// The config types live in the binary crate; compile the module into the
// test so the round-trip test exercises the production parse + validate path.
#[path = "../src/config.rs"]
#[allow(dead_code)]
mod config;

fn qme() -> Command {
    Command::new(env!("CARGO_BIN_EXE_qme"))
}

fn run_ok(args: &[&str]) -> Output {
    let out = qme().args(args).output().expect("spawn qme");
    assert!(
        out.status.success(),
        "qme {:?} failed:\nstdout: {}\nstderr: {}",
        args,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

const TRAJ_CONFIG: &str = r#"
[model]
kind = "xxz"
l = 2
j = 1.0
delta = 0.7
h = 1.0

[[baths]]
site = 0
operator = "sx"
family = "ohmic"
gamma = 0.25
temperature = 2.2

[method]
kind = "local-lindblad"
order = 1

[run]
initial_state = "all-up"
t_max = 2.0
n_points = 6
n_traj = 1
observables = ["sz"]
record_jumps = true

[output]
stem = "traj"
"#;

#[test]
fn config_round_trip_is_identity() {
    let parsed = config::ExperimentConfig::parse(TRAJ_CONFIG).expect("initial parse");
    let serialized = toml::to_string(&parsed).expect("serialize");
    let reparsed = config::ExperimentConfig::parse(&serialized).expect("reparse");
    assert_eq!(parsed, reparsed);
}

#[test]
fn trajectories_fixed_seed_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "traj.toml", TRAJ_CONFIG);
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    std::fs::create_dir_all(&out_a).unwrap();
    std::fs::create_dir_all(&out_b).unwrap();
    run_ok(&[
        "trajectories",
        "--config",
        &cfg,
        "--seed",
        "7",
        "--out",
        out_a.to_str().unwrap(),
    ]);
    run_ok(&[
        "trajectories",
        "--config",
        &cfg,
        "--seed",
        "7",
        "--out",
        out_b.to_str().unwrap(),
    ]);
    for name in ["traj.csv", "traj_jumps.csv"] {
        let a = std::fs::read(out_a.join(name)).unwrap();
        let b = std::fs::read(out_b.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }
}

#[test]
fn malformed_config_names_the_missing_field() {
    let dir = tempfile::tempdir().unwrap();
    let broken = TRAJ_CONFIG.replace("temperature = 2.2\n", "");
    let cfg = write_config(dir.path(), "broken.toml", &broken);
    let out = qme()
        .args(["steady-state", "--config", &cfg])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "config errors exit with 2");
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.contains("temperature"),
        "error should name the missing field, got: {stderr}"
    );
}

#[test]
fn closed_system_evolution_keeps_purity_constant() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_text = r#"
[model]
kind = "xxz"
l = 2
j = 1.0
delta = 0.7
h = 1.0

[method]
kind = "exact-redfield"

[run]
initial_state = "x-polarized"
t_max = 5.0
n_points = 11
observables = ["sz", "purity"]

[output]
stem = "closed"
"#;
    let cfg = write_config(dir.path(), "closed.toml", cfg_text);
    run_ok(&["evolve", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    let text = std::fs::read_to_string(dir.path().join("closed.csv")).unwrap();
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let pcol = header
        .iter()
        .position(|c| *c == "purity")
        .expect("purity column");
    let mut count = 0;
    for line in lines {
        let v: f64 = line.split(',').nth(pcol).unwrap().parse().unwrap();
        assert!(
            (v - 1.0).abs() < 1e-6,
            "purity drifted to {v} in a closed system"
        );
        count += 1;
    }
    assert_eq!(count, 11);
}
