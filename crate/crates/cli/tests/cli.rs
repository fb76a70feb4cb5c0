use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use spdelab_cli::RunManifest;

const SMALL_ENERGY: &str = r#"
kind = "energy"
output = "out"
[triple]
grid = 16
[noise]
dt = 0.05
t_final = 0.5
n_paths = 4
seed = 9
[problem]
noise = 0.5
"#;

fn spdelab(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spdelab")).args(args).current_dir(cwd).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn manifest(dir: &Path) -> RunManifest {
    serde_json::from_slice(&std::fs::read(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn validate_accepts_every_shipped_config() {
    let configs = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(&configs).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let out = spdelab(&["validate", path.to_str().unwrap()], &configs);
            assert!(out.status.success(), "{}: {}", path.display(), String::from_utf8_lossy(&out.stderr));
            seen += 1;
        }
    }
    assert!(seen >= 8);
}

#[test]
fn run_writes_report_tables_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "e.toml", SMALL_ENERGY);
    let out = spdelab(&["run", "e.toml"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("ratio = "));

    let run_dir = dir.path().join("out");
    let m = manifest(&run_dir);
    assert_eq!((m.kind.as_str(), m.seed, m.exit_code), ("energy", 9, 0));
    let names: Vec<&str> = m.files.iter().map(|f| f.path.as_str()).collect();
    assert_eq!(names, ["report.json", "norms.csv"]);
    for f in &m.files {
        let bytes = std::fs::read(run_dir.join(&f.path)).unwrap();
        assert_eq!(spdelab_cli::manifest::sha256_hex(&bytes), f.sha256);
    }
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(run_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["estimate"]["n_paths"], 4);
}

#[test]
fn sweep_runs_one_point_per_value() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "e.toml", SMALL_ENERGY);
    let out = spdelab(&["sweep", "e.toml", "--param", "seed", "--values", "1,2,3"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    let sweep_dir = dir.path().join("out/sweep-seed");
    let csv = std::fs::read_to_string(sweep_dir.join("sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert!(lines[0].starts_with("seed,exit_code,"));
    assert_eq!(lines.len(), 4);
    for i in 0..3 {
        assert!(sweep_dir.join(format!("point_{i:03}/report.json")).exists());
    }
}

#[test]
fn malformed_config_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "bad.toml", "kind = \"energy\"\nbogus = 1\n");
    let out = spdelab(&["run", "bad.toml"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("bogus") && msg.contains("line 2"), "{msg}");
}

#[test]
fn unknown_sweep_parameter_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "e.toml", SMALL_ENERGY);
    let out = spdelab(&["sweep", "e.toml", "--param", "colour", "--values", "1"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn gate_refusal_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"
kind = "energy"
[triple]
dim = 3
grid = 8
box_length = 4.0
[noise]
dt = 0.05
t_final = 0.1
n_paths = 2
[problem]
noise = 0.3
[problem.drift]
profile = "inverse-distance"
amplitude = 3.0
"#;
    write_config(dir.path(), "gate.toml", text);
    let out = spdelab(&["run", "gate.toml"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("gate"));
    let m = manifest(&dir.path().join("out"));
    assert_eq!(m.exit_code, 2);
    assert!(m.files.is_empty());
}

#[test]
fn divergence_exits_with_three_and_keeps_partial_output() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"
kind = "energy"
[triple]
grid = 16
[noise]
dt = 0.1
t_final = 2.0
n_paths = 2
[problem]
reaction = 1.0e6
[estimate]
gate = false
"#;
    write_config(dir.path(), "blow.toml", text);
    let out = spdelab(&["run", "blow.toml"], dir.path());
    assert_eq!(out.status.code(), Some(3));
    let m = manifest(&dir.path().join("out"));
    assert_eq!(m.exit_code, 3);
    assert!(m.error.unwrap().contains("diverged"));
    assert!(dir.path().join("out/report.json").exists());
}

#[test]
fn outputs_other_than_the_manifest_are_reproducible() {
    let read = || {
        let dir = tempfile::tempdir().unwrap();
        write_config(dir.path(), "e.toml", SMALL_ENERGY);
        assert!(spdelab(&["run", "e.toml"], dir.path()).status.success());
        ["report.json", "norms.csv"].map(|f| std::fs::read(dir.path().join("out").join(f)).unwrap())
    };
    assert_eq!(read(), read());
}

#[test]
fn worker_count_is_validated() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "e.toml", SMALL_ENERGY);
    let out = Command::new(env!("CARGO_BIN_EXE_spdelab"))
        .args(["run", "e.toml"])
        .env("SPDELAB_WORKERS", "zero")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}
