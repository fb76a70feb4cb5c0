//! Config-driven experiment runner for the spdelab library.

pub mod config;
pub mod error;
pub mod experiments;
pub mod manifest;
pub mod problem;
pub mod suites;

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

pub use config::{ExperimentConfig, ExperimentKind};
pub use error::RunError;
pub use experiments::{execute, Outcome};
pub use manifest::{FileRecord, RunManifest};

/// Result of a `run` or `sweep` invocation after everything is on disk.
#[derive(Debug)]
pub struct RunSummary {
    pub output: PathBuf,
    pub manifest: RunManifest,
    pub outcome: Outcome,
}

fn seed_of(cfg: &ExperimentConfig) -> u64 {
    match cfg.kind {
        ExperimentKind::ItoSuite => cfg.ito.seed,
        ExperimentKind::ResolventSuite => cfg.resolvent.seed,
        ExperimentKind::GaussianBenchmark => cfg.gaussian.seed,
        _ => cfg.noise.seed,
    }
}

fn kind_name(kind: ExperimentKind) -> String {
    serde_json::to_value(kind).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default()
}

fn finish_run(
    dir: &Path,
    cfg: &ExperimentConfig,
    config_bytes: &[u8],
    started: (u64, Instant),
    result: Result<Outcome, RunError>,
) -> Result<RunSummary, RunError> {
    std::fs::create_dir_all(dir).map_err(|e| RunError::io(dir, e))?;
    let (outcome, error) = match result {
        Ok(o) => {
            let err = (o.diverged > 0).then_some(RunError::Diverged { diverged: o.diverged, total: o.paths });
            (experiments::finish(o), err)
        }
        Err(e) => (Outcome::default(), Some(e)),
    };
    let files = outcome
        .files
        .iter()
        .map(|(name, bytes)| manifest::write_file(dir, name, bytes))
        .collect::<Result<Vec<_>, _>>()?;
    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").into(),
        kind: kind_name(cfg.kind),
        config_sha256: manifest::sha256_hex(config_bytes),
        seed: seed_of(cfg),
        workers: rayon::current_num_threads(),
        started_unix: started.0,
        finished_unix: manifest::unix_now(),
        wall_clock_seconds: started.1.elapsed().as_secs_f64(),
        exit_code: error.as_ref().map_or(0, RunError::exit_code),
        error: error.as_ref().map(ToString::to_string),
        files,
    };
    manifest.write(dir)?;
    match error {
        Some(e) => Err(e),
        None => Ok(RunSummary { output: dir.to_path_buf(), manifest, outcome }),
    }
}

/// Runs one config file; a `sweep` config dispatches to [`sweep`].
pub fn run(config_path: &Path) -> Result<RunSummary, RunError> {
    let (cfg, bytes) = ExperimentConfig::load(config_path)?;
    cfg.validate()?;
    if cfg.kind == ExperimentKind::Sweep {
        let s = cfg.sweep.clone().expect("validated");
        return sweep_into(&s.base, &s.param, &s.values, &cfg.output, &bytes);
    }
    let started = (manifest::unix_now(), Instant::now());
    let result = execute(&cfg);
    finish_run(&cfg.output, &cfg, &bytes, started, result)
}

/// Runs the base config once per value of `param`, in parallel, into
/// `<output>/sweep-<param>`.
pub fn sweep(base: &Path, param: &str, values: &[f64]) -> Result<RunSummary, RunError> {
    let (cfg, bytes) = ExperimentConfig::load(base)?;
    let dir = cfg.output.join(format!("sweep-{param}"));
    sweep_into(base, param, values, &dir, &bytes)
}

fn sweep_into(base: &Path, param: &str, values: &[f64], dir: &Path, hashed: &[u8]) -> Result<RunSummary, RunError> {
    let started = (manifest::unix_now(), Instant::now());
    let (cfg, _) = ExperimentConfig::load(base)?;
    if cfg.kind == ExperimentKind::Sweep {
        return Err(RunError::Config("a sweep cannot use another sweep as its base".into()));
    }
    if values.is_empty() {
        return Err(RunError::Config("sweep: no values given".into()));
    }
    let points: Vec<ExperimentConfig> = values
        .iter()
        .map(|&v| {
            let mut c = cfg.clone();
            c.apply_param(param, v)?;
            c.validate()?;
            Ok(c)
        })
        .collect::<Result<_, RunError>>()?;
    let results: Vec<Result<Outcome, RunError>> = points.par_iter().map(execute).collect();
    let result = collect_sweep(param, values, results);
    finish_run(dir, &cfg, hashed, started, result)
}

fn collect_sweep(param: &str, values: &[f64], results: Vec<Result<Outcome, RunError>>) -> Result<Outcome, RunError> {
    let columns: Vec<String> = results
        .iter()
        .find_map(|r| r.as_ref().ok())
        .map(|o| o.headline.iter().map(|(n, _)| n.clone()).collect())
        .unwrap_or_default();
    let mut csv = format!("{param},exit_code");
    for c in &columns {
        csv.push(',');
        csv.push_str(c);
    }
    csv.push('\n');
    let mut out = Outcome::default();
    let mut points = Vec::new();
    for (i, (v, r)) in values.iter().zip(results).enumerate() {
        let code = match &r {
            Ok(o) if o.diverged > 0 => 3,
            Ok(_) => 0,
            Err(e) => e.exit_code(),
        };
        csv.push_str(&format!("{v},{code}"));
        match r {
            Ok(o) => {
                for c in &columns {
                    let x = o.headline.iter().find(|(n, _)| n == c).map_or(f64::NAN, |(_, x)| *x);
                    csv.push_str(&format!(",{x:.12e}"));
                }
                out.diverged += o.diverged;
                out.paths += o.paths;
                let o = experiments::finish(o);
                for (name, bytes) in o.files {
                    out.files.push((format!("point_{i:03}/{name}"), bytes));
                }
                points.push(serde_json::json!({ "value": v, "exit_code": code, "report": o.report }));
            }
            Err(e) => {
                for _ in &columns {
                    csv.push_str(",nan");
                }
                points.push(serde_json::json!({ "value": v, "exit_code": code, "error": e.to_string() }));
            }
        }
        csv.push('\n');
    }
    out.files.push(("sweep.csv".into(), csv.into_bytes()));
    out.report = serde_json::json!({ "param": param, "points": points });
    Ok(out)
}

/// Exit code of a sweep: the worst point, or 0.
pub fn sweep_exit_code(summary: &RunSummary) -> i32 {
    summary.outcome.report["points"]
        .as_array()
        .map(|ps| ps.iter().filter_map(|p| p["exit_code"].as_i64()).max().unwrap_or(0) as i32)
        .unwrap_or(0)
}

/// Sizes the global thread pool from `SPDELAB_WORKERS` when set.
pub fn init_workers() -> Result<(), RunError> {
    if let Ok(v) = std::env::var("SPDELAB_WORKERS") {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|n| *n > 0)
            .ok_or_else(|| RunError::Config(format!("SPDELAB_WORKERS must be a positive integer, got {v:?}")))?;
        // a second initialization in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}
