//! Acceptance suite: one line per criterion, nonzero exit if any fails.
//!
//! Runs the configs shipped under `configs/` with their outputs redirected
//! to temporary directories.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use spdelab::evolution::{
    solve_deterministic, EvolutionProblem, ForcingSet, LowerOrderSet, OperatorPair, Retention, SchemeOptions,
    SymbolOperator, ZeroChannels,
};
use spdelab::spde::GaussianReport;
use spdelab::{Order, SpectralTriple};
use spdelab_cli::config::ExperimentConfig;
use spdelab_cli::suites::SuiteReport;
use spdelab_cli::{execute, run, Outcome};

type Verdict = Result<String, String>;

fn config_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn load(name: &str) -> ExperimentConfig {
    ExperimentConfig::load(&config_path(name)).expect("shipped config loads").0
}

fn headline(o: &Outcome, name: &str) -> f64 {
    o.headline.iter().find(|(n, _)| n == name).map(|(_, v)| *v).unwrap_or(f64::NAN)
}

fn sci(values: &[f64]) -> String {
    let parts: Vec<String> = values.iter().map(|v| format!("{v:.2e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn suite(o: &Outcome) -> SuiteReport {
    serde_json::from_value(o.report.clone()).expect("suite report")
}

fn all_checks(s: &SuiteReport) -> Verdict {
    let failed: Vec<String> = s
        .checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| format!("{} = {:.3e} (limit {:.1e})", c.name, c.value, c.threshold))
        .collect();
    if failed.is_empty() {
        Ok(format!("{} checks", s.checks.len()))
    } else {
        Err(failed.join("; "))
    }
}

fn timed(limit: f64, f: impl FnOnce() -> Verdict) -> Verdict {
    let start = Instant::now();
    let v = f()?;
    let secs = start.elapsed().as_secs_f64();
    if secs < limit {
        Ok(format!("{v}, {secs:.2} s"))
    } else {
        Err(format!("{v}, but took {secs:.2} s (limit {limit} s)"))
    }
}

fn resolvent() -> Verdict {
    timed(1.0, || {
        let cfg = load("resolvent.toml");
        assert_eq!((cfg.triple.dim, cfg.triple.grid), (1, 128));
        all_checks(&suite(&execute(&cfg).map_err(|e| e.to_string())?))
    })
}

fn morrey() -> Verdict {
    timed(30.0, || {
        let cfg = load("morrey.toml");
        assert_eq!(cfg.morrey.scaling_grid, 96);
        assert_eq!(cfg.morrey.radii, 4);
        all_checks(&suite(&execute(&cfg).map_err(|e| e.to_string())?))
    })
}

fn ito() -> Verdict {
    timed(10.0, || {
        let cfg = load("ito.toml");
        assert_eq!(cfg.ito.n_paths, 1000);
        assert_eq!(cfg.ito.dts, vec![1e-2, 5e-3]);
        all_checks(&suite(&execute(&cfg).map_err(|e| e.to_string())?))
    })
}

fn heat_exactness() -> Verdict {
    let dt = 1e-3;
    let tr = SpectralTriple::new(1, 64, 2.0 * std::f64::consts::PI, Order::One).map_err(|e| e.to_string())?;
    let ops = OperatorPair::new(Arc::new(SymbolOperator::heat(&tr, 1.0, 0.0)), Arc::new(ZeroChannels(0)), 1.0)
        .map_err(|e| e.to_string())?;
    let u0 = tr.sample(|x| x[0].sin()).into_values();
    let problem = EvolutionProblem::new(&tr, ops, LowerOrderSet::none(), ForcingSet::none(), u0)
        .map_err(|e| e.to_string())?;
    let traj = solve_deterministic(&problem, dt, 1000, SchemeOptions::default().retain(Retention::All))
        .map_err(|e| e.to_string())?;
    let xs = tr.sample(|x| x[0]).into_values();
    let mut worst = 0.0f64;
    for (n, u) in &traj.states {
        let t = *n as f64 * dt;
        for (v, x) in u.iter().zip(&xs) {
            worst = worst.max((v - (-t).exp() * x.sin()).abs());
        }
    }
    let msg = format!("max error {worst:.3e} against 5 dt = {:.1e}", 5.0 * dt);
    if worst <= 5.0 * dt {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn gaussian() -> Verdict {
    let cfg = load("gaussian.toml");
    assert_eq!(cfg.gaussian.dim, 1);
    assert_eq!(cfg.gaussian.times, vec![0.5, 1.0, 2.0]);
    let out = execute(&cfg).map_err(|e| e.to_string())?;
    let r: GaussianReport = serde_json::from_value(out.report).map_err(|e| e.to_string())?;
    let mut bad = Vec::new();
    if !(r.boundary_mass < 1e-8) {
        bad.push(format!("boundary mass {:.2e}", r.boundary_mass));
    }
    let worst = r.samples.iter().map(|s| s.l2_rel_error).fold(0.0, f64::max);
    if !(worst < 1e-4) {
        bad.push(format!("L2 relative error {worst:.2e}"));
    }
    let (e0, e1) = ((r.l2_power_fit - 0.5).abs(), (r.gradient_power_fit + 0.5).abs());
    if !(e0 < 1e-2 && e1 < 1e-2) {
        bad.push(format!("exponent errors {e0:.2e}, {e1:.2e}"));
    }
    let ladder: Vec<f64> = r.weak_ladder.iter().map(|l| l.residual).collect();
    if ladder.len() != 3 || !ladder.windows(2).all(|w| w[1] < w[0]) {
        bad.push(format!("weak ladder {ladder:?}"));
    }
    if !(r.sharpness.lhs > 0.0 && r.sharpness.rhs == 0.0) {
        bad.push(format!("sharpness lhs {} rhs {}", r.sharpness.lhs, r.sharpness.rhs));
    }
    if bad.is_empty() {
        Ok(format!("L2 error {worst:.1e}, exponents off by {e0:.1e}/{e1:.1e}, ladder {}", sci(&ladder)))
    } else {
        Err(bad.join("; "))
    }
}

/// Ratio at the base config and relative changes under each refinement.
fn refinement_study(name: &str, min_paths: usize) -> Verdict {
    let base = load(name);
    if base.noise.n_paths < min_paths {
        return Err(format!("{name} uses {} paths, need {min_paths}", base.noise.n_paths));
    }
    let ratio = |cfg: &ExperimentConfig| -> Result<f64, String> {
        let out = execute(cfg).map_err(|e| e.to_string())?;
        let r = headline(&out, "ratio");
        if r.is_finite() && out.diverged == 0 {
            Ok(r)
        } else {
            Err(format!("ratio {r} with {} diverged paths", out.diverged))
        }
    };
    let r0 = ratio(&base)?;
    let mut lines = vec![format!("ratio {r0:.4}")];
    let mut bad = Vec::new();
    for (param, value, tol) in [
        ("dt", base.noise.dt / 2.0, 0.15),
        ("grid", 2.0 * base.triple.grid as f64, 0.15),
        ("n_paths", 2.0 * base.noise.n_paths as f64, 0.15),
        ("scale", 3.0 * base.problem.scale, 1e-9),
    ] {
        let mut cfg = base.clone();
        cfg.apply_param(param, value).map_err(|e| e.to_string())?;
        let change = (ratio(&cfg)? / r0 - 1.0).abs();
        lines.push(format!("{param} {change:.1e}"));
        if !(change < tol) {
            bad.push(format!("{param} changed the ratio by {change:.3e} (limit {tol:.0e})"));
        }
    }
    if bad.is_empty() {
        Ok(lines.join(", "))
    } else {
        Err(bad.join("; "))
    }
}

fn energy_stability() -> Verdict {
    let cfg = load("energy_singular.toml");
    let out = execute(&cfg).map_err(|e| e.to_string())?;
    let hats = headline(&out, "hat_sum");
    if !(hats > 0.0 && hats <= cfg.estimate.theta && cfg.estimate.gate) {
        return Err(format!("drift hat sum {hats} does not exercise the gate"));
    }
    refinement_study("energy_singular.toml", 100).map(|s| format!("hat sum {hats:.3}, {s}"))
}

fn mollification_stability() -> Verdict {
    let cfg = load("stability.toml");
    assert_eq!(cfg.stability.epsilons, (1..=6).map(|n| 0.5f64.powi(n)).collect::<Vec<_>>());
    let out = execute(&cfg).map_err(|e| e.to_string())?;
    let rows = out.report["table"]["rows"].as_array().cloned().unwrap_or_default();
    let d: Vec<f64> = rows.iter().filter_map(|r| r["distance"].as_f64()).collect();
    let ratios: Vec<f64> = d.windows(2).map(|w| w[1] / w[0]).collect();
    let worst = ratios.iter().copied().fold(0.0, f64::max);
    let msg = format!("D = {}, worst ratio {worst:.3}", sci(&d));
    if d.len() == 6 && d.iter().all(|v| *v > 0.0) && worst <= 0.9 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn lp_and_w1p() -> Verdict {
    let lp = refinement_study("lp.toml", 1)?;
    let w1p = refinement_study("w1p.toml", 1)?;
    for name in ["lp.toml", "w1p.toml"] {
        assert_eq!(load(name).estimate.p, 4.0);
    }
    Ok(format!("L_p: {lp} | W1_p: {w1p}"))
}

fn supercritical() -> Verdict {
    let base = load("probe.toml");
    let kappas = [0.5, 1.0, 1.5, 2.0, 2.5, 3.0];
    let mut ratios = Vec::new();
    for k in kappas {
        let mut cfg = base.clone();
        cfg.apply_param("kappa", k).map_err(|e| e.to_string())?;
        ratios.push(headline(&execute(&cfg).map_err(|e| e.to_string())?, "ratio"));
    }
    let growth = ratios[ratios.len() - 1] / ratios[0];
    let msg = format!("ratios {ratios:.3?}, growth {growth:.1}x");
    if ratios.windows(2).all(|w| w[1] > w[0]) && growth >= 10.0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn output_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().is_some_and(|n| n != "manifest.json") {
                let rel = p.strip_prefix(dir).unwrap().display().to_string();
                out.push((rel, std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn reproducibility() -> Verdict {
    let mut compared = 0;
    for name in ["energy_singular.toml", "gaussian.toml", "ito.toml"] {
        let text = std::fs::read_to_string(config_path(name)).unwrap();
        let mut trees = Vec::new();
        for _ in 0..2 {
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join(name);
            std::fs::write(&path, &text).unwrap();
            let summary = run(&path).map_err(|e| e.to_string())?;
            trees.push(output_files(&summary.output));
        }
        if trees[0].is_empty() || trees[0] != trees[1] {
            return Err(format!("{name}: outputs differ between runs"));
        }
        compared += trees[0].len();
    }
    Ok(format!("{compared} files byte-identical across reruns"))
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 10] = [
        ("resolvent suite", resolvent),
        ("Morrey suite", morrey),
        ("Ito suite", ito),
        ("deterministic heat exactness", heat_exactness),
        ("Gaussian benchmark", gaussian),
        ("energy-estimate stability", energy_stability),
        ("stability under mollification", mollification_stability),
        ("L_p and W1_p estimates", lp_and_w1p),
        ("supercritical probe", supercritical),
        ("reproducibility", reproducibility),
    ];
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let verdict = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        match verdict {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", i + 1),
            Err(detail) => {
                failures += 1;
                println!("criterion {:>2} FAIL  {name}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
