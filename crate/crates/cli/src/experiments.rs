//! One function per experiment kind. Each returns the report, the files to
//! write under the output directory and a few headline numbers for sweeps.

use std::fmt::Write as _;

use serde_json::{json, Value};
use spdelab::evolution::{
    solve_ensemble, stability_experiment, EstimateReport, NoiseModel, Retention, SchemeOptions, WeightProcess,
};
use spdelab::spde::{
    assemble, gaussian_benchmark, l2_report, l2_weight, lp_report, lp_weight, mollify_problem, w12_report, w12_weight,
    w1p_report, w1p_weight, Assembly,
};
use spdelab::Order;

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::RunError;
use crate::problem::{assembly_options, build_triple, weight_constants, SpdeSetup};
use crate::suites::{ito_suite, morrey_suite, resolvent_suite, SuiteReport};

#[derive(Clone, Debug, Default)]
pub struct Outcome {
    pub report: Value,
    /// relative path and contents
    pub files: Vec<(String, Vec<u8>)>,
    pub headline: Vec<(String, f64)>,
    pub diverged: usize,
    pub paths: usize,
}

impl Outcome {
    fn with_report(report: Value) -> Self {
        Self { report, ..Self::default() }
    }

    fn file(mut self, name: &str, contents: impl Into<Vec<u8>>) -> Self {
        self.files.push((name.into(), contents.into()));
        self
    }

    fn headline(mut self, name: &str, value: f64) -> Self {
        self.headline.push((name.into(), value));
        self
    }
}

pub fn execute(cfg: &ExperimentConfig) -> Result<Outcome, RunError> {
    cfg.validate()?;
    match cfg.kind {
        ExperimentKind::ResolventSuite => {
            let triple = build_triple(&cfg.triple)?;
            Ok(suite_outcome(resolvent_suite(&triple, &cfg.resolvent)?))
        }
        ExperimentKind::MorreySuite => Ok(suite_outcome(morrey_suite(&cfg.morrey)?)),
        ExperimentKind::ItoSuite => {
            let (suite, table) = ito_suite(&cfg.ito)?;
            let mut csv = String::from("dt,mean_max_residual\n");
            for (dt, r) in &table {
                writeln!(csv, "{dt:.12e},{r:.12e}").unwrap();
            }
            let headline = table[0].1;
            Ok(suite_outcome(suite).file("ito_residuals.csv", csv).headline("mean_max_residual", headline))
        }
        ExperimentKind::Energy | ExperimentKind::Lp | ExperimentKind::W1p => estimate(cfg),
        ExperimentKind::Stability => stability(cfg),
        ExperimentKind::GaussianBenchmark => gaussian(cfg),
        ExperimentKind::Sweep => Err(RunError::Config("a sweep config is run through the sweep driver".into())),
    }
}

fn suite_outcome(suite: SuiteReport) -> Outcome {
    let failed = suite.checks.iter().filter(|c| !c.passed).count();
    let csv = suite.to_csv();
    Outcome::with_report(serde_json::to_value(&suite).expect("suite serializes"))
        .file("checks.csv", csv)
        .headline("failed_checks", failed as f64)
}

fn pretty(v: &Value) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("json");
    s.push('\n');
    s.into_bytes()
}

fn report_headline(out: Outcome, r: &EstimateReport) -> Outcome {
    out.headline("lhs", r.lhs).headline("rhs", r.rhs).headline("ratio", r.ratio.unwrap_or(f64::NAN))
}

fn estimate(cfg: &ExperimentConfig) -> Result<Outcome, RunError> {
    let mut cfg = cfg.clone();
    if cfg.kind == ExperimentKind::W1p {
        cfg.problem.derivatives = true;
    }
    if cfg.kind != ExperimentKind::Energy && cfg.triple.order != 1 {
        return Err(RunError::Config("the L_p and W1_p estimates run on an order-1 triple".into()));
    }
    let setup = SpdeSetup::from_config(&cfg)?;
    let asm = assemble(&setup.triple, &setup.coefficients, &setup.forcing, &assembly_options(&cfg.estimate))?;
    let problem = asm.problem(setup.initial.clone())?;
    let noise = NoiseModel::new(setup.coefficients.channels, cfg.noise.dt, cfg.noise.t_final, cfg.noise.seed)?;
    let keep_all = cfg.kind != ExperimentKind::Energy || cfg.report.dump_states;
    let retention = if keep_all { Retention::All } else { Retention::Endpoints };
    let ensemble = solve_ensemble(&problem, &noise, cfg.noise.n_paths, SchemeOptions::default().retain(retention))?;
    let consts = weight_constants(&cfg.estimate);
    let c = &setup.coefficients;
    let (dt, steps) = (noise.dt, noise.steps);
    let p = cfg.estimate.p;
    let diverged = ensemble.diverged();
    let completed = ensemble.completed().count();
    let (weights, report): (WeightProcess, Option<EstimateReport>) = match (cfg.kind, setup.triple.order()) {
        (ExperimentKind::Energy, Order::One) => {
            let w = l2_weight(c, &consts, dt, steps)?;
            let r = (completed > 0).then(|| l2_report(&ensemble, &setup.triple, &setup.forcing, &w)).transpose()?;
            (w, r)
        }
        (ExperimentKind::Energy, Order::Two) => {
            let w = w12_weight(c, &consts, dt, steps)?;
            let r = (completed > 0).then(|| w12_report(&ensemble, &setup.triple, &setup.forcing, &w)).transpose()?;
            (w, r)
        }
        (ExperimentKind::Lp, _) => {
            let w = lp_weight(c, &consts, dt, steps)?;
            let r = (completed > 0).then(|| lp_report(&ensemble, &setup.triple, &setup.forcing, p, &w)).transpose()?;
            (w, r)
        }
        _ => {
            let w = w1p_weight(c, &consts, dt, steps)?;
            let r = (completed > 0)
                .then(|| w1p_report(&ensemble, &setup.triple, c, &setup.forcing, p, &w))
                .transpose()?;
            (w, r)
        }
    };
    let report_json = json!({
        "kind": cfg.kind,
        "constants": asm.constants,
        "coercivity": asm.coercivity,
        "estimate": report,
        "paths": ensemble.trajectories.len(),
        "diverged_paths": diverged,
    });
    let mut out = Outcome::with_report(report_json);
    out.diverged = diverged;
    out.paths = ensemble.trajectories.len();
    let mut norms = Vec::new();
    ensemble.trajectories[0].write_norm_csv(&mut norms, Some(&weights.phi()))?;
    out = out.file("norms.csv", norms);
    if cfg.report.dump_states {
        let mut states = Vec::new();
        ensemble.trajectories[0].write_states(&mut states, &problem)?;
        out = out.file("states.spdf", states);
    }
    out = out.headline("hat_sum", asm.constants.hats.sum).headline("n0", asm.constants.n0);
    Ok(match &report {
        Some(r) => report_headline(out, r),
        None => out,
    })
}

fn stability(cfg: &ExperimentConfig) -> Result<Outcome, RunError> {
    let setup = SpdeSetup::from_config(cfg)?;
    let options = assembly_options(&cfg.estimate);
    let build = |asm: Assembly, initial: Vec<f64>| asm.problem(initial);
    let base_asm = assemble(&setup.triple, &setup.coefficients, &setup.forcing, &options)?;
    let constants = base_asm.constants.clone();
    let base = build(base_asm, setup.initial.clone())?;
    let mut sequence = Vec::with_capacity(cfg.stability.epsilons.len());
    for &eps in &cfg.stability.epsilons {
        let m = mollify_problem(&setup.triple, &setup.coefficients, &setup.forcing, &setup.initial, eps, cfg.stability.p)?;
        let asm = assemble(&setup.triple, &m.coefficients, &m.forcing, &options)?;
        sequence.push(build(asm, m.initial)?);
    }
    let noise = NoiseModel::new(setup.coefficients.channels, cfg.noise.dt, cfg.noise.t_final, cfg.noise.seed)?;
    let table = stability_experiment(
        &base,
        &sequence,
        &noise,
        cfg.noise.n_paths,
        SchemeOptions::default(),
        cfg.stability.tolerance,
    )?;
    let mut csv = String::from("index,epsilon,sup_term,integral_term,distance\n");
    for row in &table.rows {
        let eps = cfg.stability.epsilons[row.index];
        writeln!(csv, "{},{eps:.12e},{:.12e},{:.12e},{:.12e}", row.index, row.sup_term, row.integral_term, row.distance)
            .unwrap();
    }
    let last = table.rows.last().map_or(f64::NAN, |r| r.distance);
    let worst_ratio =
        table.rows.windows(2).map(|w| w[1].distance / w[0].distance).fold(f64::NAN, |a: f64, b| a.max(b));
    let report = json!({
        "kind": cfg.kind,
        "constants": constants,
        "epsilons": cfg.stability.epsilons,
        "table": table,
    });
    let mut out = Outcome::with_report(report)
        .file("stability.csv", csv)
        .headline("distance", last)
        .headline("worst_ratio", worst_ratio)
        .headline("decreasing", if table.decreasing { 1.0 } else { 0.0 });
    out.diverged = table.excluded_paths;
    out.paths = table.n_paths;
    Ok(out)
}

fn gaussian(cfg: &ExperimentConfig) -> Result<Outcome, RunError> {
    let r = gaussian_benchmark(&cfg.gaussian)?;
    let mut samples = String::from("t,l2_sq,l2_sq_exact,l2_rel_error,gradient_sq,gradient_sq_exact,gradient_rel_error\n");
    for s in &r.samples {
        writeln!(
            samples,
            "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
            s.t, s.l2_sq, s.l2_sq_exact, s.l2_rel_error, s.gradient_sq, s.gradient_sq_exact, s.gradient_rel_error
        )
        .unwrap();
    }
    let mut ladder = String::from("grid,dt,residual\n");
    for l in &r.weak_ladder {
        writeln!(ladder, "{},{:.12e},{:.12e}", l.grid, l.dt, l.residual).unwrap();
    }
    let worst = r.samples.iter().map(|s| s.l2_rel_error.max(s.gradient_rel_error)).fold(0.0, f64::max);
    let finest = r.weak_ladder.last().map_or(f64::NAN, |l| l.residual);
    Ok(Outcome::with_report(serde_json::to_value(&r).expect("report serializes"))
        .file("samples.csv", samples)
        .file("weak_ladder.csv", ladder)
        .headline("worst_norm_error", worst)
        .headline("l2_power_fit", r.l2_power_fit)
        .headline("gradient_power_fit", r.gradient_power_fit)
        .headline("finest_weak_residual", finest)
        .headline("sharpness_lhs", r.sharpness.lhs))
}

/// Adds `report.json` in front of the other files.
pub fn finish(mut out: Outcome) -> Outcome {
    let report = pretty(&out.report);
    out.files.insert(0, ("report.json".into(), report));
    out
}
