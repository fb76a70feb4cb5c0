//! Semi-implicit Euler–Maruyama time stepping.
//!
//! One step solves
//! `(M_H − dt·A_{t_n}) u_{n+1} = M_H u_n + dt·(𝔞 + 𝔞* + 𝔠)u_n + dt·(f* + f + g)
//!   + Σ_k (B^k u_n + 𝔟^k u_n + h^k) ΔW^k_n`
//! in representative form, where `M_H` is the Riesz map of `H`.

use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::gmres::gmres;
use crate::evolution::operators::{DataNorms, EvolutionProblem, FrozenDual};
use crate::field::{write_fields, Field, StepContext};

/// Which states a trajectory keeps in memory.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Retention {
    All,
    Every(usize),
    Endpoints,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchemeOptions {
    /// relative residual of the inner linear solve
    pub tolerance: f64,
    pub restart: usize,
    pub max_iterations: usize,
    /// paths whose `|u|_H` exceeds this are stopped and flagged
    pub divergence_threshold: f64,
    pub retention: Retention,
}

impl Default for SchemeOptions {
    fn default() -> Self {
        Self { tolerance: 1e-10, restart: 40, max_iterations: 400, divergence_threshold: 1e12, retention: Retention::Endpoints }
    }
}

impl SchemeOptions {
    pub fn retain(mut self, retention: Retention) -> Self {
        self.retention = retention;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum PathStatus {
    Completed,
    /// the state after `step` was non-finite or above the guard
    Diverged { step: usize },
}

/// One simulated path.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub path: u64,
    pub dt: f64,
    pub channels: usize,
    /// `|u_n|²_H` for the steps reached, starting at `n = 0`
    pub h_norm_sq: Vec<f64>,
    /// `|u_n|²_V`, same indexing
    pub v_norm_sq: Vec<f64>,
    /// data norms on step `n`, evaluated at `t_n`
    pub data: Vec<DataNorms>,
    /// `ΔW^k_n` at `n·K + k`
    pub increments: Vec<f64>,
    /// retained `(step, u_step)`
    pub states: Vec<(usize, Vec<f64>)>,
    pub status: PathStatus,
    pub inner_iterations: usize,
}

impl Trajectory {
    pub fn is_completed(&self) -> bool {
        self.status == PathStatus::Completed
    }

    /// Number of steps taken.
    pub fn steps(&self) -> usize {
        self.h_norm_sq.len() - 1
    }

    pub fn state(&self, step: usize) -> Option<&[f64]> {
        self.states.iter().find(|(n, _)| *n == step).map(|(_, u)| u.as_slice())
    }

    pub fn final_state(&self) -> &[f64] {
        &self.states.last().expect("initial state is always retained").1
    }

    /// Accumulated Wiener values at every step, `W^k(t_n)` at `n·K + k`.
    pub fn wiener_path(&self) -> Vec<f64> {
        wiener_path(&self.increments, self.channels)
    }

    /// Norm series as CSV with columns `step,t,h_norm,v_norm,phi`.
    pub fn write_norm_csv<W: Write>(&self, mut out: W, phi: Option<&[f64]>) -> Result<()> {
        writeln!(out, "step,t,h_norm,v_norm,phi")?;
        for n in 0..self.h_norm_sq.len() {
            let p = phi.and_then(|p| p.get(n)).copied().unwrap_or(0.0);
            writeln!(
                out,
                "{n},{:.12e},{:.12e},{:.12e},{:.12e}",
                n as f64 * self.dt,
                self.h_norm_sq[n].sqrt(),
                self.v_norm_sq[n].sqrt(),
                p
            )?;
        }
        Ok(())
    }

    /// Retained states in the binary field format, one slice per state.
    pub fn write_states<W: Write>(&self, out: W, problem: &EvolutionProblem) -> Result<()> {
        let slices: Vec<Field> = self.states.iter().map(|(_, u)| Field::scalar(u.clone())).collect();
        write_fields(out, &problem.triple, &slices)
    }
}

pub(crate) fn wiener_path(increments: &[f64], channels: usize) -> Vec<f64> {
    let steps = if channels == 0 { 0 } else { increments.len() / channels };
    let mut out = vec![0.0; (steps + 1) * channels];
    for n in 0..steps {
        for k in 0..channels {
            out[(n + 1) * channels + k] = out[n * channels + k] + increments[n * channels + k];
        }
    }
    out
}

/// Result of one step.
pub struct StepOutput {
    pub next: Vec<f64>,
    pub data: DataNorms,
    pub iterations: usize,
}

/// Advances states of one problem by single steps; used by the path solver
/// and by experiments that run several problems in lockstep.
pub struct Stepper<'a> {
    problem: &'a EvolutionProblem,
    options: SchemeOptions,
    dt: f64,
}

impl<'a> Stepper<'a> {
    pub fn new(problem: &'a EvolutionProblem, dt: f64, options: SchemeOptions) -> Self {
        Self { problem, options, dt }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Representative of the explicit drift `(𝔞 + 𝔞* + 𝔠)u + f* + M_H(f + g)`
    /// and the data norms at `ctx`.
    pub fn explicit_drift(&self, ctx: &StepContext<'_>, u: &[f64]) -> (Vec<f64>, DataNorms) {
        let p = self.problem;
        let tr = &p.triple;
        let mut acc = vec![0.0; u.len()];
        for op in p.lower.explicit_terms() {
            add(&mut acc, 1.0, &op.at(ctx).apply(u));
        }
        let mut data = DataNorms::default();
        if let Some(f) = &p.forcing.dual {
            let rep = f.eval(ctx);
            let rep = rep.component(0);
            data.dual_sq = tr.dual_norm_sq(rep);
            add(&mut acc, 1.0, rep);
        }
        let mut elements = vec![0.0; u.len()];
        let mut any = false;
        if let Some(f) = &p.forcing.weighted {
            let f = f.eval(ctx);
            data.weighted_sq = tr.h_norm_sq(f.component(0));
            add(&mut elements, 1.0, f.component(0));
            any = true;
        }
        if let Some(g) = &p.forcing.integrable {
            let g = g.eval(ctx);
            data.integrable = tr.h_norm_sq(g.component(0)).sqrt();
            add(&mut elements, 1.0, g.component(0));
            any = true;
        }
        if any {
            add(&mut acc, 1.0, &tr.h_representative(&elements));
        }
        if let Some(h) = &p.forcing.noise {
            let h = h.eval(ctx);
            data.noise_sq = h.components().iter().map(|c| tr.h_norm_sq(c)).sum();
        }
        (acc, data)
    }

    /// Representative of `Σ_k (B^k u + 𝔟^k u + h^k) ΔW^k`.
    pub fn noise_term(&self, ctx: &StepContext<'_>, u: &[f64], dw: &[f64]) -> Vec<f64> {
        let p = self.problem;
        let mut acc = vec![0.0; u.len()];
        if dw.iter().all(|w| *w == 0.0) {
            return acc;
        }
        for (k, ch) in p.ops.noise.at(ctx).apply(u).iter().enumerate() {
            add(&mut acc, dw[k], ch);
        }
        if let Some(b) = &p.lower.noise {
            for (k, ch) in b.at(ctx).apply(u).iter().enumerate() {
                add(&mut acc, dw[k], ch);
            }
        }
        if let Some(h) = &p.forcing.noise {
            let h = h.eval(ctx);
            let mut elements = vec![0.0; u.len()];
            for (k, c) in h.components().iter().enumerate() {
                add(&mut elements, dw[k], c);
            }
            add(&mut acc, 1.0, &p.triple.h_representative(&elements));
        }
        acc
    }

    /// Solves `(M_H − dt·A) x = rhs` for the operator frozen at `ctx`.
    pub fn implicit_solve(&self, ctx: &StepContext<'_>, rhs: &[f64]) -> Result<(Vec<f64>, usize)> {
        let tr = &self.problem.triple;
        let a = self.problem.ops.principal.at(ctx);
        let dt = self.dt;
        if let Some(s) = a.symbol() {
            let mut c = tr.forward(rhs);
            for ((z, wh), s) in c.iter_mut().zip(tr.h_weights()).zip(s) {
                let d = wh - dt * s;
                if d <= 0.0 {
                    return Err(Error::Domain("implicit operator is not positive; reduce the time step".into()));
                }
                *z /= d;
            }
            return Ok((tr.inverse(&c), 0));
        }
        let pre: Vec<f64> = match a.reference_symbol() {
            Some(s) => tr.h_weights().iter().zip(s).map(|(wh, s)| wh - dt * s).collect(),
            None => tr.h_weights().iter().zip(tr.v_weights()).map(|(wh, wv)| wh + dt * wv).collect(),
        };
        let pre: Vec<f64> = pre.iter().zip(tr.h_weights()).map(|(p, wh)| p.max(*wh)).collect();
        let apply = |x: &[f64]| -> Vec<f64> { implicit_apply(tr, a.as_ref(), dt, x) };
        let precond = |y: &[f64]| -> Vec<f64> {
            let mut c: Vec<Complex64> = tr.forward(y);
            for (z, p) in c.iter_mut().zip(&pre) {
                *z /= p;
            }
            tr.inverse(&c)
        };
        let out = gmres(&apply, &precond, rhs, self.options.tolerance, self.options.restart, self.options.max_iterations);
        if out.relative_residual > self.options.tolerance {
            return Err(Error::LinearSolve { step: ctx.step, residual: out.relative_residual });
        }
        Ok((out.solution, out.iterations))
    }

    /// Advances `u_n` by one step with increments `dw` and Wiener state
    /// `wiener = W(t_n)`.
    pub fn step(&self, n: usize, wiener: &[f64], u: &[f64], dw: &[f64]) -> Result<StepOutput> {
        let ctx = StepContext { t: n as f64 * self.dt, step: n, wiener };
        let tr = &self.problem.triple;
        let (explicit, data) = self.explicit_drift(&ctx, u);
        let mut rhs = tr.h_representative(u);
        add(&mut rhs, self.dt, &explicit);
        add(&mut rhs, 1.0, &self.noise_term(&ctx, u, dw));
        let (next, iterations) = self.implicit_solve(&ctx, &rhs)?;
        Ok(StepOutput { next, data, iterations })
    }
}

pub(crate) fn implicit_apply(tr: &crate::SpectralTriple, a: &dyn FrozenDual, dt: f64, x: &[f64]) -> Vec<f64> {
    let mut out = tr.h_representative(x);
    add(&mut out, -dt, &a.apply(x));
    out
}

pub(crate) fn add(acc: &mut [f64], c: f64, x: &[f64]) {
    for (a, b) in acc.iter_mut().zip(x) {
        *a += c * b;
    }
}

/// Solves one path with increments drawn from `noise`.
pub fn solve(
    problem: &EvolutionProblem,
    noise: &super::NoiseModel,
    path: u64,
    options: SchemeOptions,
) -> Result<Trajectory> {
    if noise.channels != problem.channels() {
        return Err(Error::Config(format!(
            "noise has {} channels but the operators use {}",
            noise.channels,
            problem.channels()
        )));
    }
    let increments = noise.path_increments(path);
    solve_with_increments(problem, noise.dt, increments, path, options)
}

/// Solves one path driven by the given increments (`steps·K` values).
pub fn solve_with_increments(
    problem: &EvolutionProblem,
    dt: f64,
    increments: Vec<f64>,
    path: u64,
    options: SchemeOptions,
) -> Result<Trajectory> {
    let k = problem.channels();
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::Domain(format!("time step must be positive, got {dt}")));
    }
    let steps = if k == 0 {
        return Err(Error::Config("use solve_deterministic for problems without noise channels".into()));
    } else {
        if increments.len() % k != 0 {
            return Err(Error::Config("increment count is not a multiple of the channel count".into()));
        }
        increments.len() / k
    };
    run_path(problem, dt, steps, increments, path, options)
}

/// Solves a problem with no Wiener channels.
pub fn solve_deterministic(problem: &EvolutionProblem, dt: f64, steps: usize, options: SchemeOptions) -> Result<Trajectory> {
    if problem.channels() != 0 {
        return Err(Error::Config("problem has noise channels".into()));
    }
    run_path(problem, dt, steps, Vec::new(), 0, options)
}

fn run_path(
    problem: &EvolutionProblem,
    dt: f64,
    steps: usize,
    increments: Vec<f64>,
    path: u64,
    options: SchemeOptions,
) -> Result<Trajectory> {
    let k = problem.channels();
    let tr = &problem.triple;
    let stepper = Stepper::new(problem, dt, options);
    let mut u = problem.initial.clone();
    let (h0, v0) = tr.norms_sq(&u);
    let mut traj = Trajectory {
        path,
        dt,
        channels: k,
        h_norm_sq: vec![h0],
        v_norm_sq: vec![v0],
        data: Vec::with_capacity(steps),
        increments,
        states: vec![(0, u.clone())],
        status: PathStatus::Completed,
        inner_iterations: 0,
    };
    let guard = options.divergence_threshold * options.divergence_threshold;
    let mut wiener = vec![0.0; k];
    for n in 0..steps {
        let dw = &traj.increments[n * k..(n + 1) * k];
        let out = stepper.step(n, &wiener, &u, dw)?;
        for (w, d) in wiener.iter_mut().zip(dw) {
            *w += d;
        }
        traj.data.push(out.data);
        traj.inner_iterations += out.iterations;
        u = out.next;
        let (h, v) = tr.norms_sq(&u);
        traj.h_norm_sq.push(h);
        traj.v_norm_sq.push(v);
        if !(h.is_finite() && v.is_finite()) || h > guard {
            traj.status = PathStatus::Diverged { step: n + 1 };
            break;
        }
        let keep = match options.retention {
            Retention::All => true,
            Retention::Every(m) => (n + 1) % m.max(1) == 0 || n + 1 == steps,
            Retention::Endpoints => n + 1 == steps,
        };
        if keep {
            traj.states.push((n + 1, u.clone()));
        }
    }
    Ok(traj)
}

/// Independent paths `0..n_paths` of one problem.
#[derive(Clone, Debug)]
pub struct Ensemble {
    pub trajectories: Vec<Trajectory>,
    pub dt: f64,
    pub steps: usize,
}

impl Ensemble {
    pub fn completed(&self) -> impl Iterator<Item = &Trajectory> {
        self.trajectories.iter().filter(|t| t.is_completed())
    }

    pub fn diverged(&self) -> usize {
        self.trajectories.iter().filter(|t| !t.is_completed()).count()
    }
}

/// Runs the paths in parallel; the result is ordered by path index.
pub fn solve_ensemble(
    problem: &EvolutionProblem,
    noise: &super::NoiseModel,
    n_paths: usize,
    options: SchemeOptions,
) -> Result<Ensemble> {
    let trajectories = (0..n_paths as u64)
        .into_par_iter()
        .map(|p| solve(problem, noise, p, options))
        .collect::<Result<Vec<_>>>()?;
    Ok(Ensemble { trajectories, dt: noise.dt, steps: noise.steps })
}
