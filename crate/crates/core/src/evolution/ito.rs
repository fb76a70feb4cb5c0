//! Discrete residual of the Itô formula for `|u_t|²_H`.
//!
//! Along a computed path the residual is
//! `R_n = |u_n|²_H − |u_0|²_H − Σ_{j<n} [2⟨u_j, D_j⟩dt + 2(u_j, Δm_j)_H + q_j]`
//! with `D_j` the drift actually used by the scheme on step `j`, `Δm_j` the
//! martingale increment, and `q_j` either its realized square `|Δm_j|²_H` or
//! the predictable bracket `Σ_k |M^k_j|²_H dt`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::operators::EvolutionProblem;
use crate::evolution::solver::{add, wiener_path, SchemeOptions, Stepper, Trajectory};
use crate::field::StepContext;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Bracket {
    Realized,
    Predictable,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ItoResidual {
    /// `R_n` for `n = 0..=N`
    pub series: Vec<f64>,
    pub max_abs: f64,
}

/// Requires a trajectory retaining every state.
pub fn ito_residual(traj: &Trajectory, problem: &EvolutionProblem, bracket: Bracket) -> Result<ItoResidual> {
    let steps = traj.steps();
    for n in 0..=steps {
        if traj.state(n).is_none() {
            return Err(Error::Config(format!("the Itô residual needs every state; step {n} was not retained")));
        }
    }
    let tr = &problem.triple;
    let k = traj.channels;
    let stepper = Stepper::new(problem, traj.dt, SchemeOptions::default());
    let wiener = wiener_path(&traj.increments, k);
    let u0 = traj.state(0).unwrap();
    let base = tr.h_norm_sq(u0);
    let mut acc = 0.0;
    let mut series = vec![0.0];
    for n in 0..steps {
        let u = traj.state(n).unwrap();
        let next = traj.state(n + 1).unwrap();
        let w = if k == 0 { &[][..] } else { &wiener[n * k..(n + 1) * k] };
        let ctx = StepContext { t: n as f64 * traj.dt, step: n, wiener: w };
        let (mut drift, _) = stepper.explicit_drift(&ctx, u);
        add(&mut drift, 1.0, &problem.ops.principal.at(&ctx).apply(next));
        acc += 2.0 * tr.l2_inner(u, &drift) * traj.dt;
        if k > 0 {
            let dw = &traj.increments[n * k..(n + 1) * k];
            let dm = stepper.noise_term(&ctx, u, dw);
            acc += 2.0 * tr.l2_inner(u, &dm);
            acc += match bracket {
                Bracket::Realized => tr.represented_h_norm_sq(&dm),
                Bracket::Predictable => {
                    let mut q = 0.0;
                    let mut unit = vec![0.0; k];
                    for c in 0..k {
                        unit[c] = 1.0;
                        q += tr.represented_h_norm_sq(&stepper.noise_term(&ctx, u, &unit));
                        unit[c] = 0.0;
                    }
                    q * traj.dt
                }
            };
        }
        series.push(tr.h_norm_sq(next) - base - acc);
    }
    let max_abs = series.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    Ok(ItoResidual { series, max_abs })
}
