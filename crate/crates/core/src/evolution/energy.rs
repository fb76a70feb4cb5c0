//! Weighted energy estimate for the perturbed equation:
//! `Ê sup_t |u_t|²_H e^{−2φ_t} + Ê∫e^{−2φ}|u|²_V dt + Ê∫α|u|²_H e^{−2φ} dt`
//! against
//! `Ê|u_0|²_H + Ê∫e^{−2φ}(|f*|²_{V*} + α⁻¹|f|²_H + |h|²)dt + Ê(∫e^{−φ}|g|_H dt)²`.

use crate::error::{Error, Result};
use crate::evolution::operators::EvolutionProblem;
use crate::evolution::report::{assemble, EstimateReport, PathTerms};
use crate::evolution::solver::Ensemble;
use crate::evolution::weights::{required_rate, WeightProcess};

pub const LHS_TERMS: [&str; 3] = ["sup_weighted_h", "weighted_v_integral", "alpha_weighted_h_integral"];
pub const RHS_TERMS: [&str; 3] = ["initial_h", "forcing_integral", "integrable_forcing_squared"];

pub fn energy_report(ensemble: &Ensemble, problem: &EvolutionProblem, weights: &WeightProcess) -> Result<EstimateReport> {
    let steps = ensemble.steps;
    if weights.steps() != steps {
        return Err(Error::Config(format!("weight process has {} steps, ensemble {steps}", weights.steps())));
    }
    let dt = ensemble.dt;
    let phi = weights.phi();
    let mut flags = Vec::new();
    let unmet = (0..steps).find(|&n| {
        let req = required_rate(&problem.ops, &problem.lower.bounds, n as f64 * dt);
        weights.alpha(n) < req * (1.0 - 1e-12)
    });
    if let Some(n) = unmet {
        flags.push(format!("hypotheses unmet: weight rate below the lower-order requirement at step {n}"));
    }
    let mut paths = Vec::new();
    let mut unweighted_f = false;
    for traj in ensemble.completed() {
        let mut sup = 0.0f64;
        let mut v_int = 0.0;
        let mut a_int = 0.0;
        for n in 0..=steps {
            let e = (-2.0 * phi[n]).exp();
            sup = sup.max(traj.h_norm_sq[n] * e);
            if n > 0 {
                v_int += e * traj.v_norm_sq[n] * dt;
                a_int += weights.rate(n - 1) * traj.h_norm_sq[n] * e * dt;
            }
        }
        let mut forcing = 0.0;
        let mut g_int = 0.0;
        for (n, d) in traj.data.iter().enumerate() {
            let e = (-phi[n]).exp();
            let f_term = if d.weighted_sq == 0.0 {
                0.0
            } else if weights.rate(n) == 0.0 {
                unweighted_f = true;
                f64::INFINITY
            } else {
                d.weighted_sq / weights.rate(n)
            };
            forcing += e * e * (d.dual_sq + f_term + d.noise_sq) * dt;
            g_int += e * d.integrable * dt;
        }
        paths.push(PathTerms { lhs: vec![sup, v_int, a_int], rhs: vec![traj.h_norm_sq[0], forcing, g_int * g_int] });
    }
    if unweighted_f {
        flags.push("weighted forcing present with zero weight rate".into());
    }
    Ok(assemble("energy", &LHS_TERMS, &RHS_TERMS, &paths, ensemble.diverged(), dt, flags))
}
