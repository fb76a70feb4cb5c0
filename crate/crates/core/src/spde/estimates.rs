//! SPDE-level weighted estimates evaluated on solver ensembles.
//!
//! | report | weight rate | needs |
//! |---|---|---|
//! | `l2` | `λ(b̄² + β̄² + ν̄² + c̄ + ρ₀⁻² + δ) + μ` | norm series |
//! | `w12` | `N(b̄² + c̄² + ν̄² + D̄a² + D̄σ² + D̄ν² + ρ₀⁻² + δ) + μ` | order-2 triple |
//! | `lp` | `λ(b̄² + β̄² + ν̄² + c̄ + ρ₀⁻² + 1) + μ` | every state |
//! | `w1p` | `C(1 + D̄a² + D̄σ² + b̄² + c̄² + ν̄² + D̄ν²) + μ` | every state, derivative data |
//!
//! Data norms are evaluated per step along each path's own Wiener record,
//! so comoving data are handled like static data.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::report::{assemble, PathTerms};
use crate::evolution::{Ensemble, EstimateReport, Trajectory, WeightProcess};
use crate::field::{Envelope, FieldSeries, StepContext};
use crate::spde::coefficients::{SpdeCoefficients, SpdeForcing};
use crate::spde::mollify::lp_norm;
use crate::triple::{Order, SpectralTriple};

/// Constants of the weight recipes, which the estimates leave unquantified.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WeightConstants {
    /// `λ` of the `L₂`/`L_p` recipes, `N` of the `W¹₂` recipe, `C` of `Λ`
    pub scale: f64,
    /// user channel `μ`
    pub mu: f64,
    /// ellipticity constant `δ`
    pub delta: f64,
}

impl Default for WeightConstants {
    fn default() -> Self {
        Self { scale: 1.0, mu: 0.0, delta: 0.5 }
    }
}

fn rate_series(
    envelopes: &[(&Envelope, f64)],
    constant: f64,
    consts: &WeightConstants,
    dt: f64,
    steps: usize,
) -> Result<WeightProcess> {
    if !(consts.scale.is_finite() && consts.scale >= 0.0) {
        return Err(Error::Domain(format!("weight scale must be nonnegative, got {}", consts.scale)));
    }
    let alpha = (0..steps)
        .map(|n| {
            let t = n as f64 * dt;
            let s: f64 = envelopes.iter().map(|(e, power)| e.at(t).powf(*power)).sum();
            consts.scale * (s + constant)
        })
        .collect();
    WeightProcess::from_series(alpha, dt)?.with_extra(consts.mu)
}

fn rho0_term(coeffs: &SpdeCoefficients) -> f64 {
    coeffs.drift.params.rho0.powi(-2)
}

pub fn l2_weight(coeffs: &SpdeCoefficients, consts: &WeightConstants, dt: f64, steps: usize) -> Result<WeightProcess> {
    let c = coeffs;
    rate_series(
        &[(&c.drift.bar, 2.0), (&c.divergence_drift.bar, 2.0), (&c.noise_reaction.bar, 2.0), (&c.reaction.bar, 1.0)],
        rho0_term(c) + consts.delta,
        consts,
        dt,
        steps,
    )
}

pub fn lp_weight(coeffs: &SpdeCoefficients, consts: &WeightConstants, dt: f64, steps: usize) -> Result<WeightProcess> {
    let c = coeffs;
    rate_series(
        &[(&c.drift.bar, 2.0), (&c.divergence_drift.bar, 2.0), (&c.noise_reaction.bar, 2.0), (&c.reaction.bar, 1.0)],
        rho0_term(c) + 1.0,
        consts,
        dt,
        steps,
    )
}

fn derivative_bars(coeffs: &SpdeCoefficients) -> Result<[&Envelope; 3]> {
    let der = coeffs.derivatives.as_ref().ok_or_else(|| Error::Config("derivative fields are required".into()))?;
    Ok([&der.diffusion.bar, &der.noise_gradient.bar, &der.noise_reaction.bar])
}

pub fn w12_weight(coeffs: &SpdeCoefficients, consts: &WeightConstants, dt: f64, steps: usize) -> Result<WeightProcess> {
    let c = coeffs;
    let [da, ds, dn] = derivative_bars(c)?;
    rate_series(
        &[
            (&c.drift.bar, 2.0),
            (&c.reaction.bar, 2.0),
            (&c.noise_reaction.bar, 2.0),
            (da, 2.0),
            (ds, 2.0),
            (dn, 2.0),
        ],
        rho0_term(c) + consts.delta,
        consts,
        dt,
        steps,
    )
}

/// The rate `Λ` whose integral is `Ψ`.
pub fn w1p_weight(coeffs: &SpdeCoefficients, consts: &WeightConstants, dt: f64, steps: usize) -> Result<WeightProcess> {
    let c = coeffs;
    let [da, ds, dn] = derivative_bars(c)?;
    rate_series(
        &[
            (da, 2.0),
            (ds, 2.0),
            (&c.drift.bar, 2.0),
            (&c.reaction.bar, 2.0),
            (&c.noise_reaction.bar, 2.0),
            (dn, 2.0),
        ],
        1.0,
        consts,
        dt,
        steps,
    )
}

pub const L2_LHS: [&str; 3] = ["sup_weighted_l2", "weighted_w12_integral", "alpha_weighted_l2_integral"];
pub const L2_RHS: [&str; 4] = ["initial_l2", "noise_forcing_integral", "integrable_forcing_squared", "forcing_integral"];
pub const W12_LHS: [&str; 2] = ["sup_weighted_w12", "weighted_w22_integral"];
pub const W12_RHS: [&str; 3] = ["initial_w12", "forcing_integral", "integrable_forcing_squared"];
pub const LP_LHS: [&str; 3] = ["sup_weighted_lp", "weighted_gradient_integral", "alpha_weighted_lp_integral"];
pub const LP_RHS: [&str; 4] = ["initial_lp", "noise_forcing_term", "integrable_forcing_term", "forcing_term"];
pub const W1P_LHS: [&str; 3] = ["sup_weighted_w1p", "weighted_hessian_integral", "lambda_weighted_w1p_integral"];
pub const W1P_RHS: [&str; 3] = ["initial_w1p", "integrable_forcing_term", "forcing_term"];

/// Evaluates `f` on the data at every left endpoint `t_0, …, t_{N−1}` of the
/// path; time-independent data are evaluated once.
fn along_path<T: Clone>(
    forcing: &SpdeForcing,
    traj: &Trajectory,
    f: &(dyn Fn(&StepContext<'_>) -> T + Sync),
) -> Vec<T> {
    let steps = traj.steps();
    let k = traj.channels;
    let channels = [&forcing.divergence, &forcing.source, &forcing.integrable, &forcing.noise];
    let frozen = channels.iter().all(|c| c.as_ref().is_none_or(FieldSeries::is_time_independent));
    if frozen {
        let v = f(&StepContext { t: 0.0, step: 0, wiener: &vec![0.0; k] });
        return vec![v; steps];
    }
    let w = traj.wiener_path();
    (0..steps)
        .map(|n| f(&StepContext { t: n as f64 * traj.dt, step: n, wiener: &w[n * k..(n + 1) * k] }))
        .collect()
}

fn check_weights(ensemble: &Ensemble, weights: &WeightProcess) -> Result<()> {
    if weights.steps() != ensemble.steps {
        return Err(Error::Config(format!(
            "weight process has {} steps, ensemble {}",
            weights.steps(),
            ensemble.steps
        )));
    }
    Ok(())
}

fn completed(ensemble: &Ensemble) -> Vec<&Trajectory> {
    ensemble.completed().collect()
}

/// Sum of squared `L₂` norms of all components.
fn l2_sq(triple: &SpectralTriple, series: &Option<FieldSeries>, ctx: &StepContext<'_>) -> f64 {
    series.as_ref().map_or(0.0, |s| {
        s.eval(ctx).components().iter().map(|c| triple.l2_inner(c, c)).sum()
    })
}

/// `|h|²` of the vector field in the `H` norm of the triple.
fn h_sq(triple: &SpectralTriple, series: &Option<FieldSeries>, ctx: &StepContext<'_>) -> f64 {
    series.as_ref().map_or(0.0, |s| s.eval(ctx).components().iter().map(|c| triple.h_norm_sq(c)).sum())
}

fn lp_of(triple: &SpectralTriple, series: &Option<FieldSeries>, ctx: &StepContext<'_>, p: f64) -> f64 {
    series.as_ref().map_or(0.0, |s| lp_norm(triple, &s.eval(ctx).magnitude(), p))
}

/// `(∫|v|^p + ∫|Dv|^p)^{1/p}` for a vector field, `|Dv|` the Frobenius norm.
fn w1p_norm_of(triple: &SpectralTriple, components: &[Vec<f64>], p: f64) -> f64 {
    let n = triple.len();
    let mut mag = vec![0.0; n];
    let mut grad = vec![0.0; n];
    for c in components {
        for (m, v) in mag.iter_mut().zip(c) {
            *m += v * v;
        }
        for g in triple.gradient(c) {
            for (a, v) in grad.iter_mut().zip(&g) {
                *a += v * v;
            }
        }
    }
    let h = triple.cell_volume();
    let s: f64 = mag.iter().chain(grad.iter()).map(|m| m.sqrt().powf(p)).sum();
    (h * s).powf(1.0 / p)
}

/// `sup e^{−2φ}|u|²_{L₂} + ∫e^{−2φ}|u|²_{W¹₂} + ∫α e^{−2φ}|u|²_{L₂}` against
/// `|u₀|² + ∫e^{−2φ}|h|² + (∫e^{−φ}|g|)² + ∫e^{−2φ}(|𝔣|² + |f|²)`.
pub fn l2_report(
    ensemble: &Ensemble,
    triple: &SpectralTriple,
    forcing: &SpdeForcing,
    weights: &WeightProcess,
) -> Result<EstimateReport> {
    if triple.order() != Order::One {
        return Err(Error::Config("the L2 estimate reads trajectories of an order-1 triple".into()));
    }
    check_weights(ensemble, weights)?;
    let dt = ensemble.dt;
    let steps = ensemble.steps;
    let phi = weights.phi();
    let paths: Vec<PathTerms> = completed(ensemble)
        .par_iter()
        .map(|traj| {
            let data = along_path(forcing, traj, &|ctx| {
                [
                    l2_sq(triple, &forcing.noise, ctx),
                    l2_sq(triple, &forcing.integrable, ctx).sqrt(),
                    l2_sq(triple, &forcing.divergence, ctx) + l2_sq(triple, &forcing.source, ctx),
                ]
            });
            let (mut sup, mut v_int, mut a_int) = (0.0f64, 0.0, 0.0);
            for n in 0..=steps {
                let e = (-2.0 * phi[n]).exp();
                sup = sup.max(e * traj.h_norm_sq[n]);
                if n > 0 {
                    v_int += e * traj.v_norm_sq[n] * dt;
                    a_int += weights.rate(n - 1) * e * traj.h_norm_sq[n] * dt;
                }
            }
            let (mut h_int, mut g_int, mut f_int) = (0.0, 0.0, 0.0);
            for (n, [h, g, f]) in data.iter().enumerate() {
                let e = (-phi[n]).exp();
                h_int += e * e * h * dt;
                g_int += e * g * dt;
                f_int += e * e * f * dt;
            }
            PathTerms { lhs: vec![sup, v_int, a_int], rhs: vec![traj.h_norm_sq[0], h_int, g_int * g_int, f_int] }
        })
        .collect();
    Ok(assemble("l2", &L2_LHS, &L2_RHS, &paths, ensemble.diverged(), dt, Vec::new()))
}

/// `sup e^{−2φ}|u|²_{W¹₂} + ∫e^{−2φ}|u|²_{W²₂}` against
/// `|u₀|²_{W¹₂} + ∫e^{−2φ}(|h|²_{W¹₂} + |f|²_{L₂}) + (∫e^{−φ}|g|_{W¹₂})²`.
pub fn w12_report(
    ensemble: &Ensemble,
    triple: &SpectralTriple,
    forcing: &SpdeForcing,
    weights: &WeightProcess,
) -> Result<EstimateReport> {
    if triple.order() != Order::Two {
        return Err(Error::Config("the W12 estimate reads trajectories of an order-2 triple".into()));
    }
    check_weights(ensemble, weights)?;
    let dt = ensemble.dt;
    let steps = ensemble.steps;
    let phi = weights.phi();
    let paths: Vec<PathTerms> = completed(ensemble)
        .par_iter()
        .map(|traj| {
            let data = along_path(forcing, traj, &|ctx| {
                [
                    h_sq(triple, &forcing.noise, ctx) + l2_sq(triple, &forcing.source, ctx),
                    h_sq(triple, &forcing.integrable, ctx).sqrt(),
                ]
            });
            let (mut sup, mut v_int) = (0.0f64, 0.0);
            for n in 0..=steps {
                let e = (-2.0 * phi[n]).exp();
                sup = sup.max(e * traj.h_norm_sq[n]);
                if n > 0 {
                    v_int += e * traj.v_norm_sq[n] * dt;
                }
            }
            let (mut f_int, mut g_int) = (0.0, 0.0);
            for (n, [f, g]) in data.iter().enumerate() {
                let e = (-phi[n]).exp();
                f_int += e * e * f * dt;
                g_int += e * g * dt;
            }
            PathTerms { lhs: vec![sup, v_int], rhs: vec![traj.h_norm_sq[0], f_int, g_int * g_int] }
        })
        .collect();
    Ok(assemble("w12", &W12_LHS, &W12_RHS, &paths, ensemble.diverged(), dt, Vec::new()))
}

fn all_states(traj: &Trajectory) -> Result<Vec<&[f64]>> {
    let steps = traj.steps();
    if traj.states.len() != steps + 1 || traj.states.iter().enumerate().any(|(i, (n, _))| *n != i) {
        return Err(Error::Config("L_p estimates need every state of the trajectory".into()));
    }
    Ok(traj.states.iter().map(|(_, u)| u.as_slice()).collect())
}

fn check_p(p: f64) -> Result<()> {
    if p > 2.0 && p.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("the exponent must exceed 2, got {p}")))
    }
}

/// `∫|u|^{p−2}|Du|²`, with `0^{p−2}·0 = 0`.
fn lp_gradient_density(triple: &SpectralTriple, u: &[f64], p: f64) -> f64 {
    let g = triple.gradient(u);
    let s: f64 = (0..u.len())
        .map(|x| {
            let du2: f64 = g.iter().map(|c| c[x] * c[x]).sum();
            if du2 == 0.0 {
                0.0
            } else {
                u[x].abs().powf(p - 2.0) * du2
            }
        })
        .sum();
    s * triple.cell_volume()
}

/// `sup|u e^{−φ}|^p_{L_p} + ∫e^{−pφ}∫|u|^{p−2}|Du|² + ∫α e^{−pφ}|u e^{−φ}|^p_{L_p}`
/// against `|u₀|^p + (∫|h e^{−φ}|²_{L_p})^{p/2} + (∫|g e^{−φ}|_{L_p})^p
/// + (∫|𝔣 e^{−φ}|²_{L_p} + |f e^{−φ}|²_{L_p})^{p/2}`.
pub fn lp_report(
    ensemble: &Ensemble,
    triple: &SpectralTriple,
    forcing: &SpdeForcing,
    p: f64,
    weights: &WeightProcess,
) -> Result<EstimateReport> {
    check_p(p)?;
    check_weights(ensemble, weights)?;
    let dt = ensemble.dt;
    let phi = weights.phi();
    let trajectories = completed(ensemble);
    let paths: Vec<Result<PathTerms>> = trajectories
        .par_iter()
        .map(|traj| {
            let states = all_states(traj)?;
            let data = along_path(forcing, traj, &|ctx| {
                [
                    lp_of(triple, &forcing.noise, ctx, p),
                    lp_of(triple, &forcing.integrable, ctx, p),
                    lp_of(triple, &forcing.divergence, ctx, p).powi(2) + lp_of(triple, &forcing.source, ctx, p).powi(2),
                ]
            });
            let (mut sup, mut grad, mut alpha) = (0.0f64, 0.0, 0.0);
            for (n, u) in states.iter().enumerate() {
                let e = (-p * phi[n]).exp();
                let norm_p = lp_norm(triple, u, p).powf(p);
                sup = sup.max(e * norm_p);
                if n > 0 {
                    grad += e * lp_gradient_density(triple, u, p) * dt;
                    alpha += weights.rate(n - 1) * e * e * norm_p * dt;
                }
            }
            let (mut h_int, mut g_int, mut f_int) = (0.0, 0.0, 0.0);
            for (n, [h, g, f]) in data.iter().enumerate() {
                let e = (-phi[n]).exp();
                h_int += e * e * h * h * dt;
                g_int += e * g * dt;
                f_int += e * e * f * dt;
            }
            Ok(PathTerms {
                lhs: vec![sup, grad, alpha],
                rhs: vec![
                    lp_norm(triple, states[0], p).powf(p),
                    h_int.powf(p / 2.0),
                    g_int.powf(p),
                    f_int.powf(p / 2.0),
                ],
            })
        })
        .collect();
    let paths = paths.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(assemble("lp", &LP_LHS, &LP_RHS, &paths, ensemble.diverged(), dt, Vec::new()))
}

/// `sup e^{−pΨ}|u|^p_{W¹_p} + ∫e^{−pΨ}(∫|Du|^{p−2}|D²u|² + Λ|u|^p_{W¹_p})` against
/// `|u₀|^p_{W¹_p} + (∫e^{−Ψ}|g|_{W¹_p})^p + (∫|e^{−Ψ}f|²_{L_p} + |e^{−Ψ}h|²_{W¹_p})^{p/2}`.
pub fn w1p_report(
    ensemble: &Ensemble,
    triple: &SpectralTriple,
    coeffs: &SpdeCoefficients,
    forcing: &SpdeForcing,
    p: f64,
    weights: &WeightProcess,
) -> Result<EstimateReport> {
    check_p(p)?;
    check_weights(ensemble, weights)?;
    derivative_bars(coeffs)?;
    if !coeffs.divergence_drift.is_zero() || forcing.divergence.as_ref().is_some_and(|f| !f.is_identically_zero()) {
        return Err(Error::Config("the W1p estimate needs beta = 0 and a vanishing divergence forcing".into()));
    }
    let dt = ensemble.dt;
    let psi = weights.phi();
    let d = triple.dim();
    let trajectories = completed(ensemble);
    let paths: Vec<Result<PathTerms>> = trajectories
        .par_iter()
        .map(|traj| {
            let states = all_states(traj)?;
            let data = along_path(forcing, traj, &|ctx| {
                let g = forcing.integrable.as_ref().map_or(0.0, |s| w1p_norm_of(triple, s.eval(ctx).components(), p));
                let h = forcing.noise.as_ref().map_or(0.0, |s| w1p_norm_of(triple, s.eval(ctx).components(), p));
                [g, lp_of(triple, &forcing.source, ctx, p), h]
            });
            let (mut sup, mut hess_int, mut lam_int) = (0.0f64, 0.0, 0.0);
            for (n, u) in states.iter().enumerate() {
                let e = (-p * psi[n]).exp();
                let w1p = w1p_norm_of(triple, &[u.to_vec()], p).powf(p);
                sup = sup.max(e * w1p);
                if n > 0 {
                    let g = triple.gradient(u);
                    let hess = triple.hessian(u);
                    let s: f64 = (0..u.len())
                        .map(|x| {
                            let du2: f64 = g.iter().map(|c| c[x] * c[x]).sum();
                            if du2 == 0.0 {
                                return 0.0;
                            }
                            let d2: f64 = (0..d * d).map(|ij| hess[ij][x] * hess[ij][x]).sum();
                            du2.sqrt().powf(p - 2.0) * d2
                        })
                        .sum();
                    hess_int += e * s * triple.cell_volume() * dt;
                    lam_int += e * weights.rate(n - 1) * w1p * dt;
                }
            }
            let (mut g_int, mut f_int) = (0.0, 0.0);
            for (n, [g, f, h]) in data.iter().enumerate() {
                let e = (-psi[n]).exp();
                g_int += e * g * dt;
                f_int += e * e * (f * f + h * h) * dt;
            }
            Ok(PathTerms {
                lhs: vec![sup, hess_int, lam_int],
                rhs: vec![w1p_norm_of(triple, &[states[0].to_vec()], p).powf(p), g_int.powf(p), f_int.powf(p / 2.0)],
            })
        })
        .collect();
    let paths = paths.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(assemble("w1p", &W1P_LHS, &W1P_RHS, &paths, ensemble.diverged(), dt, Vec::new()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolution::{solve_ensemble, NoiseModel, Retention, SchemeOptions};
    use crate::field::Field;
    use crate::morrey::{Admissibility, MorreyParams};
    use crate::spde::assemble::{assemble, AssemblyOptions};

    fn params() -> MorreyParams {
        MorreyParams::new(2.5, 1.0, 1.0, Admissibility::Full).unwrap()
    }

    fn setup(order: Order, scale: f64) -> (SpectralTriple, SpdeCoefficients, SpdeForcing, Ensemble) {
        let tr = SpectralTriple::new(1, 32, 2.0 * std::f64::consts::PI, order).unwrap();
        let c = SpdeCoefficients::isotropic(&tr, 1, 1.0, 0.4, params()).with_spectral_derivatives(&tr, params());
        let forcing = SpdeForcing {
            noise: Some(FieldSeries::constant(Field::scalar(tr.sample(|x| 0.3 * x[0].cos()).into_values()))),
            integrable: Some(FieldSeries::constant(Field::scalar(tr.sample(|x| 0.2 * x[0].sin()).into_values()))),
            ..SpdeForcing::none()
        }
        .scaled(scale);
        let asm = assemble(&tr, &c, &forcing, &AssemblyOptions::new(0.5)).unwrap();
        let u0: Vec<f64> = tr.sample(|x| scale * (-(x[0] * x[0])).exp()).into_values();
        let problem = asm.problem(u0).unwrap();
        let noise = NoiseModel::new(1, 0.01, 0.2, 3).unwrap();
        let e = solve_ensemble(&problem, &noise, 4, SchemeOptions::default().retain(Retention::All)).unwrap();
        (tr, c, forcing, e)
    }

    #[test]
    fn reports_are_homogeneous_in_the_data() {
        let consts = WeightConstants::default();
        let mut l2 = Vec::new();
        let mut lp = Vec::new();
        let mut w1p = Vec::new();
        for scale in [1.0, 3.0] {
            let (tr, c, f, e) = setup(Order::One, scale);
            let w = l2_weight(&c, &consts, e.dt, e.steps).unwrap();
            l2.push(l2_report(&e, &tr, &f, &w).unwrap());
            let w = lp_weight(&c, &consts, e.dt, e.steps).unwrap();
            lp.push(lp_report(&e, &tr, &f, 4.0, &w).unwrap());
            let w = w1p_weight(&c, &consts, e.dt, e.steps).unwrap();
            w1p.push(w1p_report(&e, &tr, &c, &f, 4.0, &w).unwrap());
        }
        let rel = |a: f64, b: f64| (a - b).abs() / b.abs();
        assert!(rel(l2[1].lhs / l2[0].lhs, 9.0) < 1e-9);
        assert!(rel(l2[1].ratio.unwrap(), l2[0].ratio.unwrap()) < 1e-9);
        assert!(rel(lp[1].lhs / lp[0].lhs, 81.0) < 1e-9);
        assert!(rel(lp[1].ratio.unwrap(), lp[0].ratio.unwrap()) < 1e-9);
        assert!(rel(w1p[1].ratio.unwrap(), w1p[0].ratio.unwrap()) < 1e-9);
        // |·|_{L_p} ≤ |·|_{W¹_p} on the same path
        assert!(w1p[0].lhs_terms["sup_weighted_w1p"] >= lp[0].lhs_terms["sup_weighted_lp"]);
    }

    #[test]
    fn w12_report_runs_on_order_two() {
        let (tr, c, f, e) = setup(Order::Two, 1.0);
        let w = w12_weight(&c, &WeightConstants::default(), e.dt, e.steps).unwrap();
        let r = w12_report(&e, &tr, &f, &w).unwrap();
        assert!(r.ratio.unwrap().is_finite() && r.lhs > 0.0);
        assert!(l2_report(&e, &tr, &f, &w).is_err());
    }

    #[test]
    fn zero_data_and_bad_exponents() {
        let (tr, c, f, e) = setup(Order::One, 0.0);
        let w = lp_weight(&c, &WeightConstants::default(), e.dt, e.steps).unwrap();
        let r = lp_report(&e, &tr, &f, 4.0, &w).unwrap();
        assert_eq!(r.ratio, Some(0.0));
        assert!(lp_report(&e, &tr, &f, 2.0, &w).is_err());
    }

    #[test]
    fn weight_rates_follow_the_recipes() {
        let tr = SpectralTriple::new(1, 8, 4.0, Order::One).unwrap();
        let mut c = SpdeCoefficients::isotropic(&tr, 1, 1.0, 0.0, params());
        c.drift.bar = Envelope::Constant(2.0);
        c.reaction.bar = Envelope::Constant(3.0);
        let consts = WeightConstants { scale: 2.0, mu: 0.5, delta: 0.25 };
        let w = l2_weight(&c, &consts, 0.1, 3).unwrap();
        assert!((w.rate(0) - (2.0 * (4.0 + 3.0 + 1.0 + 0.25) + 0.5)).abs() < 1e-12);
        let w = lp_weight(&c, &consts, 0.1, 3).unwrap();
        assert!((w.rate(2) - (2.0 * (4.0 + 3.0 + 1.0 + 1.0) + 0.5)).abs() < 1e-12);
        assert!(w1p_weight(&c, &consts, 0.1, 3).is_err());
    }
}
