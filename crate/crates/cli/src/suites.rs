//! Self-checking suites: each runs a battery of identities and reports one
//! line per check with its observed value and threshold.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use spdelab::evolution::{
    ito_residual, solve, Bracket, EvolutionProblem, ForcingSet, LowerOrderSet, NoiseModel, OperatorPair, Retention,
    SchemeOptions, SymbolOperator, ZeroChannels,
};
use spdelab::morrey::{decompose_lpq, morrey_norm, Admissibility, BallSampler, CenterSet, MorreyParams};
use spdelab::profiles::{inverse_power, Cutoff};
use spdelab::{Field, FieldSeries, GridFunction, Order, SpectralTriple};

use crate::config::{ItoSpec, MorreySpec, ResolventSpec};
use crate::error::RunError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

impl Check {
    /// Passes when `value ≤ threshold`.
    pub fn at_most(name: &str, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), value, threshold, passed: value <= threshold }
    }

    /// Passes when `value < threshold`.
    pub fn below(name: &str, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), value, threshold, passed: value < threshold }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub checks: Vec<Check>,
    pub all_passed: bool,
}

impl SuiteReport {
    fn new(suite: &str, checks: Vec<Check>) -> Self {
        let all_passed = checks.iter().all(|c| c.passed);
        Self { suite: suite.into(), checks, all_passed }
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("name,value,threshold,passed\n");
        for c in &self.checks {
            s.push_str(&format!("{},{:.12e},{:.12e},{}\n", c.name, c.value, c.threshold, c.passed));
        }
        s
    }
}

fn random_function(triple: &SpectralTriple, rng: &mut ChaCha8Rng) -> GridFunction {
    let values = (0..triple.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    GridFunction::new(triple, values).expect("grid length")
}

/// Symmetry, the defining identity, contraction, convergence of `λR_λ` to
/// the identity, the `V`-bound and the density of `V` in `H`.
pub fn resolvent_suite(triple: &SpectralTriple, spec: &ResolventSpec) -> Result<SuiteReport, RunError> {
    let tol = 1e-12;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let pairs: Vec<(GridFunction, GridFunction)> =
        (0..spec.samples.max(1)).map(|_| (random_function(triple, &mut rng), random_function(triple, &mut rng))).collect();
    let (mut sym_h, mut sym_v, mut identity, mut contr_h, mut contr_v) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for &lambda in &spec.lambdas {
        for (f, g) in &pairs {
            let (rf, rg) = (triple.resolvent(lambda, f)?, triple.resolvent(lambda, g)?);
            let (f, g, rf_v, rg_v) = (f.values(), g.values(), rf.values(), rg.values());
            let rel = |a: f64, b: f64, scale: f64| (a - b).abs() / scale.max(f64::MIN_POSITIVE);
            let nh = |u: &[f64]| triple.h_norm_sq(u).sqrt();
            let nv = |u: &[f64]| triple.v_norm_sq(u).sqrt();
            sym_h = sym_h.max(rel(
                triple.h_inner(rf_v, g),
                triple.h_inner(f, rg_v),
                nh(rf_v) * nh(g) + nh(f) * nh(rg_v),
            ));
            sym_v = sym_v.max(rel(
                triple.v_inner(rf_v, g),
                triple.v_inner(f, rg_v),
                nv(rf_v) * nv(g) + nv(f) * nv(rg_v),
            ));
            // (R f, u)_V = ((1 − λR) f, u)_H with u = g
            let rest: Vec<f64> = f.iter().zip(rf_v).map(|(a, b)| a - lambda * b).collect();
            identity = identity.max(rel(
                triple.v_inner(rf_v, g),
                triple.h_inner(&rest, g),
                nv(rf_v) * nv(g) + nh(&rest) * nh(g),
            ));
            contr_h = contr_h.max(lambda * nh(rf_v) / nh(f));
            contr_v = contr_v.max(lambda * nv(rf_v) / nv(f));
        }
    }
    // |R_λ f|_V ≤ 2|f|_H for every λ ≥ 0
    let mut v_bound = 0.0f64;
    for (f, _) in &pairs {
        for lambda in [0.0, 1.0, 10.0, 1000.0] {
            let (_, rv) = triple.norms(&triple.resolvent(lambda, f)?)?;
            let (fh, _) = triple.norms(f)?;
            v_bound = v_bound.max(rv / fh);
        }
    }
    // λR_λ f → f in V along λ = 2^j for a band-limited f
    let w = 2.0 * std::f64::consts::PI / triple.box_length();
    let band = GridFunction::new(
        triple,
        triple.sample(|x| 1.0 + (w * x[0]).cos() + 0.5 * (w * x[0]).sin()).into_values(),
    )?;
    let (_, band_v) = triple.norms(&band)?;
    let errors: Vec<f64> = (0..=spec.max_power)
        .map(|j| {
            let lambda = 2f64.powi(j as i32);
            let s = triple.resolvent(lambda, &band)?.scaled(lambda);
            Ok(triple.norms(&band.axpy(-1.0, &s)?)?.1 / band_v)
        })
        .collect::<Result<_, RunError>>()?;
    let worst_step = errors.windows(2).map(|e| e[1] / e[0]).fold(0.0f64, f64::max);
    let last = *errors.last().expect("nonempty ladder");
    // fixed point of λR_λ on the preimage and density of V in H: any f is
    // the limit of nR_n f, and R_λ maps onto the preimage's range exactly
    let (f, _) = &pairs[0];
    let back = triple.resolvent(3.0, &triple.resolvent_preimage(3.0, f)?)?;
    let preimage_err = triple.norms(&back.axpy(-1.0, f)?)?.0 / triple.norms(f)?.0;
    let density: Vec<f64> = [1u64, 16, 256, 4096]
        .iter()
        .map(|&n| Ok(triple.norms(&triple.smooth(n, f)?.axpy(-1.0, f)?)?.0))
        .collect::<Result<_, RunError>>()?;
    let density_monotone = density.windows(2).map(|e| e[1] / e[0]).fold(0.0f64, f64::max);
    Ok(SuiteReport::new(
        "resolvent",
        vec![
            Check::at_most("symmetry_h", sym_h, tol),
            Check::at_most("symmetry_v", sym_v, tol),
            Check::at_most("defining_identity", identity, tol),
            Check::at_most("contraction_h", contr_h, 1.0 + tol),
            Check::at_most("contraction_v", contr_v, 1.0 + tol),
            Check::below("convergence_ratio", worst_step, 1.0),
            Check::below("convergence_final", last, 1e-6),
            Check::at_most("v_bound", v_bound, 2.0),
            Check::at_most("preimage_roundtrip", preimage_err, tol),
            Check::below("smoothing_monotone", density_monotone, 1.0),
        ],
    ))
}

/// Exact constant, `1/|x|` scale invariance and the threshold split of an
/// `L_p` coefficient on two grids.
pub fn morrey_suite(spec: &MorreySpec) -> Result<SuiteReport, RunError> {
    let mut checks = Vec::new();

    let tr = SpectralTriple::new(3, 16, 2.0, Order::One)?;
    let (value, rho0) = (2.5, 0.5);
    let params = MorreyParams::new(2.5, rho0, 1.0, Admissibility::Full)?;
    let norm = morrey_norm(&tr, &vec![value; tr.len()], &params, &BallSampler::ladder(&tr, rho0, 4, CenterSet::All))?;
    checks.push(Check::at_most("constant_norm", (norm - rho0 * value).abs() / (rho0 * value), 1e-12));

    let l = spec.scaling_box;
    let tr = SpectralTriple::new(3, spec.scaling_grid, l, Order::One)?;
    let cutoff = Cutoff::for_box(l);
    let f = inverse_power(&tr, &[0.0; 3], 1.0, cutoff);
    let params = MorreyParams::new(2.0, 1.0, 1.0, Admissibility::Full)?;
    let (lo, hi) = (4.0 * tr.spacing(), cutoff.inner);
    let count = spec.radii.max(2);
    let q = (hi / lo).powf(1.0 / (count - 1) as f64);
    let values: Vec<f64> = (0..count)
        .map(|i| {
            let sampler = BallSampler::with_radii(CenterSet::Nodes(vec![0]), vec![lo * q.powi(i as i32)]);
            morrey_norm(&tr, &f, &params, &sampler)
        })
        .collect::<Result<_, _>>()?;
    let (min, max) = values.iter().fold((f64::INFINITY, 0.0f64), |(a, b), v| (a.min(*v), b.max(*v)));
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    checks.push(Check::at_most("inverse_distance_spread", (max - min) / mean, 0.1));
    // ρ (⨍_{B_ρ}|x|^{-2})^{1/2} = √3 in the continuum
    checks.push(Check::at_most("inverse_distance_level", (mean - 3f64.sqrt()).abs() / 3f64.sqrt(), 0.1));

    let mut fitted = Vec::new();
    let mut worst_bound = 0.0f64;
    for &m in &spec.split_grids {
        let tr = SpectralTriple::new(3, m, spec.split_box, Order::One)?;
        let b: Vec<f64> = inverse_power(&tr, &[0.0; 3], 0.5, Cutoff::for_box(spec.split_box))
            .into_iter()
            .map(|v| spec.split_amplitude * v)
            .collect();
        let params = MorreyParams::admissibility(3, 2.5, 0.5)?;
        let sampler = BallSampler::ladder(&tr, 0.5, 4, CenterSet::Nodes(vec![0]));
        let slices = [Field::scalar(b)];
        let mut row = Vec::new();
        for &n_hat in &spec.split_n_hats {
            let split = decompose_lpq(&tr, &[0.0], &slices, spec.split_p, n_hat, &params, &sampler)?;
            worst_bound = worst_bound.max(split.fitted_constant / split.chebyshev_constant);
            row.push(split.fitted_constant);
        }
        fitted.push(row);
    }
    let mut drift = 0.0f64;
    for pair in fitted.windows(2) {
        for (a, b) in pair[0].iter().zip(&pair[1]) {
            if a.max(*b) > 0.0 {
                drift = drift.max((a - b).abs() / a.max(*b));
            }
        }
    }
    checks.push(Check::at_most("split_constant_stability", drift, 0.25));
    checks.push(Check::at_most("split_chebyshev_bound", worst_bound, 1.0));
    Ok(SuiteReport::new("morrey", checks))
}

/// Mean over paths of `max_n |R_n|` for `du = −u dt + dw` on constants.
pub fn ou_mean_residual(n_paths: usize, dt: f64, t_final: f64, seed: u64) -> Result<f64, RunError> {
    let tr = SpectralTriple::new(1, 2, 1.0, Order::One)?;
    // symbol −(ξ² + 1): −u on the constant mode, coercive on the other
    let a = Arc::new(SymbolOperator::heat(&tr, 1.0, 1.0));
    let ops = OperatorPair::new(a, Arc::new(ZeroChannels(1)), 1.0)?;
    let forcing = ForcingSet { noise: Some(FieldSeries::constant(Field::scalar(vec![1.0; 2]))), ..ForcingSet::none() };
    let problem = EvolutionProblem::new(&tr, ops, LowerOrderSet::none(), forcing, vec![1.0; 2])?;
    let noise = NoiseModel::new(1, dt, t_final, seed)?;
    let options = SchemeOptions::default().retain(Retention::All);
    let total: f64 = (0..n_paths as u64)
        .into_par_iter()
        .map(|p| -> Result<f64, RunError> {
            let traj = solve(&problem, &noise, p, options)?;
            Ok(ito_residual(&traj, &problem, Bracket::Realized)?.max_abs)
        })
        .collect::<Result<Vec<_>, _>>()?
        .iter()
        .sum();
    Ok(total / n_paths as f64)
}

/// Residual of `|w_t|² = 2∫w dw + [w]_t` for `u = w` solved as an equation
/// with zero drift.
pub fn martingale_residual(n_paths: usize, dt: f64, t_final: f64, seed: u64) -> Result<f64, RunError> {
    let tr = SpectralTriple::new(1, 2, 1.0, Order::One)?;
    let a = Arc::new(SymbolOperator::new(&tr, vec![0.0; 2])?);
    let ops = OperatorPair::new(a, Arc::new(ZeroChannels(1)), 1.0)?;
    let forcing = ForcingSet { noise: Some(FieldSeries::constant(Field::scalar(vec![1.0; 2]))), ..ForcingSet::none() };
    let problem = EvolutionProblem::new(&tr, ops, LowerOrderSet::none(), forcing, vec![0.0; 2])?;
    let noise = NoiseModel::new(1, dt, t_final, seed)?;
    let options = SchemeOptions::default().retain(Retention::All);
    let worst = (0..n_paths as u64)
        .into_par_iter()
        .map(|p| -> Result<f64, RunError> {
            let traj = solve(&problem, &noise, p, options)?;
            Ok(ito_residual(&traj, &problem, Bracket::Realized)?.max_abs)
        })
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .fold(0.0, f64::max);
    Ok(worst)
}

pub fn ito_suite(spec: &ItoSpec) -> Result<(SuiteReport, Vec<(f64, f64)>), RunError> {
    let table: Vec<(f64, f64)> = spec
        .dts
        .iter()
        .map(|&dt| Ok((dt, ou_mean_residual(spec.n_paths, dt, spec.t_final, spec.seed)?)))
        .collect::<Result<_, RunError>>()?;
    let mut checks = Vec::new();
    if let [(dt0, r0), (dt1, r1), ..] = table[..] {
        // first order: the residual ratio tracks the step ratio within 30%
        let expected = dt0 / dt1;
        checks.push(Check::at_most("ou_order", ((r0 / r1) / expected - 1.0).abs(), 0.3));
    }
    let dt = spec.dts[0];
    let m = martingale_residual(spec.n_paths.min(100), dt, spec.t_final, spec.seed)?;
    checks.push(Check::at_most("martingale_identity", m, dt));
    Ok((SuiteReport::new("ito", checks), table))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resolvent_suite_passes_on_a_long_box() {
        let tr = SpectralTriple::new(1, 64, 64.0, Order::One).unwrap();
        let spec = ResolventSpec { samples: 10, ..ResolventSpec::default() };
        let r = resolvent_suite(&tr, &spec).unwrap();
        assert!(r.all_passed, "{:#?}", r.checks);
    }

    #[test]
    fn martingale_residual_is_roundoff() {
        assert!(martingale_residual(4, 0.01, 0.5, 1).unwrap() < 1e-12);
    }
}
