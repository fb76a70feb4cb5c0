//! Convergence of solutions under approximation of the problem data.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::noise::NoiseModel;
use crate::evolution::operators::EvolutionProblem;
use crate::evolution::solver::{SchemeOptions, Stepper};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityRow {
    pub index: usize,
    /// `Ê sup_t |uⁿ_t − u⁰_t|²_H`
    pub sup_term: f64,
    /// `Ê ∫|uⁿ − u⁰|²_V dt`
    pub integral_term: f64,
    pub distance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityTable {
    pub rows: Vec<StabilityRow>,
    pub n_paths: usize,
    pub excluded_paths: usize,
    /// strictly decreasing or already below the tolerance
    pub decreasing: bool,
}

/// Runs the base problem and every approximation on the same Brownian path,
/// step by step, and tabulates their distance.
pub fn stability_experiment(
    base: &EvolutionProblem,
    sequence: &[EvolutionProblem],
    noise: &NoiseModel,
    n_paths: usize,
    options: SchemeOptions,
    tolerance: f64,
) -> Result<StabilityTable> {
    for (i, p) in sequence.iter().enumerate() {
        if !p.triple.same_grid(&base.triple) || p.triple.order() != base.triple.order() {
            return Err(Error::Config(format!("approximation {i} lives on a different grid")));
        }
        if p.channels() != base.channels() {
            return Err(Error::Config(format!("approximation {i} has a different channel count")));
        }
    }
    if noise.channels != base.channels() {
        return Err(Error::Config("noise channel count does not match the problem".into()));
    }
    let guard = options.divergence_threshold * options.divergence_threshold;
    let per_path: Vec<Option<Vec<(f64, f64)>>> = (0..n_paths as u64)
        .into_par_iter()
        .map(|path| -> Result<Option<Vec<(f64, f64)>>> {
            let tr = &base.triple;
            let k = noise.channels;
            let incs = noise.path_increments(path);
            let base_stepper = Stepper::new(base, noise.dt, options);
            let steppers: Vec<Stepper> = sequence.iter().map(|p| Stepper::new(p, noise.dt, options)).collect();
            let mut u0 = base.initial.clone();
            let mut us: Vec<Vec<f64>> = sequence.iter().map(|p| p.initial.clone()).collect();
            let mut acc: Vec<(f64, f64)> = us
                .iter()
                .map(|u| {
                    let diff: Vec<f64> = u.iter().zip(&u0).map(|(a, b)| a - b).collect();
                    (tr.h_norm_sq(&diff), 0.0)
                })
                .collect();
            let mut wiener = vec![0.0; k];
            for n in 0..noise.steps {
                let dw = &incs[n * k..(n + 1) * k];
                u0 = base_stepper.step(n, &wiener, &u0, dw)?.next;
                if !(tr.h_norm_sq(&u0) <= guard) {
                    return Ok(None);
                }
                for ((s, u), a) in steppers.iter().zip(us.iter_mut()).zip(acc.iter_mut()) {
                    *u = s.step(n, &wiener, u, dw)?.next;
                    let diff: Vec<f64> = u.iter().zip(&u0).map(|(x, y)| x - y).collect();
                    let (h, v) = tr.norms_sq(&diff);
                    if !(h <= guard) {
                        return Ok(None);
                    }
                    a.0 = a.0.max(h);
                    a.1 += v * noise.dt;
                }
                for (w, d) in wiener.iter_mut().zip(dw) {
                    *w += d;
                }
            }
            Ok(Some(acc))
        })
        .collect::<Result<Vec<_>>>()?;
    let kept: Vec<&Vec<(f64, f64)>> = per_path.iter().flatten().collect();
    let excluded = per_path.len() - kept.len();
    let m = kept.len().max(1) as f64;
    let rows: Vec<StabilityRow> = (0..sequence.len())
        .map(|i| {
            let sup_term = kept.iter().map(|p| p[i].0).sum::<f64>() / m;
            let integral_term = kept.iter().map(|p| p[i].1).sum::<f64>() / m;
            StabilityRow { index: i, sup_term, integral_term, distance: sup_term + integral_term }
        })
        .collect();
    let decreasing = rows.windows(2).all(|w| w[1].distance < w[0].distance || w[1].distance <= tolerance);
    Ok(StabilityTable { rows, n_paths: kept.len(), excluded_paths: excluded, decreasing })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::evolution::operators::*;
    use crate::{Order, SpectralTriple};

    fn heat(tr: &SpectralTriple, a: f64) -> EvolutionProblem {
        let ops = OperatorPair::new(
            Arc::new(SymbolOperator::heat(tr, a, 0.0)),
            Arc::new(DerivativeChannels::new(tr, 0.3)),
            0.5,
        )
        .unwrap();
        let u0 = tr.sample(|x| x[0].sin() + 0.5 * (2.0 * x[0]).cos()).into_values();
        EvolutionProblem::new(tr, ops, LowerOrderSet::none(), ForcingSet::none(), u0).unwrap()
    }

    #[test]
    fn identical_problems_have_zero_distance() {
        let tr = SpectralTriple::new(1, 16, 2.0 * std::f64::consts::PI, Order::One).unwrap();
        let p = heat(&tr, 1.0);
        let noise = NoiseModel::new(1, 0.05, 0.5, 2).unwrap();
        let t = stability_experiment(&p, &[p.clone(), p.clone()], &noise, 3, SchemeOptions::default(), 0.0).unwrap();
        assert!(t.rows.iter().all(|r| r.distance == 0.0));
        assert!(t.decreasing);
    }

    #[test]
    fn diffusion_perturbation_converges_quadratically() {
        let tr = SpectralTriple::new(1, 16, 2.0 * std::f64::consts::PI, Order::One).unwrap();
        let base = heat(&tr, 1.0);
        let seq: Vec<_> = [1.0, 2.0, 4.0, 8.0].iter().map(|n| heat(&tr, 1.0 + 1.0 / n)).collect();
        let noise = NoiseModel::new(1, 0.02, 0.5, 2).unwrap();
        let t = stability_experiment(&base, &seq, &noise, 4, SchemeOptions::default(), 0.0).unwrap();
        assert!(t.decreasing);
        // D ∝ (a − 1)² for small perturbations: doubling n divides by ≈ 4
        let r = t.rows[3].distance / t.rows[2].distance;
        assert!((r - 0.25).abs() < 0.05, "{r}");
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        let tr = SpectralTriple::new(1, 16, 2.0, Order::One).unwrap();
        let tr2 = SpectralTriple::new(1, 8, 2.0, Order::One).unwrap();
        let noise = NoiseModel::new(1, 0.1, 0.5, 2).unwrap();
        let r = stability_experiment(&heat(&tr, 1.0), &[heat(&tr2, 1.0)], &noise, 1, SchemeOptions::default(), 0.0);
        assert!(matches!(r, Err(Error::Config(_))));
    }
}
