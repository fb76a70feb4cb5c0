//! Residual of the tested integral identity
//! `(u_t, φ) = (u_{t₀}, φ) + ∫[−(a^{ij}D_j u + β^i u + 𝔣^i, D_iφ)
//!   + (b^i D_i u + c u + f + g, φ)]ds + ∫(σ^{ik}D_i u + ν^k u + h^k, φ)dw^k`
//! along a discrete path, with left-point sums in time.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::Trajectory;
use crate::field::StepContext;
use crate::profiles::gaussian_bump;
use crate::spde::coefficients::{SpdeCoefficients, SpdeForcing};
use crate::triple::SpectralTriple;

/// Smooth test functions with their gradients and `W¹₂` norms.
#[derive(Clone, Debug)]
pub struct TestSet {
    functions: Vec<Vec<f64>>,
    gradients: Vec<Vec<Vec<f64>>>,
    norms: Vec<f64>,
}

impl TestSet {
    pub fn new(triple: &SpectralTriple, functions: Vec<Vec<f64>>) -> Result<Self> {
        if functions.is_empty() {
            return Err(Error::Config("test set is empty".into()));
        }
        let mut gradients = Vec::with_capacity(functions.len());
        let mut norms = Vec::with_capacity(functions.len());
        for phi in &functions {
            triple.check_len(phi)?;
            let g = triple.gradient(phi);
            let sq = triple.l2_inner(phi, phi) + g.iter().map(|c| triple.l2_inner(c, c)).sum::<f64>();
            norms.push(sq.sqrt());
            gradients.push(g);
        }
        Ok(Self { functions, gradients, norms })
    }

    /// Fourier modes with every `|k_a| ≤ 1` (cosine and sine) and Gaussian
    /// bumps of width `L/8` at the origin and at the quarter points.
    pub fn standard(triple: &SpectralTriple) -> Self {
        let d = triple.dim();
        let l = triple.box_length();
        let w = 2.0 * std::f64::consts::PI / l;
        let mut functions = Vec::new();
        let count = 3usize.pow(d as u32);
        for code in 0..count {
            let mut k = [0i64; 3];
            let mut rest = code;
            for ka in k.iter_mut().take(d) {
                *ka = (rest % 3) as i64 - 1;
                rest /= 3;
            }
            // one representative of each ±k pair
            let first = k[..d].iter().find(|&&x| x != 0);
            if first.is_some_and(|&x| x < 0) {
                continue;
            }
            let phase = |idx: usize| -> f64 {
                let x = triple.node(idx);
                (0..d).map(|a| w * k[a] as f64 * x[a]).sum()
            };
            functions.push((0..triple.len()).map(|i| phase(i).cos()).collect());
            if first.is_some() {
                functions.push((0..triple.len()).map(|i| phase(i).sin()).collect());
            }
        }
        for shift in [0.0, 0.25, -0.25] {
            let center = vec![shift * l; d];
            functions.push(gaussian_bump(triple, &center, l / 8.0, 1.0));
        }
        Self::new(triple, functions).expect("nonempty battery")
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeakResidual {
    /// `max_φ max_t |R_t(φ)|/(1 + |φ|_{W¹₂})`
    pub max: f64,
    /// normalized residual per step, maximized over the test set
    pub series: Vec<f64>,
    pub start_step: usize,
}

/// States `u_n` on consecutive steps `start_step, start_step + 1, …` with the
/// full increment record from step 0.
#[derive(Clone, Copy, Debug)]
pub struct DiscretePath<'a> {
    pub dt: f64,
    pub channels: usize,
    pub start_step: usize,
    pub states: &'a [Vec<f64>],
    pub increments: &'a [f64],
}

pub fn weak_residual(
    triple: &SpectralTriple,
    coeffs: &SpdeCoefficients,
    forcing: &SpdeForcing,
    path: DiscretePath<'_>,
    tests: &TestSet,
) -> Result<WeakResidual> {
    let k = path.channels;
    let d = coeffs.dim;
    if k != coeffs.channels {
        return Err(Error::Config(format!("path has {k} channels, coefficients {}", coeffs.channels)));
    }
    let last = path.start_step + path.states.len();
    if path.states.is_empty() || path.increments.len() < (last - 1) * k {
        return Err(Error::Config("path is too short for the requested window".into()));
    }
    let mut wiener = vec![0.0; k];
    for n in 0..path.start_step {
        for c in 0..k {
            wiener[c] += path.increments[n * k + c];
        }
    }
    let nt = tests.len();
    let u0 = &path.states[0];
    let start: Vec<f64> = tests.functions.iter().map(|phi| triple.l2_inner(u0, phi)).collect();
    let mut integral = vec![0.0; nt];
    let mut series = vec![0.0];
    for (offset, u) in path.states.iter().enumerate().take(path.states.len() - 1) {
        let n = path.start_step + offset;
        let ctx = StepContext { t: n as f64 * path.dt, step: n, wiener: &wiener };
        let du = triple.gradient(u);
        let a = coeffs.diffusion.eval(&ctx);
        let beta = coeffs.divergence_drift.total(&ctx);
        let b = coeffs.drift.total(&ctx);
        let c = coeffs.reaction.total(&ctx);
        let sigma = coeffs.noise_gradient.eval(&ctx);
        let nu = coeffs.noise_reaction.total(&ctx);
        let len = u.len();
        // flux F_i = a^{ij}D_j u + β^i u + 𝔣^i, source S = b·Du + cu + f + g
        let mut flux = vec![vec![0.0; len]; d];
        let mut source = vec![0.0; len];
        for x in 0..len {
            for i in 0..d {
                let mut s = beta.component(i)[x] * u[x];
                for j in 0..d {
                    s += a.component(i * d + j)[x] * du[j][x];
                }
                flux[i][x] = s;
                source[x] += b.component(i)[x] * du[i][x];
            }
            source[x] += c.component(0)[x] * u[x];
        }
        if let Some(ff) = &forcing.divergence {
            let ff = ff.eval(&ctx);
            for (i, fl) in flux.iter_mut().enumerate() {
                crate::evolution::solver::add(fl, 1.0, ff.component(i));
            }
        }
        for f in [&forcing.source, &forcing.integrable].into_iter().flatten() {
            crate::evolution::solver::add(&mut source, 1.0, f.eval(&ctx).component(0));
        }
        let dw = &path.increments[n * k..(n + 1) * k];
        let mut noise = vec![0.0; len];
        for (ch, w) in dw.iter().enumerate() {
            if *w == 0.0 {
                continue;
            }
            for x in 0..len {
                let mut s = nu.component(ch)[x] * u[x];
                for i in 0..d {
                    s += sigma.component(i * k + ch)[x] * du[i][x];
                }
                noise[x] += w * s;
            }
        }
        if let Some(h) = &forcing.noise {
            let h = h.eval(&ctx);
            for (ch, w) in dw.iter().enumerate() {
                crate::evolution::solver::add(&mut noise, *w, h.component(ch));
            }
        }
        for (t, acc) in integral.iter_mut().enumerate() {
            let phi = &tests.functions[t];
            let mut drift = triple.l2_inner(&source, phi);
            for i in 0..d {
                drift -= triple.l2_inner(&flux[i], &tests.gradients[t][i]);
            }
            *acc += drift * path.dt + triple.l2_inner(&noise, phi);
        }
        for (c, w) in wiener.iter_mut().zip(dw) {
            *c += w;
        }
        let next = &path.states[offset + 1];
        let worst = (0..nt)
            .map(|t| {
                let r = triple.l2_inner(next, &tests.functions[t]) - start[t] - integral[t];
                r.abs() / (1.0 + tests.norms[t])
            })
            .fold(0.0, f64::max);
        series.push(worst);
    }
    let max = series.iter().copied().fold(0.0, f64::max);
    Ok(WeakResidual { max, series, start_step: path.start_step })
}

/// [`weak_residual`] on a solver trajectory that retained every state.
pub fn trajectory_weak_residual(
    triple: &SpectralTriple,
    coeffs: &SpdeCoefficients,
    forcing: &SpdeForcing,
    traj: &Trajectory,
    tests: &TestSet,
) -> Result<WeakResidual> {
    let steps = traj.steps();
    if traj.states.len() != steps + 1 || traj.states.iter().enumerate().any(|(i, (n, _))| *n != i) {
        return Err(Error::Config("the weak residual needs every state of the trajectory".into()));
    }
    let states: Vec<Vec<f64>> = traj.states.iter().map(|(_, u)| u.clone()).collect();
    let path = DiscretePath {
        dt: traj.dt,
        channels: traj.channels,
        start_step: 0,
        states: &states,
        increments: &traj.increments,
    };
    weak_residual(triple, coeffs, forcing, path, tests)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolution::{solve_with_increments, NoiseModel, Retention, SchemeOptions};
    use crate::field::{Field, FieldSeries};
    use crate::morrey::{Admissibility, AdmissibleField, MorreyParams};
    use crate::spde::assemble::{assemble_l2, AssemblyOptions};
    use crate::Order;

    fn params() -> MorreyParams {
        MorreyParams::new(2.5, 1.0, 1.0, Admissibility::Full).unwrap()
    }

    #[test]
    fn stationary_solution_has_zero_residual() {
        let tr = SpectralTriple::new(2, 16, 2.0 * std::f64::consts::PI, Order::One).unwrap();
        let mut c = SpdeCoefficients::isotropic(&tr, 1, 1.0, 0.0, params());
        c.reaction = AdmissibleField::bounded(FieldSeries::constant(Field::scalar(vec![-1.0; tr.len()])), params());
        let u = tr.sample(|x| (x[0]).sin() * (2.0 * x[1]).cos() + 0.5).into_values();
        let lap = tr.laplacian(&u);
        let f: Vec<f64> = u.iter().zip(&lap).map(|(a, l)| a - l).collect();
        let forcing = SpdeForcing { source: Some(FieldSeries::constant(Field::scalar(f))), ..SpdeForcing::none() };
        let states = vec![u.clone(); 6];
        let incs = vec![0.3; 5];
        let path = DiscretePath { dt: 0.1, channels: 1, start_step: 0, states: &states, increments: &incs };
        let r = weak_residual(&tr, &c, &forcing, path, &TestSet::standard(&tr)).unwrap();
        assert!(r.max < 1e-10, "{}", r.max);
    }

    #[test]
    fn heat_residual_shrinks_with_the_step() {
        let tr = SpectralTriple::new(1, 32, 2.0 * std::f64::consts::PI, Order::One).unwrap();
        let c = SpdeCoefficients::isotropic(&tr, 1, 1.0, 0.5, params());
        let asm = assemble_l2(&tr, &c, &SpdeForcing::none(), &AssemblyOptions::new(0.5).with_n0(0.0)).unwrap();
        let problem = asm.problem(tr.sample(|x| x[0].sin() + 0.5 * (2.0 * x[0]).cos()).into_values()).unwrap();
        let tests = TestSet::standard(&tr);
        let fine = NoiseModel::new(1, 1e-3, 0.5, 9).unwrap();
        let fine_incs = fine.path_increments(0);
        let mut residuals = Vec::new();
        for factor in [4usize, 2, 1] {
            let (coarse, incs) = fine.coarsen(&fine_incs, factor).unwrap();
            let traj =
                solve_with_increments(&problem, coarse.dt, incs, 0, SchemeOptions::default().retain(Retention::All))
                    .unwrap();
            residuals.push(trajectory_weak_residual(&tr, &c, &SpdeForcing::none(), &traj, &tests).unwrap().max);
        }
        assert!(residuals[0] > residuals[1] && residuals[1] > residuals[2], "{residuals:?}");
    }

    #[test]
    fn standard_battery_size() {
        let tr = SpectralTriple::new(2, 8, 4.0, Order::One).unwrap();
        // (9 − 1)/2 pairs of sine and cosine, the constant, three bumps
        assert_eq!(TestSet::standard(&tr).len(), 8 + 1 + 3);
    }
}
