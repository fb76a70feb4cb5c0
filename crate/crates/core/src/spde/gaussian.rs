//! Exact Gaussian solution `u_t(x) = exp(−|x+w_t|²/(2t))` of
//! `du = (Δu − κ (x+w_t)·Du/|x+w_t|²)dt + D_k u dw^k` with `κ = d/2`,
//! `σ = I` and `K = d`, and the drift family used to probe supercriticality.
//!
//! `u_0 = 0` and the equation carries no forcing, yet `u_t ≠ 0`: the
//! weighted `L₂` estimate cannot hold for this drift. The benchmark reports
//! this as an exhibit next to the closed-form norms
//! `|u_t|²_{L₂} = (πt)^{d/2}` and `|Du_t|²_{L₂} = (d/2)π^{d/2}t^{d/2−1}`.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::evolution::report::{assemble as assemble_report, PathTerms};
use crate::evolution::{solve_ensemble, EstimateReport, NoiseModel, SchemeOptions};
use crate::field::{Envelope, FieldSeries};
use crate::morrey::{AdmissibleField, Admissibility, BallSampler, CenterSet, MorreyParams};
use crate::profiles::{comoving_radial_drift, gaussian_bump, radial_drift, Cutoff};
use crate::spde::assemble::{assemble_l2, AssemblyOptions};
use crate::spde::coefficients::{SpdeCoefficients, SpdeForcing};
use crate::spde::estimates::{l2_report, l2_weight, WeightConstants, L2_LHS, L2_RHS};
use crate::spde::weak::{weak_residual, DiscretePath, TestSet};
use crate::triple::{Order, SpectralTriple};

/// Largest admissible mass of `u_t²` outside the box, relative to the total.
pub const MASS_TOLERANCE: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaussianConfig {
    pub dim: usize,
    pub box_length: f64,
    /// points per axis for the norm checks and the exhibit
    pub grid: usize,
    pub times: Vec<f64>,
    pub seed: u64,
    /// finest time step; every time used must be a whole number of steps
    pub dt: f64,
    pub ladder: LadderConfig,
    pub weights: WeightConstants,
    /// Morrey exponent for the drift scan when `d ≥ 3`
    pub r: f64,
    pub rho0: f64,
}

impl Default for GaussianConfig {
    fn default() -> Self {
        Self {
            dim: 1,
            box_length: 16.0,
            grid: 128,
            times: vec![0.5, 1.0, 2.0],
            seed: 7,
            dt: 1.0 / 256.0,
            ladder: LadderConfig::default(),
            weights: WeightConstants::default(),
            r: 2.5,
            rho0: 1.0,
        }
    }
}

/// Refinement ladder for the weak residual: level `ℓ` uses `grid·2^ℓ` points
/// and step `dt_coarse/4^ℓ` on `[t0, t_final]`, all driven by one path.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LadderConfig {
    pub grid: usize,
    pub dt_coarse: f64,
    pub levels: usize,
    pub t0: f64,
    pub t_final: f64,
}

impl Default for LadderConfig {
    fn default() -> Self {
        Self { grid: 32, dt_coarse: 1.0 / 16.0, levels: 3, t0: 0.5, t_final: 1.5 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormSample {
    pub t: f64,
    pub l2_sq: f64,
    pub l2_sq_exact: f64,
    pub l2_rel_error: f64,
    pub gradient_sq: f64,
    pub gradient_sq_exact: f64,
    pub gradient_rel_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LadderLevel {
    pub grid: usize,
    pub dt: f64,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianReport {
    pub dim: usize,
    pub box_length: f64,
    pub grid: usize,
    /// bound on the fraction of `∫u_t²` outside the box at the largest time
    pub boundary_mass: f64,
    pub samples: Vec<NormSample>,
    pub l2_power_fit: f64,
    pub gradient_power_fit: f64,
    pub l2_power_expected: f64,
    pub gradient_power_expected: f64,
    pub weak_ladder: Vec<LadderLevel>,
    pub ladder_decreasing: bool,
    /// the weighted `L₂` estimate on the exact solution: positive left side,
    /// vanishing right side
    pub sharpness: EstimateReport,
    /// Morrey hat of `|b| = κ/|x|` by ball scan, when `d ≥ 3`
    pub drift_hat: Option<f64>,
}

/// `(πt)^{d/2}`.
pub fn exact_l2_sq(dim: usize, t: f64) -> f64 {
    (std::f64::consts::PI * t).powf(dim as f64 / 2.0)
}

/// `(d/2)π^{d/2}t^{d/2−1}`.
pub fn exact_gradient_sq(dim: usize, t: f64) -> f64 {
    let h = dim as f64 / 2.0;
    h * std::f64::consts::PI.powf(h) * t.powf(h - 1.0)
}

/// Union bound `d·erfc(L/(2√t))` on the relative mass of `u_t²` outside the
/// box centered on the bump.
pub fn boundary_mass(dim: usize, box_length: f64, t: f64) -> f64 {
    dim as f64 * erfc(box_length / (2.0 * t.sqrt()))
}

/// `u_t` on the grid for the Wiener value `w`.
pub fn exact_solution(triple: &SpectralTriple, t: f64, w: &[f64]) -> Vec<f64> {
    let center: Vec<f64> = w[..triple.dim()].iter().map(|v| -v).collect();
    gaussian_bump(triple, &center, t.sqrt(), 1.0)
}

/// Least-squares slope of `log y` against `log t`.
pub fn power_fit(t: &[f64], y: &[f64]) -> f64 {
    let n = t.len() as f64;
    let lx: Vec<f64> = t.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Cutoff pushed to the box edge so the drift is unchanged where `u` lives.
fn edge_cutoff(box_length: f64) -> Cutoff {
    Cutoff { inner: 0.4 * box_length, outer: 0.5 * box_length }
}

/// Whether a radial drift stays at the origin or rides the Wiener path.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DriftMotion {
    Static,
    /// centered at `−w_t` over the first `d` channels
    Comoving,
}

/// Inward drift `−κy/|y|²` about the origin (or `−w_t`), cut off near the
/// box edge, with its hat certified by a ball scan about the singular node.
/// Needs `d ≥ 3`: below that no admissible exponent exists.
pub fn radial_drift_coefficient(
    triple: &SpectralTriple,
    kappa: f64,
    motion: DriftMotion,
    params: MorreyParams,
) -> Result<AdmissibleField> {
    let d = triple.dim();
    if d < 3 {
        return Err(Error::Config(format!("a singular drift needs d >= 3, got d = {d}")));
    }
    let cutoff = edge_cutoff(triple.box_length());
    let drift = match motion {
        DriftMotion::Static => FieldSeries::constant(radial_drift(triple, &vec![0.0; d], -kappa, cutoff)),
        DriftMotion::Comoving => comoving_radial_drift(triple, -kappa, cutoff),
    };
    // |b| is radially decreasing about the node at the origin, where every
    // ball mean peaks
    let sampler = BallSampler::ladder(triple, params.rho0, 4, CenterSet::Nodes(vec![0]));
    AdmissibleField::certify(triple, drift, FieldSeries::zeros(triple.len(), d), params, &sampler)
}

/// `a = I`, `σ = I` with `K = d`, drift `−κ(x+w_t)/|x+w_t|²` as its singular
/// part. The hat is certified by ball scan when `d ≥ 3` and left at zero
/// otherwise.
pub fn drift_family(triple: &SpectralTriple, kappa: f64, params: MorreyParams) -> Result<SpdeCoefficients> {
    let d = triple.dim();
    let mut c = SpdeCoefficients::isotropic(triple, d, 1.0, 1.0, params);
    c.drift = if d >= 3 {
        radial_drift_coefficient(triple, kappa, DriftMotion::Comoving, params)?
    } else {
        AdmissibleField {
            singular: comoving_radial_drift(triple, -kappa, edge_cutoff(triple.box_length())),
            bounded: FieldSeries::zeros(triple.len(), d),
            hat: 0.0,
            bar: Envelope::Constant(0.0),
            params,
        }
    };
    Ok(c)
}

fn whole_steps(t: f64, dt: f64, what: &str) -> Result<usize> {
    let r = t / dt;
    let n = r.round();
    if (r - n).abs() > 1e-9 * r.max(1.0) {
        return Err(Error::Config(format!("{what} {t} is not a whole number of steps {dt}")));
    }
    Ok(n as usize)
}

fn validate(cfg: &GaussianConfig) -> Result<()> {
    if !(1..=3).contains(&cfg.dim) {
        return Err(Error::Domain(format!("dimension must be 1, 2 or 3, got {}", cfg.dim)));
    }
    let l = &cfg.ladder;
    if cfg.times.len() < 2 || cfg.times.iter().any(|t| !(*t > 0.0)) {
        return Err(Error::Config("need at least two positive sample times".into()));
    }
    if l.levels < 2 || !(l.t0 > 0.0 && l.t_final > l.t0) {
        return Err(Error::Config("ladder needs two levels and 0 < t0 < t_final".into()));
    }
    let fine = l.dt_coarse / 4f64.powi(l.levels as i32 - 1);
    if (fine - cfg.dt).abs() > 1e-12 * cfg.dt {
        return Err(Error::Config(format!("finest ladder step {fine} differs from dt {}", cfg.dt)));
    }
    Ok(())
}

pub fn gaussian_benchmark(cfg: &GaussianConfig) -> Result<GaussianReport> {
    validate(cfg)?;
    let d = cfg.dim;
    let t_max = cfg.times.iter().copied().fold(cfg.ladder.t_final, f64::max);
    let mass = boundary_mass(d, cfg.box_length, t_max);
    if mass >= MASS_TOLERANCE {
        return Err(Error::Domain(format!(
            "box {} leaks Gaussian mass {mass:.3e} at t = {t_max}; need < {MASS_TOLERANCE:e}",
            cfg.box_length
        )));
    }
    let noise = NoiseModel::new(d, cfg.dt, whole_steps(t_max, cfg.dt, "time")? as f64 * cfg.dt, cfg.seed)?;
    let increments = noise.path_increments(0);
    let wiener = crate::evolution::solver::wiener_path(&increments, d);
    let params = MorreyParams::new(cfg.r, cfg.rho0, 1.0, Admissibility::Full)?;
    let triple = SpectralTriple::new(d, cfg.grid, cfg.box_length, Order::One)?;

    let mut samples = Vec::with_capacity(cfg.times.len());
    for &t in &cfg.times {
        let n = whole_steps(t, cfg.dt, "sample time")?;
        let u = exact_solution(&triple, t, &wiener[n * d..(n + 1) * d]);
        let l2_sq = triple.l2_inner(&u, &u);
        let gradient_sq: f64 = triple.gradient(&u).iter().map(|g| triple.l2_inner(g, g)).sum();
        let (l2_ex, gr_ex) = (exact_l2_sq(d, t), exact_gradient_sq(d, t));
        samples.push(NormSample {
            t,
            l2_sq,
            l2_sq_exact: l2_ex,
            l2_rel_error: (l2_sq - l2_ex).abs() / l2_ex,
            gradient_sq,
            gradient_sq_exact: gr_ex,
            gradient_rel_error: (gradient_sq - gr_ex).abs() / gr_ex,
        });
    }
    let ts: Vec<f64> = samples.iter().map(|s| s.t).collect();
    let l2_power_fit = power_fit(&ts, &samples.iter().map(|s| s.l2_sq).collect::<Vec<_>>());
    let gradient_power_fit = power_fit(&ts, &samples.iter().map(|s| s.gradient_sq).collect::<Vec<_>>());

    let weak_ladder = weak_ladder(cfg, &noise, &increments, params)?;
    let ladder_decreasing = weak_ladder.windows(2).all(|w| w[1].residual < w[0].residual);
    let sharpness = sharpness_exhibit(cfg, &triple, &wiener, params)?;
    let drift_hat = if d >= 3 {
        let p = MorreyParams::admissibility(d, cfg.r, cfg.rho0)?;
        Some(drift_family(&triple, d as f64 / 2.0, p)?.drift.hat)
    } else {
        None
    };
    Ok(GaussianReport {
        dim: d,
        box_length: cfg.box_length,
        grid: cfg.grid,
        boundary_mass: mass,
        samples,
        l2_power_fit,
        gradient_power_fit,
        l2_power_expected: d as f64 / 2.0,
        gradient_power_expected: d as f64 / 2.0 - 1.0,
        weak_ladder,
        ladder_decreasing,
        sharpness,
        drift_hat,
    })
}

/// Weak residual of the exact solution on `[t0, t_final]` per ladder level,
/// coarsest first.
fn weak_ladder(cfg: &GaussianConfig, fine: &NoiseModel, increments: &[f64], params: MorreyParams) -> Result<Vec<LadderLevel>> {
    let l = &cfg.ladder;
    let d = cfg.dim;
    let mut levels = Vec::with_capacity(l.levels);
    for level in 0..l.levels {
        let factor = 4usize.pow((l.levels - 1 - level) as u32);
        let (coarse, incs) = fine.coarsen(increments, factor)?;
        let grid = l.grid << level;
        let triple = SpectralTriple::new(d, grid, cfg.box_length, Order::One)?;
        let coeffs = drift_family(&triple, d as f64 / 2.0, params)?;
        let start = whole_steps(l.t0, coarse.dt, "ladder start")?;
        let end = whole_steps(l.t_final, coarse.dt, "ladder end")?;
        let w = crate::evolution::solver::wiener_path(&incs, d);
        let states: Vec<Vec<f64>> =
            (start..=end).map(|n| exact_solution(&triple, n as f64 * coarse.dt, &w[n * d..(n + 1) * d])).collect();
        let path = DiscretePath { dt: coarse.dt, channels: d, start_step: start, states: &states, increments: &incs };
        let r = weak_residual(&triple, &coeffs, &SpdeForcing::none(), path, &TestSet::standard(&triple))?;
        levels.push(LadderLevel { grid, dt: coarse.dt, residual: r.max });
    }
    Ok(levels)
}

/// Left and right sides of the weighted `L₂` estimate on the exact solution
/// over `[0, t_final]`, with `u_0 = 0` and no forcing.
fn sharpness_exhibit(
    cfg: &GaussianConfig,
    triple: &SpectralTriple,
    wiener: &[f64],
    params: MorreyParams,
) -> Result<EstimateReport> {
    let d = cfg.dim;
    let steps = whole_steps(cfg.ladder.t_final, cfg.dt, "exhibit horizon")?;
    let coeffs = drift_family(triple, d as f64 / 2.0, params)?;
    let weights = l2_weight(&coeffs, &cfg.weights, cfg.dt, steps)?;
    let phi = weights.phi();
    let (mut sup, mut v_int, mut a_int) = (0.0f64, 0.0, 0.0);
    for n in 1..=steps {
        let u = exact_solution(triple, n as f64 * cfg.dt, &wiener[n * d..(n + 1) * d]);
        let (h, v) = triple.norms_sq(&u);
        let e = (-2.0 * phi[n]).exp();
        sup = sup.max(e * h);
        v_int += e * v * cfg.dt;
        a_int += weights.rate(n - 1) * e * h * cfg.dt;
    }
    let terms = PathTerms { lhs: vec![sup, v_int, a_int], rhs: vec![0.0; L2_RHS.len()] };
    Ok(assemble_report("l2_sharpness", &L2_LHS, &L2_RHS, &[terms], 0, cfg.dt, Vec::new()))
}

/// The drift family `−κ(x+w_t)/|x+w_t|²` solved from a Gaussian bump with
/// the smallness gate off, for sweeps of `κ` toward `d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProbeConfig {
    pub dim: usize,
    pub grid: usize,
    pub box_length: f64,
    pub dt: f64,
    pub t_final: f64,
    pub n_paths: usize,
    pub seed: u64,
    /// width of the initial bump
    pub width: f64,
    pub delta: f64,
    pub r: f64,
    pub rho0: f64,
    pub weights: WeightConstants,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            dim: 3,
            grid: 16,
            box_length: 2.0,
            dt: 0.01,
            t_final: 0.5,
            n_paths: 8,
            seed: 11,
            width: 0.3,
            delta: 0.5,
            r: 2.5,
            rho0: 1.0,
            weights: WeightConstants::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbePoint {
    pub kappa: f64,
    pub drift_hat: f64,
    pub n0: f64,
    pub report: EstimateReport,
}

pub fn supercritical_probe(cfg: &ProbeConfig, kappa: f64) -> Result<ProbePoint> {
    let d = cfg.dim;
    let triple = SpectralTriple::new(d, cfg.grid, cfg.box_length, Order::One)?;
    let params = if d >= 3 {
        MorreyParams::admissibility(d, cfg.r, cfg.rho0)?
    } else {
        MorreyParams::new(cfg.r, cfg.rho0, 1.0, Admissibility::Full)?
    };
    let coeffs = drift_family(&triple, kappa, params)?;
    let options = AssemblyOptions::new(cfg.delta).with_gate(false);
    let asm = assemble_l2(&triple, &coeffs, &SpdeForcing::none(), &options)?;
    let u0 = gaussian_bump(&triple, &vec![0.0; d], cfg.width, 1.0);
    let problem = asm.problem(u0)?;
    let noise = NoiseModel::new(d, cfg.dt, cfg.t_final, cfg.seed)?;
    let ensemble = solve_ensemble(&problem, &noise, cfg.n_paths, SchemeOptions::default())?;
    let weights = l2_weight(&coeffs, &cfg.weights, noise.dt, noise.steps)?;
    let report = l2_report(&ensemble, &triple, &SpdeForcing::none(), &weights)?;
    Ok(ProbePoint { kappa, drift_hat: coeffs.drift.hat, n0: asm.constants.n0, report })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_forms_match_direct_quadrature() {
        // independent check by a fine midpoint rule in d = 1
        let t = 0.7;
        let (n, half) = (200_000, 20.0);
        let h = 2.0 * half / n as f64;
        let (mut m, mut g) = (0.0, 0.0);
        for i in 0..n {
            let x = -half + (i as f64 + 0.5) * h;
            let u = (-x * x / (2.0 * t)).exp();
            m += u * u * h;
            g += (x / t * u).powi(2) * h;
        }
        assert!((m - exact_l2_sq(1, t)).abs() < 1e-9);
        assert!((g - exact_gradient_sq(1, t)).abs() < 1e-9);
        // d-dimensional forms factor over axes
        assert!((exact_l2_sq(3, t) - m.powi(3)).abs() < 1e-8);
        assert!((exact_gradient_sq(2, t) - 2.0 * g * m).abs() < 1e-8);
    }

    #[test]
    fn power_fit_recovers_exponents() {
        let t = [0.5, 1.0, 2.0, 4.0];
        let y: Vec<f64> = t.iter().map(|s: &f64| 3.0 * s.powf(1.25)).collect();
        assert!((power_fit(&t, &y) - 1.25).abs() < 1e-12);
    }

    #[test]
    fn small_box_is_refused() {
        let cfg = GaussianConfig { box_length: 6.0, ..GaussianConfig::default() };
        assert!(matches!(gaussian_benchmark(&cfg), Err(Error::Domain(_))));
    }

    #[test]
    fn one_dimensional_benchmark() {
        let r = gaussian_benchmark(&GaussianConfig::default()).unwrap();
        for s in &r.samples {
            assert!(s.l2_rel_error < 1e-6, "{s:?}");
            assert!(s.gradient_rel_error < 1e-6, "{s:?}");
        }
        assert!((r.l2_power_fit - 0.5).abs() < 1e-6);
        assert!((r.gradient_power_fit + 0.5).abs() < 1e-6);
        assert!(r.ladder_decreasing, "{:?}", r.weak_ladder);
        assert!(r.sharpness.lhs > 0.0 && r.sharpness.rhs == 0.0 && r.sharpness.ratio.is_none());
        assert!(r.drift_hat.is_none());
    }

    #[test]
    fn stronger_drift_inflates_the_ratio() {
        let cfg = ProbeConfig { grid: 8, t_final: 0.2, n_paths: 2, ..ProbeConfig::default() };
        let weak = supercritical_probe(&cfg, 0.5).unwrap();
        let strong = supercritical_probe(&cfg, 3.0).unwrap();
        assert!(strong.drift_hat > weak.drift_hat);
        assert!(strong.report.ratio.unwrap() > weak.report.ratio.unwrap());
    }
}


