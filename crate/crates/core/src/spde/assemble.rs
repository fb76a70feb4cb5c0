//! Abstract operators `A, B, 𝔞, 𝔞*, 𝔟, 𝔠` and data `f*, g, h` built from
//! SPDE coefficients, on the `(L₂, W¹₂)` pair and on the `(W¹₂, W²₂)` pair.
//!
//! Singular parts go into the principal pair, bounded parts into the
//! lower-order set. A shift `κ₀ = N₀ρ₀⁻² + δ` is subtracted from `A` and
//! returned through `𝔠`, so the sum of all operators is the SPDE generator.

use std::borrow::Cow;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::{
    ChannelOperator, CoercivityProbe, CoercivityReport, DualOperator, EvolutionProblem, ForcingSet, FrozenChannels,
    FrozenDual, LowerOrderBounds, LowerOrderSet, OperatorPair, OwnedContext,
};
use crate::field::{Envelope, Field, FieldSeries, StepContext};
use crate::spde::coefficients::{EllipticityReport, HatSum, SpdeCoefficients, SpdeForcing};
use crate::triple::{Order, SpectralTriple};

#[derive(Clone, Debug)]
pub struct AssemblyOptions {
    /// ellipticity constant `δ`
    pub delta: f64,
    /// smallness threshold for the hat sum
    pub theta: f64,
    pub enforce_gate: bool,
    /// fixed `N₀`; fitted by doubling when absent
    pub n0: Option<f64>,
    pub probe: CoercivityProbe,
    /// times at which ellipticity and coercivity are sampled
    pub times: Vec<f64>,
}

impl AssemblyOptions {
    pub fn new(delta: f64) -> Self {
        Self { delta, theta: 0.1, enforce_gate: true, n0: None, probe: CoercivityProbe::default(), times: vec![0.0] }
    }

    pub fn with_theta(mut self, theta: f64) -> Self {
        self.theta = theta;
        self
    }

    pub fn with_gate(mut self, enforce: bool) -> Self {
        self.enforce_gate = enforce;
        self
    }

    pub fn with_n0(mut self, n0: f64) -> Self {
        self.n0 = Some(n0);
        self
    }

    pub fn with_times(mut self, times: Vec<f64>) -> Self {
        self.times = times;
        self
    }
}

/// Constants fixed at assembly, written next to every report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssemblyConstants {
    pub order: u32,
    pub delta: f64,
    pub n0: f64,
    pub kappa0: f64,
    pub coercivity: f64,
    pub required_coercivity: f64,
    pub drift_bound: f64,
    pub noise_bound: f64,
    pub hats: HatSum,
    pub ellipticity: EllipticityReport,
}

/// Operators and data of one SPDE on one triple.
#[derive(Clone)]
pub struct Assembly {
    pub triple: SpectralTriple,
    pub ops: OperatorPair,
    pub lower: LowerOrderSet,
    pub forcing: ForcingSet,
    pub constants: AssemblyConstants,
    pub coercivity: CoercivityReport,
}

impl Assembly {
    pub fn problem(&self, initial: Vec<f64>) -> Result<EvolutionProblem> {
        EvolutionProblem::new(&self.triple, self.ops.clone(), self.lower.clone(), self.forcing.clone(), initial)
    }
}

/// Dispatches on the order of the triple.
pub fn assemble(
    triple: &SpectralTriple,
    coeffs: &SpdeCoefficients,
    forcing: &SpdeForcing,
    options: &AssemblyOptions,
) -> Result<Assembly> {
    match triple.order() {
        Order::One => assemble_l2(triple, coeffs, forcing, options),
        Order::Two => assemble_w12(triple, coeffs, forcing, options),
    }
}

/// Assembly on `H = L₂`, `V = W¹₂`; certified coercivity is at least `δ/4`.
pub fn assemble_l2(
    triple: &SpectralTriple,
    coeffs: &SpdeCoefficients,
    forcing: &SpdeForcing,
    options: &AssemblyOptions,
) -> Result<Assembly> {
    if triple.order() != Order::One {
        return Err(Error::Config("the L2 assembly needs a triple of order 1".into()));
    }
    let (hats, ellipticity) = preflight(triple, coeffs, forcing, options, false)?;
    let (shared, coercivity, n0) = fit_shift(triple, coeffs, options, options.delta / 4.0)?;
    let c = &shared.coeffs;
    let kappa0 = shared.kappa0;
    let ops = pair(&shared, options.delta / 4.0, &coercivity)?;
    let lower = LowerOrderSet {
        gradient: nonzero(&c.drift.bounded, Part::Gradient, &shared),
        dual: nonzero(&c.divergence_drift.bounded, Part::DualL2, &shared),
        noise: (!c.noise_reaction.bounded.is_identically_zero())
            .then(|| Arc::new(NoiseOp { shared: shared.clone(), lower: true }) as Arc<dyn ChannelOperator>),
        reaction: Some(Arc::new(LowerOp { shared: shared.clone(), part: Part::ReactionL2 })),
        bounds: LowerOrderBounds {
            gradient: c.drift.bar.clone(),
            dual: c.divergence_drift.bar.clone(),
            noise: c.noise_reaction.bar.clone(),
            reaction: c.reaction.bar.plus(kappa0),
        },
    };
    let dual = {
        let mut parts = Vec::new();
        if let Some(f) = &forcing.source {
            parts.push(f.clone());
        }
        if let Some(ff) = &forcing.divergence {
            let tr = triple.clone();
            parts.push(ff.map(move |x| Field::scalar(tr.divergence(x.components()))));
        }
        match parts.len() {
            0 => None,
            1 => parts.pop(),
            _ => Some(FieldSeries::sum(parts)?),
        }
    };
    let forcing_set =
        ForcingSet { dual, weighted: None, integrable: forcing.integrable.clone(), noise: forcing.noise.clone() };
    Ok(finish(triple, ops, lower, forcing_set, coercivity, 1, options, n0, kappa0, hats, ellipticity))
}

/// Assembly on `H = W¹₂`, `V = W²₂`; needs `β = 𝔣 = 0` and derivative
/// data; certified coercivity is at least `δ/2`.
pub fn assemble_w12(
    triple: &SpectralTriple,
    coeffs: &SpdeCoefficients,
    forcing: &SpdeForcing,
    options: &AssemblyOptions,
) -> Result<Assembly> {
    if triple.order() != Order::Two {
        return Err(Error::Config("the W12 assembly needs a triple of order 2".into()));
    }
    let der = coeffs
        .derivatives
        .as_ref()
        .ok_or_else(|| Error::Config("the W12 assembly needs derivative fields Da, Dsigma, Dnu".into()))?;
    if !coeffs.divergence_drift.is_zero() {
        return Err(Error::Config("the W12 assembly needs beta = 0".into()));
    }
    if forcing.divergence.as_ref().is_some_and(|f| !f.is_identically_zero()) {
        return Err(Error::Config("the W12 assembly needs a vanishing divergence forcing".into()));
    }
    let (hats, ellipticity) = preflight(triple, coeffs, forcing, options, true)?;
    let (shared, coercivity, n0) = fit_shift(triple, coeffs, options, options.delta / 2.0)?;
    let c = &shared.coeffs;
    let kappa0 = shared.kappa0;
    let ops = pair(&shared, options.delta / 2.0, &coercivity)?;
    let sum = |parts: &[&Envelope]| Envelope::combine(parts, |v| v.iter().sum());
    let lower = LowerOrderSet {
        gradient: None,
        dual: Some(Arc::new(LowerOp { shared: shared.clone(), part: Part::DualW12 })),
        noise: Some(Arc::new(NoiseOp { shared: shared.clone(), lower: true })),
        reaction: Some(Arc::new(LowerOp { shared: shared.clone(), part: Part::ReactionW12 })),
        bounds: LowerOrderBounds {
            gradient: Envelope::Constant(0.0),
            dual: sum(&[&c.drift.bar, &c.reaction.bar, &der.diffusion.bar]),
            noise: sum(&[&c.noise_reaction.bar, &der.noise_gradient.bar, &der.noise_reaction.bar]),
            reaction: Envelope::Constant(kappa0),
        },
    };
    let dual = forcing.source.as_ref().map(|f| {
        let tr = triple.clone();
        f.map(move |x| Field::scalar(tr.h_representative(x.component(0))))
    });
    let forcing_set =
        ForcingSet { dual, weighted: None, integrable: forcing.integrable.clone(), noise: forcing.noise.clone() };
    Ok(finish(triple, ops, lower, forcing_set, coercivity, 2, options, n0, kappa0, hats, ellipticity))
}

fn preflight(
    triple: &SpectralTriple,
    coeffs: &SpdeCoefficients,
    forcing: &SpdeForcing,
    options: &AssemblyOptions,
    with_derivatives: bool,
) -> Result<(HatSum, EllipticityReport)> {
    let delta = options.delta;
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::Domain(format!("ellipticity constant must lie in (0, 1], got {delta}")));
    }
    coeffs.validate(triple)?;
    forcing.validate(triple, coeffs.channels)?;
    let ellipticity = coeffs.check_ellipticity(delta, &options.times);
    if !ellipticity.satisfied {
        return Err(Error::Ellipticity { margin: ellipticity.margin, size: ellipticity.size, delta });
    }
    let hats = coeffs.hat_sum(with_derivatives);
    if options.enforce_gate && hats.sum > options.theta {
        return Err(Error::GateRefused { sum: hats.sum, threshold: options.theta, detail: hats.describe() });
    }
    Ok((hats, ellipticity))
}

/// Tries `N₀ = 0, 1, 2, 4, …, 2¹⁶` until the probe certifies `required`.
fn fit_shift(
    triple: &SpectralTriple,
    coeffs: &SpdeCoefficients,
    options: &AssemblyOptions,
    required: f64,
) -> Result<(Arc<Shared>, CoercivityReport, f64)> {
    let rho0 = coeffs.drift.params.rho0;
    let candidates: Vec<f64> = match options.n0 {
        Some(n0) if n0 >= 0.0 && n0.is_finite() => vec![n0],
        Some(n0) => return Err(Error::Domain(format!("N0 must be nonnegative, got {n0}"))),
        None => std::iter::once(0.0).chain((0..=16).map(|j| f64::from(1u32 << j))).collect(),
    };
    let mut last = None;
    for n0 in candidates {
        let shared = Arc::new(Shared {
            triple: triple.clone(),
            coeffs: coeffs.clone(),
            kappa0: n0 / (rho0 * rho0) + options.delta,
        });
        let probe_pair = OperatorPair::new(
            Arc::new(Principal { shared: shared.clone() }),
            Arc::new(NoiseOp { shared: shared.clone(), lower: false }),
            required,
        )?
        .with_bounds(f64::INFINITY, 1.0);
        let report = options.probe.check(triple, &probe_pair, &options.times)?;
        if report.estimate >= required {
            return Ok((shared, report, n0));
        }
        last = Some(report);
    }
    let estimate = last.map_or(f64::NEG_INFINITY, |r| r.estimate);
    Err(Error::Coercivity { estimate, required })
}

fn pair(shared: &Arc<Shared>, delta: f64, report: &CoercivityReport) -> Result<OperatorPair> {
    Ok(OperatorPair::new(
        Arc::new(Principal { shared: shared.clone() }),
        Arc::new(NoiseOp { shared: shared.clone(), lower: false }),
        delta,
    )?
    .with_bounds(report.drift_ratio, report.noise_ratio))
}

#[allow(clippy::too_many_arguments)]
fn finish(
    triple: &SpectralTriple,
    ops: OperatorPair,
    lower: LowerOrderSet,
    forcing: ForcingSet,
    coercivity: CoercivityReport,
    order: u32,
    options: &AssemblyOptions,
    n0: f64,
    kappa0: f64,
    hats: HatSum,
    ellipticity: EllipticityReport,
) -> Assembly {
    let constants = AssemblyConstants {
        order,
        delta: options.delta,
        n0,
        kappa0,
        coercivity: coercivity.estimate,
        required_coercivity: ops.delta,
        drift_bound: ops.bound,
        noise_bound: ops.noise_bound,
        hats,
        ellipticity,
    };
    Assembly { triple: triple.clone(), ops, lower, forcing, constants, coercivity }
}

fn nonzero(series: &FieldSeries, part: Part, shared: &Arc<Shared>) -> Option<Arc<dyn DualOperator>> {
    (!series.is_identically_zero())
        .then(|| Arc::new(LowerOp { shared: shared.clone(), part }) as Arc<dyn DualOperator>)
}

struct Shared {
    triple: SpectralTriple,
    coeffs: SpdeCoefficients,
    kappa0: f64,
}

fn live<'a>(series: &'a FieldSeries, ctx: &StepContext<'_>) -> Option<Cow<'a, Field>> {
    if series.is_identically_zero() {
        return None;
    }
    let f = series.eval(ctx);
    (!f.is_zero()).then_some(f)
}

fn axpy_product(acc: &mut [f64], coeff: &[f64], x: &[f64]) {
    for ((a, c), v) in acc.iter_mut().zip(coeff).zip(x) {
        *a += c * v;
    }
}

/// Adds `ξ_k ξ_i F̂` to `acc`, the symbol of `−D_k D_i F`.
fn add_second_order(tr: &SpectralTriple, acc: &mut [Complex64], f: &[f64], k: usize, i: usize) {
    let c = tr.forward(f);
    let (dk, di) = (tr.derivative_symbol(k), tr.derivative_symbol(i));
    for n in 0..acc.len() {
        acc[n] += c[n] * (dk[n] * di[n]);
    }
}

/// Splits `a` into its spatial mean (or common value) and the remainder.
fn split_diffusion(a: &Field) -> (Vec<f64>, Option<Vec<Vec<f64>>>) {
    let mut mean = Vec::with_capacity(a.n_components());
    let mut constant = true;
    for comp in a.components() {
        let first = comp.first().copied().unwrap_or(0.0);
        if comp.iter().any(|v| *v != first) {
            constant = false;
        }
        mean.push(comp.iter().sum::<f64>() / comp.len() as f64);
    }
    if constant {
        return (a.components().iter().map(|c| c[0]).collect(), None);
    }
    let rest = a.components().iter().zip(&mean).map(|(c, m)| c.iter().map(|v| v - m).collect()).collect();
    (mean, Some(rest))
}

struct Principal {
    shared: Arc<Shared>,
}

struct FrozenPrincipal<'a> {
    sh: &'a Shared,
    base: Vec<f64>,
    exposes_symbol: bool,
    var_a: Option<Vec<Vec<f64>>>,
    drift: Option<Cow<'a, Field>>,
    div_drift: Option<Cow<'a, Field>>,
    reaction: Option<Cow<'a, Field>>,
    da: Option<Cow<'a, Field>>,
}

impl DualOperator for Principal {
    fn at<'a>(&'a self, ctx: &StepContext<'_>) -> Box<dyn FrozenDual + 'a> {
        let sh = self.shared.as_ref();
        let tr = &sh.triple;
        let c = &sh.coeffs;
        let d = c.dim;
        let (abar, var_a) = split_diffusion(&c.diffusion.eval(ctx));
        let order = tr.order();
        let base: Vec<f64> = (0..tr.len())
            .map(|n| {
                let mut s = -sh.kappa0;
                for i in 0..d {
                    for j in 0..d {
                        let xx = if i == j {
                            tr.wavenumbers(i)[n] * tr.wavenumbers(i)[n]
                        } else {
                            tr.derivative_symbol(i)[n] * tr.derivative_symbol(j)[n]
                        };
                        s -= abar[i * d + j] * xx;
                    }
                }
                s * tr.h_weights()[n]
            })
            .collect();
        let drift = live(&c.drift.singular, ctx);
        let div_drift = if order == Order::One { live(&c.divergence_drift.singular, ctx) } else { None };
        let reaction = live(&c.reaction.singular, ctx);
        let da = match (&c.derivatives, order) {
            (Some(der), Order::Two) => live(&der.diffusion.singular, ctx),
            _ => None,
        };
        let exposes_symbol =
            var_a.is_none() && drift.is_none() && div_drift.is_none() && reaction.is_none() && da.is_none();
        Box::new(FrozenPrincipal { sh, base, exposes_symbol, var_a, drift, div_drift, reaction, da })
    }
}

impl FrozenDual for FrozenPrincipal<'_> {
    fn apply(&self, v: &[f64]) -> Vec<f64> {
        let tr = &self.sh.triple;
        let d = self.sh.coeffs.dim;
        let spec = tr.forward(v);
        let mut acc: Vec<Complex64> = spec.iter().zip(&self.base).map(|(z, s)| z * s).collect();
        if self.exposes_symbol {
            return tr.inverse_in_place(&mut acc);
        }
        let grad = tr.gradient_from_spectrum(&spec);
        // pointwise part b·Dv + c v
        let mut pointwise = vec![0.0; v.len()];
        if let Some(b) = &self.drift {
            for i in 0..d {
                axpy_product(&mut pointwise, b.component(i), &grad[i]);
            }
        }
        if let Some(c) = &self.reaction {
            axpy_product(&mut pointwise, c.component(0), v);
        }
        match tr.order() {
            Order::One => {
                if self.var_a.is_some() || self.div_drift.is_some() {
                    for i in 0..d {
                        let mut flux = vec![0.0; v.len()];
                        if let Some(var) = &self.var_a {
                            for j in 0..d {
                                axpy_product(&mut flux, &var[i * d + j], &grad[j]);
                            }
                        }
                        if let Some(beta) = &self.div_drift {
                            axpy_product(&mut flux, beta.component(i), v);
                        }
                        tr.add_divergence_spectrum(&mut acc, &flux, i);
                    }
                }
                let mut out = tr.inverse_in_place(&mut acc);
                crate::evolution::solver::add(&mut out, 1.0, &pointwise);
                out
            }
            Order::Two => {
                let pw = tr.forward(&pointwise);
                for ((a, z), w) in acc.iter_mut().zip(&pw).zip(tr.h_weights()) {
                    *a += z * w;
                }
                let hess = self.var_a.as_ref().map(|_| tr.hessian(v));
                if let Some(var) = &self.var_a {
                    for i in 0..d {
                        let mut flux = vec![0.0; v.len()];
                        for j in 0..d {
                            axpy_product(&mut flux, &var[i * d + j], &grad[j]);
                        }
                        tr.add_divergence_spectrum(&mut acc, &flux, i);
                    }
                }
                if self.var_a.is_some() || self.da.is_some() {
                    for k in 0..d {
                        for i in 0..d {
                            let mut g = vec![0.0; v.len()];
                            if let Some(da) = &self.da {
                                for j in 0..d {
                                    axpy_product(&mut g, da.component((k * d + i) * d + j), &grad[j]);
                                }
                            }
                            if let (Some(var), Some(hess)) = (&self.var_a, &hess) {
                                for j in 0..d {
                                    axpy_product(&mut g, &var[i * d + j], &hess[k * d + j]);
                                }
                            }
                            add_second_order(tr, &mut acc, &g, k, i);
                        }
                    }
                }
                tr.inverse_in_place(&mut acc)
            }
        }
    }

    fn symbol(&self) -> Option<&[f64]> {
        self.exposes_symbol.then_some(self.base.as_slice())
    }

    fn reference_symbol(&self) -> Option<&[f64]> {
        Some(&self.base)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Part {
    /// `b^B·Dv`
    Gradient,
    /// `D_i(β^{Bi} v)`
    DualL2,
    /// `(c^B + κ₀)v`
    ReactionL2,
    /// `(1−Δ)[b^B·Dv + c^B v] − D_kD_i((D_k a)^{B,ij} D_j v)`
    DualW12,
    /// `κ₀ v` as an element of `W¹₂`
    ReactionW12,
}

struct LowerOp {
    shared: Arc<Shared>,
    part: Part,
}

struct FrozenLower<'a> {
    op: &'a LowerOp,
    ctx: OwnedContext,
}

impl DualOperator for LowerOp {
    fn at<'a>(&'a self, ctx: &StepContext<'_>) -> Box<dyn FrozenDual + 'a> {
        Box::new(FrozenLower { op: self, ctx: OwnedContext::from_ctx(ctx) })
    }
}

impl FrozenDual for FrozenLower<'_> {
    fn apply(&self, v: &[f64]) -> Vec<f64> {
        let sh = self.op.shared.as_ref();
        let tr = &sh.triple;
        let c = &sh.coeffs;
        let d = c.dim;
        let ctx = self.ctx.as_ctx();
        let n = v.len();
        let gradient_part = |out: &mut Vec<f64>| {
            if let Some(b) = live(&c.drift.bounded, &ctx) {
                let grad = tr.gradient(v);
                for i in 0..d {
                    axpy_product(out, b.component(i), &grad[i]);
                }
            }
        };
        match self.op.part {
            Part::Gradient => {
                let mut out = vec![0.0; n];
                gradient_part(&mut out);
                out
            }
            Part::DualL2 => match live(&c.divergence_drift.bounded, &ctx) {
                Some(beta) => {
                    let fluxes: Vec<Vec<f64>> =
                        (0..d).map(|i| beta.component(i).iter().zip(v).map(|(b, x)| b * x).collect()).collect();
                    tr.divergence(&fluxes)
                }
                None => vec![0.0; n],
            },
            Part::ReactionL2 => {
                let mut out: Vec<f64> = v.iter().map(|x| sh.kappa0 * x).collect();
                if let Some(cb) = live(&c.reaction.bounded, &ctx) {
                    axpy_product(&mut out, cb.component(0), v);
                }
                out
            }
            Part::DualW12 => {
                let mut pointwise = vec![0.0; n];
                gradient_part(&mut pointwise);
                if let Some(cb) = live(&c.reaction.bounded, &ctx) {
                    axpy_product(&mut pointwise, cb.component(0), v);
                }
                let mut acc = tr.forward(&tr.h_representative(&pointwise));
                if let Some(da) = c.derivatives.as_ref().and_then(|der| live(&der.diffusion.bounded, &ctx)) {
                    let grad = tr.gradient(v);
                    for k in 0..d {
                        for i in 0..d {
                            let mut g = vec![0.0; n];
                            for j in 0..d {
                                axpy_product(&mut g, da.component((k * d + i) * d + j), &grad[j]);
                            }
                            add_second_order(tr, &mut acc, &g, k, i);
                        }
                    }
                }
                tr.inverse_in_place(&mut acc)
            }
            Part::ReactionW12 => {
                let mut out = tr.h_representative(v);
                out.iter_mut().for_each(|x| *x *= sh.kappa0);
                out
            }
        }
    }
}

/// `B` (singular parts and `σ`) or `𝔟` (bounded parts).
struct NoiseOp {
    shared: Arc<Shared>,
    lower: bool,
}

struct FrozenNoise<'a> {
    op: &'a NoiseOp,
    ctx: OwnedContext,
}

impl ChannelOperator for NoiseOp {
    fn channels(&self) -> usize {
        self.shared.coeffs.channels
    }
    fn at<'a>(&'a self, ctx: &StepContext<'_>) -> Box<dyn FrozenChannels + 'a> {
        Box::new(FrozenNoise { op: self, ctx: OwnedContext::from_ctx(ctx) })
    }
}

impl FrozenChannels for FrozenNoise<'_> {
    fn apply(&self, v: &[f64]) -> Vec<Vec<f64>> {
        let sh = self.op.shared.as_ref();
        let tr = &sh.triple;
        let c = &sh.coeffs;
        let (d, kk) = (c.dim, c.channels);
        let ctx = self.ctx.as_ctx();
        let n = v.len();
        let lower = self.op.lower;
        fn pick(f: &crate::morrey::AdmissibleField, lower: bool) -> &FieldSeries {
            if lower {
                &f.bounded
            } else {
                &f.singular
            }
        }
        let part = |f| pick(f, lower);
        let sigma = if self.op.lower { None } else { live(&c.noise_gradient, &ctx) };
        let nu = live(part(&c.noise_reaction), &ctx);
        let grad = tr.gradient(v);
        let mut out = vec![vec![0.0; n]; kk];
        for (k, ch) in out.iter_mut().enumerate() {
            if let Some(s) = &sigma {
                for i in 0..d {
                    axpy_product(ch, s.component(i * kk + k), &grad[i]);
                }
            }
            if let Some(nu) = &nu {
                axpy_product(ch, nu.component(k), v);
            }
        }
        if tr.order() == Order::One {
            return out;
        }
        // −D_l of the derivative of the channel, the H-part of the pairing
        let der = c.derivatives.as_ref();
        let dsigma = der.and_then(|x| live(part(&x.noise_gradient), &ctx));
        let dnu = der.and_then(|x| live(part(&x.noise_reaction), &ctx));
        let hess = sigma.as_ref().map(|_| tr.hessian(v));
        for (k, ch) in out.iter_mut().enumerate() {
            let mut fluxes = vec![vec![0.0; n]; d];
            for (l, y) in fluxes.iter_mut().enumerate() {
                if let Some(ds) = &dsigma {
                    for i in 0..d {
                        axpy_product(y, ds.component((l * d + i) * kk + k), &grad[i]);
                    }
                }
                if let Some(dn) = &dnu {
                    axpy_product(y, dn.component(l * kk + k), v);
                }
                if let (Some(s), Some(h)) = (&sigma, &hess) {
                    for i in 0..d {
                        axpy_product(y, s.component(i * kk + k), &h[l * d + i]);
                    }
                }
                if let Some(nu) = &nu {
                    axpy_product(y, nu.component(k), &grad[l]);
                }
            }
            let div = tr.divergence(&fluxes);
            crate::evolution::solver::add(ch, -1.0, &div);
        }
        out
    }
}

/// Direct quadrature of the bilinear form
/// `−(a^{ij}D_j v + β^i v, D_i u) + (b^i D_i v + c v, u)` at `ctx`.
pub fn bilinear_form(triple: &SpectralTriple, coeffs: &SpdeCoefficients, ctx: &StepContext<'_>, u: &[f64], v: &[f64]) -> f64 {
    let d = coeffs.dim;
    let a = coeffs.diffusion.eval(ctx);
    let beta = coeffs.divergence_drift.total(ctx);
    let b = coeffs.drift.total(ctx);
    let c = coeffs.reaction.total(ctx);
    let du = triple.gradient(u);
    let dv = triple.gradient(v);
    let mut sum = 0.0;
    for x in 0..u.len() {
        let mut s = 0.0;
        for i in 0..d {
            let mut flux = beta.component(i)[x] * v[x];
            for j in 0..d {
                flux += a.component(i * d + j)[x] * dv[j][x];
            }
            s -= flux * du[i][x];
            s += b.component(i)[x] * dv[i][x] * u[x];
        }
        s += c.component(0)[x] * v[x] * u[x];
        sum += s;
    }
    sum * triple.cell_volume()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolution::{Sample, Stepper};
    use crate::morrey::{AdmissibleField, MorreyParams};

    fn params(d: usize) -> MorreyParams {
        if d >= 3 {
            MorreyParams::admissibility(d, 2.5, 1.0).unwrap()
        } else {
            MorreyParams::new(2.5, 1.0, 1.0, crate::morrey::Admissibility::Full).unwrap()
        }
    }

    fn smooth(tr: &SpectralTriple, seed: f64) -> Vec<f64> {
        let l = tr.box_length();
        let w = 2.0 * std::f64::consts::PI / l;
        tr.sample(|x| {
            let mut s = 0.3 + seed;
            for (a, xa) in x.iter().enumerate() {
                s += (w * xa + seed * (a as f64 + 1.0)).sin() + 0.5 * (2.0 * w * xa - seed).cos();
            }
            s
        })
        .into_values()
    }

    fn field(parts: Vec<Vec<f64>>) -> FieldSeries {
        FieldSeries::constant(Field::from_components(parts).unwrap())
    }

    #[test]
    fn heat_coercivity_matches_symbol_oracle() {
        let tr = SpectralTriple::new(1, 32, 2.0 * std::f64::consts::PI, Order::One).unwrap();
        let c = SpdeCoefficients::isotropic(&tr, 1, 1.0, 0.0, params(1));
        let delta = 0.2;
        let asm = assemble_l2(&tr, &c, &SpdeForcing::none(), &AssemblyOptions::new(delta).with_n0(0.0)).unwrap();
        let kappa0 = delta;
        let oracle = (0..tr.len())
            .map(|n| tr.wavenumbers(0)[n].powi(2))
            .map(|x| 2.0 * (x + kappa0) / (1.0 + x))
            .fold(f64::INFINITY, f64::min);
        assert!((oracle - 2.0 * kappa0).abs() < 1e-12);
        assert!((asm.coercivity.estimate - oracle).abs() < 1e-10, "{}", asm.coercivity.estimate);
        assert!(asm.coercivity.estimate >= 2.0 * (1.0f64).min(kappa0) - 1e-12);
    }

    #[test]
    fn critical_noise_leaves_delta_margin() {
        let tr = SpectralTriple::new(1, 64, 2.0 * std::f64::consts::PI, Order::One).unwrap();
        let delta: f64 = 0.25;
        let c = SpdeCoefficients::isotropic(&tr, 1, 1.0, (2.0 - delta).sqrt(), params(1));
        let mut opts = AssemblyOptions::new(delta).with_n0(64.0);
        opts.probe.random = 0;
        let asm = assemble_l2(&tr, &c, &SpdeForcing::none(), &opts).unwrap();
        // per mode: (2(|ξ|² + κ₀) − (2 − δ)ξ_D²)/(1 + |ξ|²) with ξ_D the
        // derivative symbol, which vanishes at Nyquist
        let kappa0 = 64.0 + delta;
        let oracle = (0..tr.len())
            .map(|n| (tr.wavenumbers(0)[n].powi(2), tr.derivative_symbol(0)[n].powi(2)))
            .map(|(x, xd)| (2.0 * (x + kappa0) - (2.0 - delta) * xd) / (1.0 + x))
            .fold(f64::INFINITY, f64::min);
        assert!((asm.coercivity.estimate - oracle).abs() < 1e-9, "{} vs {oracle}", asm.coercivity.estimate);
        assert!(matches!(asm.coercivity.worst_sample, Sample::Mode { .. }));
        assert!(oracle - delta < 0.2);
    }

    fn rich_coefficients(tr: &SpectralTriple) -> SpdeCoefficients {
        let d = tr.dim();
        let n = tr.len();
        let p = params(d);
        let mut c = SpdeCoefficients::isotropic(tr, 2, 1.0, 0.3, p);
        let bump = smooth(tr, 0.4);
        let a: Vec<Vec<f64>> = (0..d * d)
            .map(|ij| if ij % (d + 1) == 0 { bump.iter().map(|x| 1.0 + 0.05 * x).collect() } else { vec![0.02; n] })
            .collect();
        c.diffusion = field(a);
        let vec_field = |s: f64, m: usize| field((0..m).map(|i| smooth(tr, s + i as f64).iter().map(|x| 0.01 * x).collect()).collect());
        c.drift = AdmissibleField { singular: vec_field(0.1, d), bounded: vec_field(0.2, d), hat: 0.0, bar: Envelope::Constant(0.1), params: p };
        c.divergence_drift = AdmissibleField { singular: vec_field(0.3, d), bounded: vec_field(0.5, d), hat: 0.0, bar: Envelope::Constant(0.1), params: p };
        c.reaction = AdmissibleField { singular: vec_field(0.7, 1), bounded: vec_field(0.9, 1), hat: 0.0, bar: Envelope::Constant(0.1), params: p };
        c.noise_reaction = AdmissibleField { singular: vec_field(1.1, 2), bounded: vec_field(1.3, 2), hat: 0.0, bar: Envelope::Constant(0.1), params: p };
        c
    }

    #[test]
    fn l2_assembly_reproduces_bilinear_form() {
        let tr = SpectralTriple::new(2, 16, 2.0 * std::f64::consts::PI, Order::One).unwrap();
        let c = rich_coefficients(&tr);
        let asm = assemble_l2(&tr, &c, &SpdeForcing::none(), &AssemblyOptions::new(0.3).with_gate(false)).unwrap();
        let ctx = StepContext::at(0.0);
        let u = smooth(&tr, 1.7);
        let v = smooth(&tr, 2.9);
        let mut rep = asm.ops.principal.at(&ctx).apply(&v);
        for op in asm.lower.explicit_terms() {
            crate::evolution::solver::add(&mut rep, 1.0, &op.at(&ctx).apply(&v));
        }
        let got = tr.l2_inner(&u, &rep);
        let want = bilinear_form(&tr, &c, &ctx, &u, &v);
        assert!((got - want).abs() < 1e-10 * (1.0 + want.abs()), "{got} vs {want}");
        // noise channels: B + 𝔟 is σ^{ik}D_i v + ν^k v
        let b = asm.ops.noise.at(&ctx).apply(&v);
        let bl = asm.lower.noise.as_ref().unwrap().at(&ctx).apply(&v);
        let dv = tr.gradient(&v);
        let nu = c.noise_reaction.total(&ctx);
        let s = c.noise_gradient.eval(&ctx);
        for k in 0..2 {
            let direct: Vec<f64> = (0..tr.len())
                .map(|x| (0..2).map(|i| s.component(i * 2 + k)[x] * dv[i][x]).sum::<f64>() + nu.component(k)[x] * v[x])
                .collect();
            let got: Vec<f64> = b[k].iter().zip(&bl[k]).map(|(p, q)| p + q).collect();
            let err = direct.iter().zip(&got).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
            assert!(err < 1e-12);
        }
    }

    #[test]
    fn w12_assembly_reproduces_tested_generator() {
        let tr = SpectralTriple::new(1, 32, 2.0 * std::f64::consts::PI, Order::Two).unwrap();
        let n = tr.len();
        let p = params(1);
        let mut c = SpdeCoefficients::isotropic(&tr, 1, 1.0, 0.2, p);
        c.diffusion = field(vec![tr.sample(|x| 1.0 + 0.1 * x[0].cos()).into_values()]);
        c.drift.bounded = field(vec![tr.sample(|x| 0.05 * x[0].sin()).into_values()]);
        c.reaction.singular = field(vec![tr.sample(|x| 0.02 * (1.0 + x[0].cos())).into_values()]);
        c.noise_reaction.bounded = field(vec![tr.sample(|x| 0.03 * x[0].sin()).into_values()]);
        let c = c.with_spectral_derivatives(&tr, p);
        let asm = assemble_w12(&tr, &c, &SpdeForcing::none(), &AssemblyOptions::new(0.3).with_gate(false)).unwrap();
        let ctx = StepContext::at(0.0);
        let u = tr.sample(|x| (2.0 * x[0]).sin() + 0.3).into_values();
        let v = tr.sample(|x| (3.0 * x[0]).cos() - x[0].sin()).into_values();
        let mut rep = asm.ops.principal.at(&ctx).apply(&v);
        for op in asm.lower.explicit_terms() {
            crate::evolution::solver::add(&mut rep, 1.0, &op.at(&ctx).apply(&v));
        }
        // ((1−Δ)u, D(aDv) + bDv + cv)
        let a = c.diffusion.eval(&ctx);
        let dv = tr.gradient(&v)[0].clone();
        let flux: Vec<f64> = (0..n).map(|x| a.component(0)[x] * dv[x]).collect();
        let b = c.drift.total(&ctx);
        let cc = c.reaction.total(&ctx);
        let gen: Vec<f64> = tr
            .divergence(&[flux])
            .iter()
            .enumerate()
            .map(|(x, g)| g + b.component(0)[x] * dv[x] + cc.component(0)[x] * v[x])
            .collect();
        let want = tr.l2_inner(&tr.h_representative(&u), &gen);
        let got = tr.l2_inner(&u, &rep);
        assert!((got - want).abs() < 1e-9 * (1.0 + want.abs()), "{got} vs {want}");
        // channels: (u, σDv + νv)_H
        let ch: Vec<f64> = asm.ops.noise.at(&ctx).apply(&v)[0]
            .iter()
            .zip(&asm.lower.noise.as_ref().unwrap().at(&ctx).apply(&v)[0])
            .map(|(p, q)| p + q)
            .collect();
        let nu = c.noise_reaction.total(&ctx);
        let elem: Vec<f64> = (0..n).map(|x| 0.2 * dv[x] + nu.component(0)[x] * v[x]).collect();
        let want = tr.h_inner(&u, &elem);
        let got = tr.l2_inner(&u, &ch);
        assert!((got - want).abs() < 1e-9 * (1.0 + want.abs()), "{got} vs {want}");
    }

    #[test]
    fn w12_heat_coercivity_and_source_norm() {
        let tr = SpectralTriple::new(1, 32, 2.0 * std::f64::consts::PI, Order::Two).unwrap();
        let p = params(1);
        let c = SpdeCoefficients::isotropic(&tr, 1, 1.0, 0.0, p).with_spectral_derivatives(&tr, p);
        let f = smooth(&tr, 0.8);
        let forcing = SpdeForcing { source: Some(field(vec![f.clone()])), ..SpdeForcing::none() };
        let delta = 0.5;
        let asm = assemble_w12(&tr, &c, &forcing, &AssemblyOptions::new(delta).with_n0(0.0)).unwrap();
        let oracle = (0..tr.len())
            .map(|n| tr.wavenumbers(0)[n].powi(2))
            .map(|x| 2.0 * (x + delta) * (1.0 + x) / (1.0 + x).powi(2))
            .fold(f64::INFINITY, f64::min);
        assert!((asm.coercivity.estimate - oracle).abs() < 1e-10);
        let rep = asm.forcing.dual.as_ref().unwrap().eval(&StepContext::at(0.0)).component(0).to_vec();
        let lhs = tr.dual_norm_sq(&rep);
        let rhs = tr.l2_inner(&f, &f);
        assert!((lhs - rhs).abs() < 1e-10 * rhs);
    }

    #[test]
    fn gate_and_ellipticity_refusals() {
        let tr = SpectralTriple::new(1, 16, 2.0 * std::f64::consts::PI, Order::One).unwrap();
        let mut c = SpdeCoefficients::isotropic(&tr, 1, 1.0, 0.0, params(1));
        c.drift.hat = 0.2;
        match assemble_l2(&tr, &c, &SpdeForcing::none(), &AssemblyOptions::new(0.5)) {
            Err(Error::GateRefused { sum, detail, .. }) => {
                assert!((sum - 0.2).abs() < 1e-15);
                assert!(detail.contains("b = 0.2"));
            }
            other => panic!("expected gate refusal, got {:?}", other.err()),
        }
        let c = SpdeCoefficients::isotropic(&tr, 1, 1.0, 1.5, params(1));
        assert!(matches!(
            assemble_l2(&tr, &c, &SpdeForcing::none(), &AssemblyOptions::new(0.5)),
            Err(Error::Ellipticity { .. })
        ));
        let c = SpdeCoefficients::isotropic(&tr, 1, 1.0, 0.0, params(1));
        assert!(matches!(
            assemble_w12(&tr, &c, &SpdeForcing::none(), &AssemblyOptions::new(0.5)),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn variable_diffusion_solves_through_krylov() {
        let tr = SpectralTriple::new(1, 32, 2.0 * std::f64::consts::PI, Order::One).unwrap();
        let c = rich_coefficients(&SpectralTriple::new(1, 32, 2.0 * std::f64::consts::PI, Order::One).unwrap());
        let c = SpdeCoefficients { channels: 2, ..c };
        let asm = assemble_l2(&tr, &c, &SpdeForcing::none(), &AssemblyOptions::new(0.3).with_gate(false)).unwrap();
        let problem = asm.problem(smooth(&tr, 0.2)).unwrap();
        let stepper = Stepper::new(&problem, 1e-3, Default::default());
        let out = stepper.step(0, &[0.0, 0.0], &problem.initial, &[0.01, -0.02]).unwrap();
        assert!(out.iterations > 0);
        assert!(out.next.iter().all(|x| x.is_finite()));
    }
}
