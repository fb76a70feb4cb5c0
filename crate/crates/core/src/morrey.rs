//! Morrey norms on the periodic grid, admissible coefficient splits, and
//! empirical constants of the Morrey embedding inequalities.
//!
//! The supremum over balls is replaced by a deterministic sampler: a set of
//! centers (all nodes, a stride, or explicit nodes) and a radius ladder. Ball
//! means use node counting; for every radius the means at all centers come
//! from one circular convolution, so a full scan costs two FFTs per radius.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Envelope, Field, FieldSeries, StepContext};
use crate::profiles::unit_ball_volume;
use crate::triple::{GridFunction, SpectralTriple};

/// Admissibility order: `f` itself, or `|f|^{1/2}`, has small Morrey norm.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Admissibility {
    Full,
    Half,
}

impl Admissibility {
    pub fn exponent(self) -> f64 {
        match self {
            Admissibility::Full => 1.0,
            Admissibility::Half => 0.5,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MorreyParams {
    /// Integrability exponent of the ball means.
    pub r: f64,
    /// Largest ball radius.
    pub rho0: f64,
    /// Power of the radius in front of the mean.
    pub lambda_exp: f64,
    pub alpha: Admissibility,
}

impl MorreyParams {
    pub fn new(r: f64, rho0: f64, lambda_exp: f64, alpha: Admissibility) -> Result<Self> {
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::Domain(format!("Morrey exponent must be positive, got {r}")));
        }
        if !(rho0 > 0.0 && rho0 <= 1.0) {
            return Err(Error::Domain(format!("largest radius must lie in (0, 1], got {rho0}")));
        }
        if !(lambda_exp.is_finite() && lambda_exp >= 0.0) {
            return Err(Error::Domain(format!("radius power must be nonnegative, got {lambda_exp}")));
        }
        Ok(Self { r, rho0, lambda_exp, alpha })
    }

    /// Parameters for admissibility certificates in dimension `d`.
    pub fn admissibility(d: usize, r: f64, rho0: f64) -> Result<Self> {
        let p = Self::new(r, rho0, 1.0, Admissibility::Full)?;
        p.check_admissible_exponent(d)?;
        Ok(p)
    }

    pub fn check_admissible_exponent(&self, d: usize) -> Result<()> {
        if self.r > 2.0 && self.r <= d as f64 {
            Ok(())
        } else {
            Err(Error::Domain(format!("admissibility needs 2 < r <= d = {d}, got r = {}", self.r)))
        }
    }

    pub fn with_alpha(mut self, alpha: Admissibility) -> Self {
        self.alpha = alpha;
        self
    }
}

/// Quadrature rule for ball means.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BallRule {
    /// Divide the node sum by the node count.
    Indicator,
    /// Divide `h^d·Σ` by the exact ball volume `ω_d ρ^d`.
    VolumeWeighted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum CenterSet {
    All,
    Stride(usize),
    Nodes(Vec<usize>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallSampler {
    pub centers: CenterSet,
    pub radii: Vec<f64>,
    pub rule: BallRule,
}

impl BallSampler {
    /// `count` radii in geometric progression from `2h` up to `rho0`,
    /// clipped to the radii available on the grid.
    pub fn ladder(triple: &SpectralTriple, rho0: f64, count: usize, centers: CenterSet) -> Self {
        let lo = 2.0 * triple.spacing();
        let radii = if count == 0 || rho0 < lo {
            Vec::new()
        } else if count == 1 {
            vec![rho0]
        } else {
            let q = (rho0 / lo).powf(1.0 / (count - 1) as f64);
            (0..count).map(|i| if i + 1 == count { rho0 } else { lo * q.powi(i as i32) }).collect()
        };
        Self { centers, radii, rule: BallRule::Indicator }
    }

    pub fn with_radii(centers: CenterSet, radii: Vec<f64>) -> Self {
        Self { centers, radii, rule: BallRule::Indicator }
    }

    fn validate(&self, triple: &SpectralTriple, rho0: Option<f64>) -> Result<()> {
        if self.radii.is_empty() {
            return Err(Error::Config("ball sampler has no radii".into()));
        }
        match &self.centers {
            CenterSet::Nodes(n) if n.is_empty() => return Err(Error::Config("ball sampler has no centers".into())),
            CenterSet::Nodes(n) if n.iter().any(|&i| i >= triple.len()) => {
                return Err(Error::Config("ball center outside the grid".into()))
            }
            CenterSet::Stride(0) => return Err(Error::Config("center stride must be positive".into())),
            _ => {}
        }
        let min = 2.0 * triple.spacing() * (1.0 - 1e-12);
        if let Some(r) = self.radii.iter().find(|&&r| !(r >= min)) {
            return Err(Error::Config(format!("radius {r} is below two grid spacings")));
        }
        if let Some(rho0) = rho0 {
            if let Some(r) = self.radii.iter().find(|&&r| r > rho0 * (1.0 + 1e-12)) {
                return Err(Error::Config(format!("radius {r} exceeds rho0 = {rho0}")));
            }
        }
        Ok(())
    }

    fn center_indices(&self, triple: &SpectralTriple) -> Vec<usize> {
        match &self.centers {
            CenterSet::All => (0..triple.len()).collect(),
            CenterSet::Stride(s) => (0..triple.len())
                .filter(|&i| triple.multi_index(i)[..triple.dim()].iter().all(|j| j % s == 0))
                .collect(),
            CenterSet::Nodes(n) => n.clone(),
        }
    }
}

/// Flat offsets (mod M) of the nodes within distance `rho` of the origin,
/// each periodic image counted once.
fn ball_offsets(triple: &SpectralTriple, rho: f64) -> Vec<usize> {
    let d = triple.dim();
    let m = triple.points_per_axis() as i64;
    let h = triple.spacing();
    let reach = (rho / h * (1.0 + 1e-12)).floor() as i64;
    let mut seen = vec![false; triple.len()];
    let mut out = Vec::new();
    let mut o = [0i64; 3];
    let span = (2 * reach + 1) as usize;
    let total = span.pow(d as u32);
    for n in 0..total {
        let mut rest = n;
        let mut r2 = 0.0;
        for a in 0..d {
            o[a] = (rest % span) as i64 - reach;
            rest /= span;
            r2 += (o[a] as f64 * h).powi(2);
        }
        if r2.sqrt() > rho * (1.0 + 1e-12) {
            continue;
        }
        let idx = (0..d).fold(0usize, |acc, a| acc * m as usize + o[a].rem_euclid(m) as usize);
        if !seen[idx] {
            seen[idx] = true;
            out.push(idx);
        }
    }
    out
}

/// Ball sums of `values` around every node: circular convolution with the
/// ball indicator.
fn ball_sums(triple: &SpectralTriple, spectrum: &[Complex64], offsets: &[usize]) -> Vec<f64> {
    let mut kernel = vec![0.0; triple.len()];
    for &o in offsets {
        kernel[o] = 1.0;
    }
    let k = triple.forward(&kernel);
    let factor = (triple.len() as f64 / triple.cell_volume()).sqrt();
    let mut prod: Vec<Complex64> = spectrum.iter().zip(&k).map(|(a, b)| a * b * factor).collect();
    triple.inverse_in_place(&mut prod).into_iter().map(|v| v.max(0.0)).collect()
}

/// Ball means of `density` for every radius and every sampled center,
/// as `(radius, node, mean)` triples.
fn ball_means(triple: &SpectralTriple, density: &[f64], sampler: &BallSampler) -> Vec<(f64, Vec<(usize, f64)>)> {
    let centers = sampler.center_indices(triple);
    let direct = matches!(sampler.centers, CenterSet::Nodes(_));
    let spectrum = if direct { Vec::new() } else { triple.forward(density) };
    let m = triple.points_per_axis();
    let d = triple.dim();
    sampler
        .radii
        .iter()
        .map(|&rho| {
            let offsets = ball_offsets(triple, rho);
            let norm = match sampler.rule {
                BallRule::Indicator => 1.0 / offsets.len() as f64,
                BallRule::VolumeWeighted => triple.cell_volume() / (unit_ball_volume(d) * rho.powi(d as i32)),
            };
            let means = if direct {
                centers
                    .iter()
                    .map(|&c| {
                        let cm = triple.multi_index(c);
                        let sum: f64 = offsets
                            .iter()
                            .map(|&o| {
                                let om = triple.multi_index(o);
                                let mut idx = 0;
                                for a in 0..d {
                                    idx = idx * m + (cm[a] + om[a]) % m;
                                }
                                density[idx]
                            })
                            .sum();
                        (c, sum * norm)
                    })
                    .collect()
            } else {
                let sums = ball_sums(triple, &spectrum, &offsets);
                centers.iter().map(|&c| (c, sums[c] * norm)).collect()
            };
            (rho, means)
        })
        .collect()
}

/// `max ρ^λ (⨍_B |f|^r)^{1/r}` over the sampled balls.
pub fn morrey_norm(triple: &SpectralTriple, magnitude: &[f64], params: &MorreyParams, sampler: &BallSampler) -> Result<f64> {
    triple.check_len(magnitude)?;
    sampler.validate(triple, Some(params.rho0))?;
    let density: Vec<f64> = magnitude.iter().map(|v| v.abs().powf(params.r)).collect();
    let mut best: f64 = 0.0;
    for (rho, means) in ball_means(triple, &density, sampler) {
        let top = means.iter().fold(0.0f64, |m, (_, v)| m.max(*v));
        best = best.max(rho.powf(params.lambda_exp) * top.powf(1.0 / params.r));
    }
    Ok(best)
}

/// Smallest `f̂` with `(⨍_B |f|^{αr})^{1/r} ≤ f̂^α ρ^{-1}` on the sampled balls.
pub fn certify_hat(triple: &SpectralTriple, magnitude: &[f64], params: &MorreyParams, sampler: &BallSampler) -> Result<f64> {
    let a = params.alpha.exponent();
    let scan = MorreyParams { r: a * params.r, lambda_exp: a, ..*params };
    // ρ^α (⨍|f|^{αr})^{1/(αr)} = [ρ (⨍|f|^{αr})^{1/r}]^α
    morrey_norm(triple, magnitude, &scan, sampler)
}

/// Coefficient split `f = f^M + f^B` with certified `f̂` and envelope `f̄`.
#[derive(Clone, Debug)]
pub struct AdmissibleField {
    pub singular: FieldSeries,
    pub bounded: FieldSeries,
    pub hat: f64,
    pub bar: Envelope,
    pub params: MorreyParams,
}

impl AdmissibleField {
    pub fn zero(len: usize, n_components: usize, params: MorreyParams) -> Self {
        Self {
            singular: FieldSeries::zeros(len, n_components),
            bounded: FieldSeries::zeros(len, n_components),
            hat: 0.0,
            bar: Envelope::Constant(0.0),
            params,
        }
    }

    /// Purely bounded field; `f̄` is the grid maximum of `|f|` per slice.
    pub fn bounded(series: FieldSeries, params: MorreyParams) -> Self {
        let bar = envelope_of(&series);
        let n = series.n_components();
        let len = series.len();
        Self { singular: FieldSeries::zeros(len, n), bounded: series, hat: 0.0, bar, params }
    }

    /// Certify a given split on the sampled balls.
    pub fn certify(
        triple: &SpectralTriple,
        singular: FieldSeries,
        bounded: FieldSeries,
        params: MorreyParams,
        sampler: &BallSampler,
    ) -> Result<Self> {
        if singular.n_components() != bounded.n_components() {
            return Err(Error::Config("singular and bounded parts differ in component count".into()));
        }
        let hat = if singular.is_identically_zero() {
            0.0
        } else {
            params.check_admissible_exponent(triple.dim())?;
            let mut hat: f64 = 0.0;
            for slice in singular.representative_slices() {
                hat = hat.max(certify_hat(triple, &slice.magnitude(), &params, sampler)?);
            }
            hat
        };
        let bar = envelope_of(&bounded);
        Ok(Self { singular, bounded, hat, bar, params })
    }

    pub fn n_components(&self) -> usize {
        self.singular.n_components()
    }

    pub fn is_zero(&self) -> bool {
        self.singular.is_identically_zero() && self.bounded.is_identically_zero()
    }

    /// `f^M + f^B` at one instant.
    pub fn total(&self, ctx: &StepContext<'_>) -> Field {
        self.singular.eval(ctx).add(&self.bounded.eval(ctx)).expect("matching parts")
    }
}

fn envelope_of(series: &FieldSeries) -> Envelope {
    match series {
        FieldSeries::Tabulated { times, values } => {
            Envelope::Tabulated { times: times.clone(), values: values.iter().map(|v| v.max_magnitude()).collect() }
        }
        FieldSeries::Modulated { shape, profile } => {
            // only the shape is known here; callers with a time grid can refine
            let _ = profile;
            Envelope::Constant(shape.max_magnitude())
        }
        other => Envelope::Constant(other.representative_slices().iter().map(|s| s.max_magnitude()).fold(0.0, f64::max)),
    }
}

/// Result of the threshold split of an `L_p`-in-space coefficient.
#[derive(Clone, Debug)]
pub struct LpqSplit {
    pub field: AdmissibleField,
    /// Threshold `λ(t)` per slice; also the envelope of the bounded part.
    pub thresholds: Vec<f64>,
    /// `max ρ^d ⨍_B |b^M|^d` over slices and sampled balls.
    pub ball_maximum: f64,
    /// `ball_maximum · N̂^{p-d}`: the empirical constant of the bound.
    pub fitted_constant: f64,
    /// The constant `1/ω_d` obtained from Chebyshev's inequality.
    pub chebyshev_constant: f64,
}

/// Split `b = b^M + b^B` with `b^M = b·1{|b| ≥ λ(t)}`,
/// `λ(t) = N̂ (∫|b_t|^p)^{1/(p-d)}`.
pub fn decompose_lpq(
    triple: &SpectralTriple,
    times: &[f64],
    slices: &[Field],
    p: f64,
    n_hat: f64,
    params: &MorreyParams,
    sampler: &BallSampler,
) -> Result<LpqSplit> {
    let d = triple.dim() as f64;
    if !(p > d) {
        return Err(Error::Domain(format!("threshold split needs p > d = {d}, got {p}")));
    }
    if !(n_hat > 0.0 && n_hat.is_finite()) {
        return Err(Error::Domain(format!("threshold factor must be positive, got {n_hat}")));
    }
    if slices.is_empty() || slices.len() != times.len() {
        return Err(Error::Config("one field slice per time is required".into()));
    }
    let mut singular = Vec::with_capacity(slices.len());
    let mut bounded = Vec::with_capacity(slices.len());
    let mut thresholds = Vec::with_capacity(slices.len());
    let mut ball_maximum: f64 = 0.0;
    let d_sampler = MorreyParams { r: d, lambda_exp: 1.0, ..*params };
    for b in slices {
        triple.check_len(b.component(0))?;
        let mag = b.magnitude();
        let lp: f64 = triple.cell_volume() * mag.iter().map(|v| v.powf(p)).sum::<f64>();
        let lambda = n_hat * lp.powf(1.0 / (p - d));
        let keep: Vec<bool> = mag.iter().map(|&v| v >= lambda && v > 0.0).collect();
        let sing = b.map_components(|c| c.iter().zip(&keep).map(|(v, k)| if *k { *v } else { 0.0 }).collect());
        let bnd = b.map_components(|c| c.iter().zip(&keep).map(|(v, k)| if *k { 0.0 } else { *v }).collect());
        let sing_mag = sing.magnitude();
        if sing_mag.iter().any(|v| *v > 0.0) {
            // ρ^d ⨍|b^M|^d = [ρ (⨍|b^M|^d)^{1/d}]^d
            ball_maximum = ball_maximum.max(morrey_norm(triple, &sing_mag, &d_sampler, sampler)?.powf(d));
        }
        thresholds.push(lambda);
        singular.push(sing);
        bounded.push(bnd);
    }
    let singular = FieldSeries::tabulated(times.to_vec(), singular)?;
    let bounded = FieldSeries::tabulated(times.to_vec(), bounded)?;
    let mut field = AdmissibleField::certify(triple, singular, bounded, *params, sampler)?;
    field.bar = Envelope::Tabulated { times: times.to_vec(), values: thresholds.clone() };
    Ok(LpqSplit {
        field,
        thresholds,
        ball_maximum,
        fitted_constant: ball_maximum * n_hat.powf(p - d),
        chebyshev_constant: 1.0 / unit_ball_volume(triple.dim()),
    })
}

/// Classification of `(p, q)` against `d/p + 2/q = 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LpsCheck {
    pub value: f64,
    pub critical: bool,
    pub subcritical: bool,
}

/// `p` or `q` may be `f64::INFINITY`.
pub fn check_lps(d: usize, p: f64, q: f64) -> Result<LpsCheck> {
    if !(p >= 2.0 && q >= 2.0) {
        return Err(Error::Domain(format!("exponents must lie in [2, ∞], got p = {p}, q = {q}")));
    }
    let value = d as f64 / p + 2.0 / q;
    Ok(LpsCheck { value, critical: (value - 1.0).abs() <= 1e-12, subcritical: value < 1.0 - 1e-12 })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeakLdReport {
    /// `sup λ^d |B ∩ {|b| > λ}|` over the level ladder and unit balls.
    pub weak_norm: f64,
    /// Level attaining the supremum.
    pub level: f64,
    /// `max ρ^r ⨍_B |b|^r / M^{r/d}` for the requested `r < d`.
    pub fitted_constant: f64,
}

/// Weak-`L_d` quantity of `|b|` on unit balls and the Morrey bound it implies.
pub fn check_weak_ld(
    triple: &SpectralTriple,
    magnitude: &[f64],
    centers: &CenterSet,
    levels: &[f64],
    r: f64,
    morrey_sampler: &BallSampler,
) -> Result<WeakLdReport> {
    triple.check_len(magnitude)?;
    let d = triple.dim() as f64;
    if !(r > 0.0 && r < d) {
        return Err(Error::Domain(format!("bound exponent must lie in (0, d), got {r}")));
    }
    let unit = BallSampler { centers: centers.clone(), radii: vec![1.0], rule: BallRule::Indicator };
    unit.validate(triple, None)?;
    let mut weak_norm: f64 = 0.0;
    let mut level_at = 0.0;
    for &level in levels {
        let indicator: Vec<f64> = magnitude.iter().map(|&v| if v > level { 1.0 } else { 0.0 }).collect();
        if indicator.iter().all(|v| *v == 0.0) {
            continue;
        }
        let means = ball_means(triple, &indicator, &unit);
        let count = means[0].1.iter().fold(0.0f64, |m, (_, v)| m.max(*v));
        // mean·n_B = node count; measure = count·h^d
        let n_ball = ball_offsets(triple, 1.0).len() as f64;
        let measure = (count * n_ball).round() * triple.cell_volume();
        let q = level.powf(d) * measure;
        if q > weak_norm {
            weak_norm = q;
            level_at = level;
        }
    }
    let params = MorreyParams { r, rho0: 1.0, lambda_exp: 1.0, alpha: Admissibility::Full };
    let fitted_constant = if weak_norm > 0.0 {
        morrey_norm(triple, magnitude, &params, morrey_sampler)?.powf(r) / weak_norm.powf(r / d)
    } else {
        0.0
    };
    Ok(WeakLdReport { weak_norm, level: level_at, fitted_constant })
}

fn gradient_norm_sq(triple: &SpectralTriple, u: &[f64]) -> f64 {
    let c = triple.forward(u);
    (0..triple.dim())
        .map(|a| c.iter().zip(triple.derivative_symbol(a)).map(|(z, k)| k * k * z.norm_sqr()).sum::<f64>())
        .sum()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EmbeddingReport {
    /// Largest observed ratio over the battery.
    pub constant: f64,
    pub ratios: Vec<f64>,
}

/// Empirical constant of the Morrey embedding: for `α = 1` the ratio
/// `∫|f|²u² / (f̂²|Du|² + (ρ0^{-2}f̂² + 2f̄²)|u|²)`, for `α = 1/2` the ratio
/// `∫|f^M|u² / (f̂(|Du|² + ρ0^{-2}|u|²))`. Zero numerators give ratio 0.
pub fn verify_embedding(
    triple: &SpectralTriple,
    field: &AdmissibleField,
    battery: &[GridFunction],
    ctx: &StepContext<'_>,
) -> Result<EmbeddingReport> {
    let rho0 = field.params.rho0;
    let hat = field.hat;
    let bar = field.bar.at(ctx.t);
    let singular = field.singular.eval(ctx).magnitude();
    let total = field.total(ctx).magnitude();
    let mut ratios = Vec::with_capacity(battery.len());
    for u in battery {
        triple.check_grid(u.triple())?;
        let u = u.values();
        let u2 = triple.l2_inner(u, u);
        let du2 = gradient_norm_sq(triple, u);
        let (num, den) = match field.params.alpha {
            Admissibility::Full => {
                let num = triple.cell_volume() * total.iter().zip(u).map(|(f, v)| f * f * v * v).sum::<f64>();
                (num, hat * hat * du2 + (hat * hat / (rho0 * rho0) + 2.0 * bar * bar) * u2)
            }
            Admissibility::Half => {
                let num = triple.cell_volume() * singular.iter().zip(u).map(|(f, v)| f * v * v).sum::<f64>();
                (num, hat * (du2 + u2 / (rho0 * rho0)))
            }
        };
        let ratio = if num == 0.0 {
            0.0
        } else if den == 0.0 {
            f64::INFINITY
        } else {
            num / den
        };
        ratios.push(ratio);
    }
    let constant = ratios.iter().copied().fold(0.0, f64::max);
    Ok(EmbeddingReport { constant, ratios })
}

/// Empirical constant `N` in `|(v, b^{Mi}D_i u)| ≤ N b̂ (|Dv| + ρ0^{-1}|v|)|Du|`.
pub fn verify_drift_pairing(
    triple: &SpectralTriple,
    drift: &AdmissibleField,
    pairs: &[(GridFunction, GridFunction)],
    ctx: &StepContext<'_>,
) -> Result<f64> {
    if drift.n_components() != triple.dim() {
        return Err(Error::Config("drift must have one component per axis".into()));
    }
    let bm = drift.singular.eval(ctx);
    let rho0 = drift.params.rho0;
    let mut best: f64 = 0.0;
    for (v, u) in pairs {
        triple.check_grid(v.triple())?;
        triple.check_grid(u.triple())?;
        let du = triple.gradient(u.values());
        let mut pairing = 0.0;
        for (axis, g) in du.iter().enumerate() {
            pairing += triple.cell_volume()
                * v.values().iter().zip(bm.component(axis)).zip(g).map(|((a, b), c)| a * b * c).sum::<f64>();
        }
        let v_l2 = triple.l2_inner(v.values(), v.values()).sqrt();
        let den = drift.hat * (gradient_norm_sq(triple, v.values()).sqrt() + v_l2 / rho0) * gradient_norm_sq(triple, u.values()).sqrt();
        if pairing != 0.0 {
            best = best.max(if den > 0.0 { pairing.abs() / den } else { f64::INFINITY });
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::{inverse_power, Cutoff};
    use crate::triple::Order;

    fn grid(d: usize, m: usize, l: f64) -> SpectralTriple {
        SpectralTriple::new(d, m, l, Order::One).unwrap()
    }

    #[test]
    fn constant_field_norm_is_rho0_times_constant() {
        let t = grid(3, 16, 4.0);
        let params = MorreyParams::new(3.0, 1.0, 1.0, Admissibility::Full).unwrap();
        let sampler = BallSampler::ladder(&t, 1.0, 3, CenterSet::Stride(4));
        let n = morrey_norm(&t, &vec![2.5; t.len()], &params, &sampler).unwrap();
        assert!((n - 2.5).abs() < 1e-12 * 2.5, "{n}");
    }

    #[test]
    fn empty_sampler_is_a_configuration_error() {
        let t = grid(2, 8, 1.0);
        let params = MorreyParams::new(2.0, 0.1, 1.0, Admissibility::Full).unwrap();
        // 2h = 0.25 exceeds rho0, so the ladder is empty
        let sampler = BallSampler::ladder(&t, 0.1, 4, CenterSet::All);
        assert!(matches!(morrey_norm(&t, &vec![1.0; t.len()], &params, &sampler), Err(Error::Config(_))));
    }

    #[test]
    fn fft_ball_sums_match_direct_sums() {
        let t = grid(2, 12, 3.0);
        let f: Vec<f64> = (0..t.len()).map(|i| ((i * 7) % 11) as f64 / 3.0).collect();
        let params = MorreyParams::new(2.5, 1.0, 0.7, Admissibility::Full).unwrap();
        let radii = vec![0.5, 0.8, 1.0];
        let all = BallSampler::with_radii(CenterSet::All, radii.clone());
        let nodes = BallSampler::with_radii(CenterSet::Nodes((0..t.len()).collect()), radii);
        let a = morrey_norm(&t, &f, &params, &all).unwrap();
        let b = morrey_norm(&t, &f, &params, &nodes).unwrap();
        assert!((a - b).abs() < 1e-12 * b);
    }

    #[test]
    fn inverse_distance_scaling_quantity_near_sqrt_three() {
        let t = grid(3, 48, 4.0);
        let f = inverse_power(&t, &[0.0; 3], 1.0, Cutoff::for_box(4.0));
        let params = MorreyParams::new(2.0, 1.0, 1.0, Admissibility::Full).unwrap();
        for rho in [0.5, 1.0] {
            let s = BallSampler::with_radii(CenterSet::Nodes(vec![0]), vec![rho]);
            let v = morrey_norm(&t, &f, &params, &s).unwrap();
            assert!((v / 3f64.sqrt() - 1.0).abs() < 0.1, "rho {rho}: {v}");
        }
    }

    #[test]
    fn lps_classification() {
        assert!(check_lps(3, 3.0, f64::INFINITY).unwrap().critical);
        assert!(check_lps(3, f64::INFINITY, 2.0).unwrap().critical);
        let c = check_lps(3, 4.0, 4.0).unwrap();
        assert!(!c.critical && !c.subcritical);
        assert!((c.value - 1.25).abs() < 1e-15);
        assert!(check_lps(3, 8.0, 8.0).unwrap().subcritical);
        assert!(check_lps(3, 1.0, 4.0).is_err());
    }

    #[test]
    fn bounded_field_has_no_singular_part() {
        let t = grid(3, 8, 4.0);
        let params = MorreyParams::admissibility(3, 3.0, 1.0).unwrap();
        let sampler = BallSampler::ladder(&t, 1.0, 2, CenterSet::All);
        let b = Field::scalar(vec![0.5; t.len()]);
        let split = decompose_lpq(&t, &[0.0], &[b.clone()], 8.0, 1.0, &params, &sampler).unwrap();
        // λ = (64·0.5^8)^{1/5} = 0.758 > 0.5
        assert_eq!(split.field.hat, 0.0);
        assert_eq!(split.ball_maximum, 0.0);
        let ctx = StepContext::at(0.0);
        assert_eq!(&*split.field.bounded.eval(&ctx), &b);
    }

    #[test]
    fn split_reconstructs_bitwise() {
        let t = grid(3, 8, 2.0);
        let params = MorreyParams::admissibility(3, 3.0, 1.0).unwrap();
        let sampler = BallSampler::ladder(&t, 1.0, 2, CenterSet::All);
        let b = Field::scalar(inverse_power(&t, &[0.0; 3], 0.5, Cutoff::for_box(2.0)));
        let split = decompose_lpq(&t, &[0.0], &[b.clone()], 8.0, 1.0, &params, &sampler).unwrap();
        let ctx = StepContext::at(0.0);
        assert_eq!(split.field.total(&ctx), b);
        assert!(split.field.hat > 0.0);
    }

    #[test]
    fn rejects_subcritical_exponent() {
        let t = grid(3, 4, 2.0);
        let params = MorreyParams::admissibility(3, 3.0, 1.0).unwrap();
        let sampler = BallSampler::ladder(&t, 1.0, 1, CenterSet::All);
        let b = Field::scalar(vec![1.0; t.len()]);
        assert!(matches!(decompose_lpq(&t, &[0.0], &[b], 3.0, 1.0, &params, &sampler), Err(Error::Domain(_))));
    }

    #[test]
    fn zero_field_has_zero_weak_norm() {
        let t = grid(3, 8, 4.0);
        let s = BallSampler::ladder(&t, 1.0, 2, CenterSet::All);
        let r = check_weak_ld(&t, &vec![0.0; t.len()], &CenterSet::All, &[1.0, 2.0], 2.0, &s).unwrap();
        assert_eq!(r.weak_norm, 0.0);
    }

    #[test]
    fn constant_embedding_ratio_is_one_half() {
        let t = grid(1, 32, 6.0);
        let params = MorreyParams::new(3.0, 1.0, 1.0, Admissibility::Full).unwrap();
        let f = AdmissibleField::bounded(FieldSeries::constant(Field::scalar(vec![1.7; t.len()])), params);
        let u = GridFunction::new(&t, crate::profiles::gaussian_bump(&t, &[0.0], 0.7, 1.0)).unwrap();
        let rep = verify_embedding(&t, &f, &[u], &StepContext::at(0.0)).unwrap();
        assert!((rep.constant - 0.5).abs() < 1e-14);
        let zero = AdmissibleField::zero(t.len(), 1, params);
        let u = GridFunction::new(&t, vec![1.0; t.len()]).unwrap();
        assert_eq!(verify_embedding(&t, &zero, &[u], &StepContext::at(0.0)).unwrap().constant, 0.0);
    }
}
