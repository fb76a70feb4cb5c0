//! Coefficients and free terms of the divergence-form equation
//! `du = (D_i(a^{ij}D_j u + β^i u) + b^i D_i u + c u + D_i𝔣^i + f + g) dt
//!      + (σ^{ik}D_i u + ν^k u + h^k) dw^k`.
//!
//! Component layouts: `a^{ij}` at `i·d + j`, `σ^{ik}` at `i·K + k`,
//! `D_k a^{ij}` at `(k·d + i)·d + j`, `D_l σ^{ik}` at `(l·d + i)·K + k`,
//! `D_l ν^k` at `l·K + k`, `D_l c` at `l`.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Field, FieldSeries, StepContext};
use crate::morrey::{AdmissibleField, MorreyParams};
use crate::triple::SpectralTriple;

/// Derivative data needed by the `W¹₂` assembly and the `W¹_p` report.
#[derive(Clone, Debug)]
pub struct CoefficientDerivatives {
    pub diffusion: AdmissibleField,
    pub noise_gradient: AdmissibleField,
    pub noise_reaction: AdmissibleField,
    /// used by the variant with a half-admissible reaction gradient
    pub reaction: Option<AdmissibleField>,
}

#[derive(Clone, Debug)]
pub struct SpdeCoefficients {
    pub dim: usize,
    pub channels: usize,
    /// `a`
    pub diffusion: FieldSeries,
    /// `σ`
    pub noise_gradient: FieldSeries,
    /// `β`
    pub divergence_drift: AdmissibleField,
    /// `b`
    pub drift: AdmissibleField,
    /// `c`, half-admissible
    pub reaction: AdmissibleField,
    /// `ν`
    pub noise_reaction: AdmissibleField,
    pub derivatives: Option<CoefficientDerivatives>,
}

/// Pointwise sums of the Morrey constants entering the smallness gate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HatSum {
    pub sum: f64,
    pub terms: Vec<(String, f64)>,
}

impl HatSum {
    pub fn describe(&self) -> String {
        self.terms.iter().map(|(n, v)| format!("{n} = {v:.6}")).collect::<Vec<_>>().join(", ")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EllipticityReport {
    /// minimum of `(2a − σσᵀ)λ·λ/|λ|²` over nodes, times and sampled `λ`
    pub margin: f64,
    /// maximum Frobenius norm of `a`
    pub size: f64,
    pub satisfied: bool,
}

impl SpdeCoefficients {
    /// `a = diffusion·I`, `σ^{ik} = noise·δ^{ik}`, all lower-order terms zero.
    pub fn isotropic(triple: &SpectralTriple, channels: usize, diffusion: f64, noise: f64, params: MorreyParams) -> Self {
        let d = triple.dim();
        let n = triple.len();
        let mut a = vec![vec![0.0; n]; d * d];
        for i in 0..d {
            a[i * d + i] = vec![diffusion; n];
        }
        let mut s = vec![vec![0.0; n]; d * channels];
        for i in 0..d.min(channels) {
            s[i * channels + i] = vec![noise; n];
        }
        let zero = |m: usize| AdmissibleField::zero(n, m, params);
        Self {
            dim: d,
            channels,
            diffusion: FieldSeries::constant(Field::from_components(a).expect("finite")),
            noise_gradient: FieldSeries::constant(Field::from_components(s).expect("finite")),
            divergence_drift: zero(d),
            drift: zero(d),
            reaction: zero(1),
            noise_reaction: zero(channels),
            derivatives: None,
        }
    }

    pub fn validate(&self, triple: &SpectralTriple) -> Result<()> {
        let d = self.dim;
        let k = self.channels;
        if d != triple.dim() {
            return Err(Error::Config(format!("coefficients are {d}-dimensional, grid is {}-dimensional", triple.dim())));
        }
        let n = triple.len();
        let check = |name: &str, len: usize, comps: usize, want: usize| -> Result<()> {
            if len != n || comps != want {
                return Err(Error::Config(format!(
                    "coefficient {name} needs {want} component(s) of length {n}, got {comps} of length {len}"
                )));
            }
            Ok(())
        };
        check("a", self.diffusion.len(), self.diffusion.n_components(), d * d)?;
        check("sigma", self.noise_gradient.len(), self.noise_gradient.n_components(), d * k)?;
        for (name, f, want) in [
            ("beta", &self.divergence_drift, d),
            ("b", &self.drift, d),
            ("c", &self.reaction, 1),
            ("nu", &self.noise_reaction, k),
        ] {
            check(name, f.singular.len(), f.n_components(), want)?;
            check(name, f.bounded.len(), f.bounded.n_components(), want)?;
        }
        if let Some(der) = &self.derivatives {
            check("Da", der.diffusion.singular.len(), der.diffusion.n_components(), d * d * d)?;
            check("Dsigma", der.noise_gradient.singular.len(), der.noise_gradient.n_components(), d * d * k)?;
            check("Dnu", der.noise_reaction.singular.len(), der.noise_reaction.n_components(), d * k)?;
            if let Some(dc) = &der.reaction {
                check("Dc", dc.singular.len(), dc.n_components(), d)?;
            }
        }
        Ok(())
    }

    /// Hat sum for the `L₂` theory, or with the derivative channels (and
    /// without `β`) for the `W¹₂` theory.
    pub fn hat_sum(&self, with_derivatives: bool) -> HatSum {
        let mut terms = vec![("b".to_string(), self.drift.hat)];
        if !with_derivatives {
            terms.push(("beta".into(), self.divergence_drift.hat));
        }
        terms.push(("c".into(), self.reaction.hat));
        terms.push(("nu".into(), self.noise_reaction.hat));
        if with_derivatives {
            if let Some(der) = &self.derivatives {
                terms.push(("Da".into(), der.diffusion.hat));
                terms.push(("Dsigma".into(), der.noise_gradient.hat));
                terms.push(("Dnu".into(), der.noise_reaction.hat));
                if let Some(dc) = &der.reaction {
                    terms.push(("Dc".into(), dc.hat));
                }
            }
        }
        HatSum { sum: terms.iter().map(|t| t.1).sum(), terms }
    }

    /// Checks `|a| ≤ 1/δ` and `(2a − σσᵀ)λ·λ ≥ δ|λ|²` on every node at the
    /// given times for a fixed battery of directions.
    pub fn check_ellipticity(&self, delta: f64, times: &[f64]) -> EllipticityReport {
        let d = self.dim;
        let k = self.channels;
        let dirs = directions(d);
        let zero_w = vec![0.0; k];
        let mut margin = f64::INFINITY;
        let mut size = 0.0f64;
        let times = if times.is_empty() { vec![0.0] } else { times.to_vec() };
        for &t in &times {
            let ctx = StepContext { t, step: 0, wiener: &zero_w };
            let a = self.diffusion.eval(&ctx);
            let s = self.noise_gradient.eval(&ctx);
            for x in 0..a.len() {
                let mut m = [[0.0; 3]; 3];
                let mut frob = 0.0;
                for i in 0..d {
                    for j in 0..d {
                        let aij = a.component(i * d + j)[x];
                        frob += aij * aij;
                        let ss: f64 = (0..k).map(|c| s.component(i * k + c)[x] * s.component(j * k + c)[x]).sum();
                        m[i][j] = 2.0 * aij - ss;
                    }
                }
                size = size.max(frob.sqrt());
                for l in &dirs {
                    let q: f64 = (0..d).map(|i| (0..d).map(|j| m[i][j] * l[i] * l[j]).sum::<f64>()).sum();
                    margin = margin.min(q);
                }
            }
        }
        // roundoff in σσᵀ must not flip the verdict at the boundary
        let tol = 1e-12 * (1.0 + size);
        EllipticityReport { margin, size, satisfied: margin >= delta - tol && size <= 1.0 / delta + tol }
    }

    /// Fills the derivative data by spectral differentiation of the total
    /// coefficients; everything lands in bounded parts.
    pub fn with_spectral_derivatives(mut self, triple: &SpectralTriple, params: MorreyParams) -> Self {
        let d = self.dim;
        let tr = triple.clone();
        let grad_layout = move |f: &Field| -> Field {
            // component c of f becomes D_l f_c at l·n_c + c
            let nc = f.n_components();
            let grads: Vec<Vec<Vec<f64>>> = f.components().iter().map(|c| tr.gradient(c)).collect();
            let mut out = Vec::with_capacity(d * nc);
            for l in 0..d {
                for g in &grads {
                    out.push(g[l].clone());
                }
            }
            Field::from_components(out).expect("finite")
        };
        let total = |a: &AdmissibleField| -> FieldSeries {
            FieldSeries::sum(vec![a.singular.clone(), a.bounded.clone()]).expect("matching parts")
        };
        let g = grad_layout.clone();
        let da = AdmissibleField::bounded(self.diffusion.map(move |f| g(f)), params);
        let g = grad_layout.clone();
        let ds = AdmissibleField::bounded(self.noise_gradient.map(move |f| g(f)), params);
        let g = grad_layout.clone();
        let dn = AdmissibleField::bounded(total(&self.noise_reaction).map(move |f| g(f)), params);
        let g = grad_layout;
        let dc = AdmissibleField::bounded(total(&self.reaction).map(move |f| g(f)), params.with_alpha(self.reaction.params.alpha));
        self.derivatives = Some(CoefficientDerivatives { diffusion: da, noise_gradient: ds, noise_reaction: dn, reaction: Some(dc) });
        self
    }
}

fn directions(d: usize) -> Vec<[f64; 3]> {
    let mut out = Vec::new();
    for i in 0..d {
        let mut e = [0.0; 3];
        e[i] = 1.0;
        out.push(e);
        for j in i + 1..d {
            for s in [1.0, -1.0] {
                let mut e = [0.0; 3];
                e[i] = std::f64::consts::FRAC_1_SQRT_2;
                e[j] = s * std::f64::consts::FRAC_1_SQRT_2;
                out.push(e);
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..16 {
        let mut e = [0.0; 3];
        for c in e.iter_mut().take(d) {
            *c = rng.gen::<f64>() - 0.5;
        }
        let n = e.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-3 {
            e.iter_mut().for_each(|x| *x /= n);
            out.push(e);
        }
    }
    out
}

/// Free terms; absent channels vanish.
#[derive(Clone, Debug, Default)]
pub struct SpdeForcing {
    /// `𝔣`, `d` components
    pub divergence: Option<FieldSeries>,
    /// `f`
    pub source: Option<FieldSeries>,
    /// `g`, integrable in time only
    pub integrable: Option<FieldSeries>,
    /// `h`, `K` components
    pub noise: Option<FieldSeries>,
}

impl SpdeForcing {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn scaled(&self, c: f64) -> Self {
        let s = |f: &Option<FieldSeries>| f.as_ref().map(|f| f.map(move |x| x.scaled(c)));
        Self {
            divergence: s(&self.divergence),
            source: s(&self.source),
            integrable: s(&self.integrable),
            noise: s(&self.noise),
        }
    }

    pub fn validate(&self, triple: &SpectralTriple, channels: usize) -> Result<()> {
        let n = triple.len();
        for (name, f, want) in [
            ("frak f", &self.divergence, triple.dim()),
            ("f", &self.source, 1),
            ("g", &self.integrable, 1),
            ("h", &self.noise, channels),
        ] {
            if let Some(f) = f {
                if f.len() != n || f.n_components() != want {
                    return Err(Error::Config(format!(
                        "forcing {name} needs {want} component(s) of length {n}, got {} of length {}",
                        f.n_components(),
                        f.len()
                    )));
                }
            }
        }
        Ok(())
    }
}
