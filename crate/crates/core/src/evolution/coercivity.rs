//! Sampled certificate of the coercivity inequality
//! `2⟨v, A_t v⟩ + Σ_k |B^k_t v|²_H ≤ −δ|v|²_V`.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::operators::OperatorPair;
use crate::field::StepContext;
use crate::triple::SpectralTriple;

/// Identifies a test function.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Sample {
    /// `cos(ξ·x)` or `sin(ξ·x)` for the integer wavevector `k`
    Mode { k: Vec<i64>, sine: bool },
    /// random combination with `V`-normalized spectrum
    Random(usize),
    /// caller-supplied function
    Supplied(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoercivityReport {
    /// minimum of `−(2⟨v,Av⟩ + Σ|B^k v|²_H)/|v|²_V` over samples and times
    pub estimate: f64,
    pub certified: bool,
    pub worst_sample: Sample,
    pub worst_time: f64,
    pub evaluated: usize,
    /// largest observed `|A v|_{V*}/|v|_V`
    pub drift_ratio: f64,
    /// largest observed `(Σ|B^k v|²_H)^{1/2}/(K₀|v|_V + K₁|v|_H)`
    pub noise_ratio: f64,
}

impl CoercivityReport {
    pub fn require(&self, required: f64) -> Result<()> {
        if self.estimate >= required {
            Ok(())
        } else {
            Err(Error::Coercivity { estimate: self.estimate, required })
        }
    }
}

/// Sampling plan: real Fourier modes (lowest and highest `|ξ|` when the grid
/// has more than `max_modes`), random combinations, supplied functions.
#[derive(Clone, Debug)]
pub struct CoercivityProbe {
    pub random: usize,
    pub max_modes: usize,
    pub seed: u64,
    pub supplied: Vec<Vec<f64>>,
}

impl Default for CoercivityProbe {
    fn default() -> Self {
        Self { random: 8, max_modes: 256, seed: 0x5eed, supplied: Vec::new() }
    }
}

impl CoercivityProbe {
    pub fn with_random(mut self, random: usize) -> Self {
        self.random = random;
        self
    }

    pub fn samples(&self, triple: &SpectralTriple) -> Vec<(Sample, Vec<f64>)> {
        let mut out = Vec::new();
        let n = triple.len();
        let m = triple.points_per_axis() as i64;
        let d = triple.dim();
        let mut reps: Vec<usize> = (0..n).filter(|&i| i <= triple.conjugate_index(i)).collect();
        reps.sort_by(|a, b| triple.xi_sq()[*a].total_cmp(&triple.xi_sq()[*b]).then(a.cmp(b)));
        let per_mode = |i: usize| if i == triple.conjugate_index(i) { 1 } else { 2 };
        let total: usize = reps.iter().map(|&i| per_mode(i)).sum();
        let chosen: Vec<usize> = if total <= self.max_modes {
            reps
        } else {
            let half = (self.max_modes / 4).max(1);
            let mut c: Vec<usize> = reps[..half.min(reps.len())].to_vec();
            c.extend_from_slice(&reps[reps.len().saturating_sub(half)..]);
            c.dedup();
            c
        };
        for idx in chosen {
            let mi = triple.multi_index(idx);
            let k: Vec<i64> = (0..d).map(|a| if mi[a] as i64 <= m / 2 { mi[a] as i64 } else { mi[a] as i64 - m }).collect();
            let xi: Vec<f64> = (0..d).map(|a| triple.wavenumbers(a)[idx]).collect();
            let phase = |j: usize| -> f64 {
                let x = triple.node(j);
                (0..d).map(|a| xi[a] * x[a]).sum()
            };
            out.push((Sample::Mode { k: k.clone(), sine: false }, (0..n).map(|j| phase(j).cos()).collect()));
            if idx != triple.conjugate_index(idx) {
                out.push((Sample::Mode { k, sine: true }, (0..n).map(|j| phase(j).sin()).collect()));
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        for r in 0..self.random {
            let white: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
            let sym: Vec<f64> = triple.v_weights().iter().map(|w| w.powf(-0.5)).collect();
            out.push((Sample::Random(r), triple.apply_symbol(&white, &sym)));
        }
        for (i, v) in self.supplied.iter().enumerate() {
            out.push((Sample::Supplied(i), v.clone()));
        }
        out
    }

    pub fn check(&self, triple: &SpectralTriple, ops: &OperatorPair, times: &[f64]) -> Result<CoercivityReport> {
        let samples = self.samples(triple);
        let zero_w = vec![0.0; ops.channels()];
        let times: Vec<f64> = if times.is_empty() { vec![0.0] } else { times.to_vec() };
        let mut report = CoercivityReport {
            estimate: f64::INFINITY,
            certified: false,
            worst_sample: Sample::Random(0),
            worst_time: times[0],
            evaluated: 0,
            drift_ratio: 0.0,
            noise_ratio: 0.0,
        };
        for &t in &times {
            let ctx = StepContext { t, step: 0, wiener: &zero_w };
            let a = ops.principal.at(&ctx);
            let b = ops.noise.at(&ctx);
            for (label, v) in &samples {
                triple.check_len(v)?;
                let (h, vn) = triple.norms_sq(v);
                if vn == 0.0 {
                    continue;
                }
                let av = a.apply(v);
                let pairing = triple.l2_inner(v, &av);
                let noise: f64 = b.apply(v).iter().map(|g| triple.represented_h_norm_sq(g)).sum();
                let q = -(2.0 * pairing + noise) / vn;
                if !q.is_finite() {
                    return Err(Error::NonFinite(format!("coercivity form at t = {t} for sample {label:?}")));
                }
                report.evaluated += 1;
                if q < report.estimate {
                    report.estimate = q;
                    report.worst_sample = label.clone();
                    report.worst_time = t;
                }
                report.drift_ratio = report.drift_ratio.max((triple.dual_norm_sq(&av) / vn).sqrt());
                let denom = ops.noise_bound * vn.sqrt() + ops.affine_noise_bound.unwrap_or(0.0) * h.sqrt();
                if noise > 0.0 {
                    report.noise_ratio = report.noise_ratio.max(noise.sqrt() / denom);
                }
            }
        }
        if report.evaluated == 0 {
            return Err(Error::Config("no nonzero coercivity samples".into()));
        }
        report.certified = report.estimate > 0.0;
        Ok(report)
    }
}

/// [`CoercivityProbe::check`] with `samples` random combinations.
pub fn check_coercivity(
    ops: &OperatorPair,
    triple: &SpectralTriple,
    samples: usize,
    times: &[f64],
) -> Result<CoercivityReport> {
    if samples == 0 {
        return Err(Error::Domain("at least one random sample is required".into()));
    }
    CoercivityProbe::default().with_random(samples).check(triple, ops, times)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::evolution::operators::*;
    use crate::Order;

    #[test]
    fn negative_v_pairing_gives_two() {
        let tr = SpectralTriple::new(2, 8, 3.0, Order::One).unwrap();
        let ops = OperatorPair::new(
            Arc::new(SymbolOperator::negative_v_pairing(&tr)),
            Arc::new(ZeroChannels(0)),
            1.0,
        )
        .unwrap();
        let r = check_coercivity(&ops, &tr, 4, &[0.0]).unwrap();
        assert!((r.estimate - 2.0).abs() < 1e-12, "{}", r.estimate);
        assert!(r.certified);
    }

    #[test]
    fn gradient_noise_matches_the_mode_scan() {
        // 2|ξ|²+2 − |ξ|² over 1+|ξ|², minimized over resolved modes; the
        // first-derivative symbol vanishes at Nyquist so those modes give 2
        let tr = SpectralTriple::new(1, 16, 2.0 * std::f64::consts::PI, Order::One).unwrap();
        let ops = OperatorPair::new(
            Arc::new(SymbolOperator::negative_v_pairing(&tr)),
            Arc::new(DerivativeChannels::new(&tr, 1.0)),
            1.0,
        )
        .unwrap();
        let mut oracle = f64::INFINITY;
        for (x2, dx) in tr.xi_sq().iter().zip(tr.derivative_symbol(0)) {
            oracle = oracle.min((2.0 * (1.0 + x2) - dx * dx) / (1.0 + x2));
        }
        let r = check_coercivity(&ops, &tr, 4, &[0.0]).unwrap();
        assert!((r.estimate - oracle).abs() < 1e-10, "{} vs {oracle}", r.estimate);
        assert!((oracle - 51.0 / 50.0).abs() < 1e-12);
    }

    #[test]
    fn vanishing_drift_is_not_certified() {
        let tr = SpectralTriple::new(1, 8, 2.0, Order::One).unwrap();
        let a = SymbolOperator::negative_v_pairing(&tr).scaled(0.0);
        let ops = OperatorPair::new(Arc::new(a), Arc::new(DerivativeChannels::new(&tr, 1.0)), 1.0).unwrap();
        let r = check_coercivity(&ops, &tr, 2, &[0.0]).unwrap();
        assert!(r.estimate <= 0.0);
        assert!(!r.certified);
        assert!(r.require(0.5).is_err());
    }

    #[test]
    fn mode_cap_keeps_extremes() {
        let tr = SpectralTriple::new(2, 32, 2.0, Order::One).unwrap();
        let probe = CoercivityProbe { random: 0, max_modes: 16, ..Default::default() };
        let s = probe.samples(&tr);
        assert!(s.len() <= 16);
        assert!(s.iter().any(|(l, _)| matches!(l, Sample::Mode { k, .. } if k.iter().all(|x| *x == 0))));
    }
}
