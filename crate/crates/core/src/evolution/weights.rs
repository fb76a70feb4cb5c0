//! Exponential weights `e^{−φ_t}` with `φ_t = ∫₀ᵗ α_s ds`.

use crate::error::{Error, Result};
use crate::evolution::operators::{LowerOrderBounds, OperatorPair};

/// Piecewise constant rate `α_n + μ_n` on each step.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightProcess {
    alpha: Vec<f64>,
    extra: Vec<f64>,
    dt: f64,
}

impl WeightProcess {
    pub fn from_series(alpha: Vec<f64>, dt: f64) -> Result<Self> {
        if alpha.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
            return Err(Error::Domain("weight rates must be finite and nonnegative".into()));
        }
        let extra = vec![0.0; alpha.len()];
        Ok(Self { alpha, extra, dt })
    }

    pub fn constant(alpha: f64, dt: f64, steps: usize) -> Result<Self> {
        Self::from_series(vec![alpha; steps], dt)
    }

    pub fn zero(dt: f64, steps: usize) -> Self {
        Self { alpha: vec![0.0; steps], extra: vec![0.0; steps], dt }
    }

    /// The user channel `μ`, added to the recipe rate.
    pub fn with_extra(mut self, mu: f64) -> Result<Self> {
        if !(mu.is_finite() && mu >= 0.0) {
            return Err(Error::Domain(format!("extra weight must be nonnegative, got {mu}")));
        }
        self.extra = vec![mu; self.alpha.len()];
        Ok(self)
    }

    /// Default rate for the perturbed equation:
    /// `max(floor, 16|𝔞|²/δ, 32|𝔞*|²/δ + (2056 + 32K₀²/δ)|𝔟|² + 4|𝔠|, K₁²)`.
    pub fn lower_order_recipe(
        ops: &OperatorPair,
        bounds: &LowerOrderBounds,
        dt: f64,
        steps: usize,
        floor: f64,
    ) -> Result<Self> {
        let alpha = (0..steps)
            .map(|n| {
                let req = required_rate(ops, bounds, n as f64 * dt);
                req.max(floor)
            })
            .collect();
        Self::from_series(alpha, dt)
    }

    pub fn steps(&self) -> usize {
        self.alpha.len()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Recipe part `α_n` on step `n`.
    pub fn alpha(&self, n: usize) -> f64 {
        self.alpha[n]
    }

    /// Total rate `α_n + μ_n` on step `n`.
    pub fn rate(&self, n: usize) -> f64 {
        self.alpha[n] + self.extra[n]
    }

    /// `φ` at the grid times `t_0, …, t_N`.
    pub fn phi(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.alpha.len() + 1);
        let mut acc = 0.0;
        out.push(0.0);
        for n in 0..self.alpha.len() {
            acc += self.rate(n) * self.dt;
            out.push(acc);
        }
        out
    }

    /// `∫₀ᵀ α dt`; deterministic rates make this the supremum over paths.
    pub fn sup_bound(&self) -> f64 {
        *self.phi().last().unwrap_or(&0.0)
    }
}

/// Smallest rate the perturbation theorem accepts at time `t`.
pub fn required_rate(ops: &OperatorPair, bounds: &LowerOrderBounds, t: f64) -> f64 {
    let delta = ops.delta;
    let k0 = ops.noise_bound;
    let a = bounds.gradient.at(t);
    let a_star = bounds.dual.at(t);
    let b = bounds.noise.at(t);
    let c = bounds.reaction.at(t);
    let first = 16.0 / delta * a * a;
    let noise_coeff = if b == 0.0 { 0.0 } else { 2056.0 + 32.0 * k0 * k0 / delta };
    let second = 32.0 / delta * a_star * a_star + noise_coeff * b * b + 4.0 * c;
    let affine = ops.affine_noise_bound.map_or(0.0, |k1| k1 * k1);
    first.max(second).max(affine)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phi_starts_at_zero_and_accumulates() {
        let w = WeightProcess::constant(2.0, 0.1, 5).unwrap().with_extra(1.0).unwrap();
        let phi = w.phi();
        assert_eq!(phi[0], 0.0);
        assert!(phi.windows(2).all(|p| p[1] >= p[0]));
        assert!((w.sup_bound() - 1.5).abs() < 1e-12);
    }

    #[test]
    fn negative_rates_are_rejected() {
        assert!(WeightProcess::from_series(vec![1.0, -1.0], 0.1).is_err());
    }
}
