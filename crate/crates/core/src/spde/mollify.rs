//! Regularized problems: spatial mollification of every coefficient and
//! data channel, with bounded parts switched off where `h̄_t > 1/ε` and data
//! switched off where `|f_t|_{L_p} > 1/ε`.
//!
//! The kernel is the grid restriction of a separable product of bumps
//! `exp(−1/(1 − (y/ε)²))`, normalized to unit discrete mass. Its weights are
//! nonnegative, so by Jensen neither the sup of `|f|` nor any ball mean of
//! `|f|^r` grows under convolution: certified hats and envelopes stay valid.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::{Envelope, Field, FieldSeries, StepContext};
use crate::morrey::AdmissibleField;
use crate::spde::coefficients::{CoefficientDerivatives, SpdeCoefficients, SpdeForcing};
use crate::triple::SpectralTriple;

#[derive(Clone, Debug)]
pub struct Mollifier {
    triple: SpectralTriple,
    epsilon: f64,
    symbol: Arc<Vec<f64>>,
}

impl Mollifier {
    pub fn new(triple: &SpectralTriple, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::Domain(format!("mollification parameter must lie in (0, 1), got {epsilon}")));
        }
        let m = triple.points_per_axis();
        let h = triple.spacing();
        let bump = |y: f64| {
            let s = y / epsilon;
            if s.abs() < 1.0 {
                (-1.0 / (1.0 - s * s)).exp()
            } else {
                0.0
            }
        };
        // signed offsets of the axis nodes
        let axis: Vec<f64> = (0..m)
            .map(|j| {
                let k = if j <= m / 2 { j as f64 } else { j as f64 - m as f64 };
                bump(k * h)
            })
            .collect();
        let d = triple.dim();
        let mut weights: Vec<f64> = (0..triple.len())
            .map(|idx| {
                let mi = triple.multi_index(idx);
                (0..d).map(|a| axis[mi[a]]).product()
            })
            .collect();
        let mass: f64 = weights.iter().sum();
        if mass > 0.0 {
            weights.iter_mut().for_each(|w| *w /= mass);
        } else {
            // support narrower than one cell: the identity
            weights[0] = 1.0;
        }
        let scale = (triple.cell_volume() / triple.len() as f64).sqrt();
        let symbol = triple.forward(&weights).iter().map(|z| z.re / scale).collect();
        Ok(Self { triple: triple.clone(), epsilon, symbol: Arc::new(symbol) })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn symbol(&self) -> &[f64] {
        &self.symbol
    }

    pub fn apply(&self, values: &[f64]) -> Vec<f64> {
        self.triple.apply_symbol(values, &self.symbol)
    }

    pub fn apply_field(&self, f: &Field) -> Field {
        f.map_components(|c| self.apply(c))
    }

    pub fn apply_series(&self, series: &FieldSeries) -> FieldSeries {
        if series.is_identically_zero() {
            return series.clone();
        }
        let me = self.clone();
        series.map(move |f| me.apply_field(f))
    }

    /// `h^{Bε} + h^{M(ε)}`: mollified singular part with the certified hat
    /// kept, mollified bounded part switched off where `h̄_t > 1/ε`.
    pub fn admissible(&self, field: &AdmissibleField) -> AdmissibleField {
        let level = 1.0 / self.epsilon;
        let bounded = self.apply_series(&field.bounded);
        let (bounded, bar) = match &field.bar {
            Envelope::Constant(v) if *v <= level => (bounded, field.bar.clone()),
            Envelope::Constant(_) => {
                (FieldSeries::zeros(field.bounded.len(), field.bounded.n_components()), Envelope::Constant(0.0))
            }
            env @ Envelope::Tabulated { .. } => {
                let gate = env.clone();
                let (n, len) = (bounded.n_components(), bounded.len());
                let inner = bounded.clone();
                let series = FieldSeries::Lazy {
                    eval: Arc::new(move |t: f64, w: &[f64]| {
                        if gate.at(t) <= level {
                            inner.eval(&StepContext { t, step: 0, wiener: w }).into_owned()
                        } else {
                            Field::zeros(len, n)
                        }
                    }),
                    n_components: n,
                    len,
                };
                let bar = Envelope::combine(&[env], |v| if v[0] <= level { v[0] } else { 0.0 });
                (series, bar)
            }
        };
        AdmissibleField {
            singular: self.apply_series(&field.singular),
            bounded,
            hat: field.hat,
            bar,
            params: field.params,
        }
    }

    /// Mollified data switched off at times where `|f_t|_{L_p} > 1/ε`.
    pub fn data(&self, series: &FieldSeries, p: f64) -> FieldSeries {
        if series.is_identically_zero() {
            return series.clone();
        }
        let level = 1.0 / self.epsilon;
        let me = self.clone();
        let tr = self.triple.clone();
        let inner = series.clone();
        let (n, len) = (series.n_components(), series.len());
        FieldSeries::Lazy {
            eval: Arc::new(move |t: f64, w: &[f64]| {
                let f = inner.eval(&StepContext { t, step: 0, wiener: w });
                if lp_norm(&tr, &f.magnitude(), p) <= level {
                    me.apply_field(&f)
                } else {
                    Field::zeros(len, n)
                }
            }),
            n_components: n,
            len,
        }
    }
}

/// Grid quadrature `(h^d Σ|f|^p)^{1/p}`.
pub fn lp_norm(triple: &SpectralTriple, values: &[f64], p: f64) -> f64 {
    (triple.cell_volume() * values.iter().map(|v| v.abs().powf(p)).sum::<f64>()).powf(1.0 / p)
}

/// The regularized problem for one `ε`.
#[derive(Clone, Debug)]
pub struct MollifiedProblem {
    pub epsilon: f64,
    pub coefficients: SpdeCoefficients,
    pub forcing: SpdeForcing,
    pub initial: Vec<f64>,
}

/// Mollifies every channel; data cutoffs use the `L_p` norm with exponent `p`.
pub fn mollify_problem(
    triple: &SpectralTriple,
    coeffs: &SpdeCoefficients,
    forcing: &SpdeForcing,
    initial: &[f64],
    epsilon: f64,
    p: f64,
) -> Result<MollifiedProblem> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::Domain(format!("data cutoff exponent must be at least 1, got {p}")));
    }
    coeffs.validate(triple)?;
    forcing.validate(triple, coeffs.channels)?;
    let m = Mollifier::new(triple, epsilon)?;
    let coefficients = SpdeCoefficients {
        dim: coeffs.dim,
        channels: coeffs.channels,
        diffusion: m.apply_series(&coeffs.diffusion),
        noise_gradient: m.apply_series(&coeffs.noise_gradient),
        divergence_drift: m.admissible(&coeffs.divergence_drift),
        drift: m.admissible(&coeffs.drift),
        reaction: m.admissible(&coeffs.reaction),
        noise_reaction: m.admissible(&coeffs.noise_reaction),
        derivatives: coeffs.derivatives.as_ref().map(|der| CoefficientDerivatives {
            diffusion: m.admissible(&der.diffusion),
            noise_gradient: m.admissible(&der.noise_gradient),
            noise_reaction: m.admissible(&der.noise_reaction),
            reaction: der.reaction.as_ref().map(|dc| m.admissible(dc)),
        }),
    };
    let data = |f: &Option<FieldSeries>| f.as_ref().map(|f| m.data(f, p));
    let forcing = SpdeForcing {
        divergence: data(&forcing.divergence),
        source: data(&forcing.source),
        integrable: data(&forcing.integrable),
        noise: data(&forcing.noise),
    };
    Ok(MollifiedProblem { epsilon, coefficients, forcing, initial: m.apply(initial) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::morrey::{morrey_norm, BallSampler, CenterSet, MorreyParams};
    use crate::profiles::{inverse_power, Cutoff};
    use crate::Order;

    #[test]
    fn kernel_has_unit_mass_and_bounded_symbol() {
        let tr = SpectralTriple::new(2, 32, 4.0, Order::One).unwrap();
        let m = Mollifier::new(&tr, 0.5).unwrap();
        assert!((m.symbol()[0] - 1.0).abs() < 1e-12);
        assert!(m.symbol().iter().all(|s| s.abs() <= 1.0 + 1e-12));
        let ones = vec![1.0; tr.len()];
        assert!(m.apply(&ones).iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn narrow_kernel_is_the_identity() {
        let tr = SpectralTriple::new(1, 16, 8.0, Order::One).unwrap();
        let m = Mollifier::new(&tr, 0.4).unwrap();
        let f = tr.sample(|x| x[0].sin()).into_values();
        let g = m.apply(&f);
        assert!(f.iter().zip(&g).all(|(a, b)| (a - b).abs() < 1e-14));
        assert!(Mollifier::new(&tr, 1.0).is_err());
        assert!(Mollifier::new(&tr, 0.0).is_err());
    }

    #[test]
    fn smooth_channel_error_is_first_order() {
        let tr = SpectralTriple::new(1, 512, 2.0 * std::f64::consts::PI, Order::One).unwrap();
        let f = tr.sample(|x| (x[0]).sin() + 0.2 * (2.0 * x[0]).cos()).into_values();
        let err = |eps: f64| {
            let g = Mollifier::new(&tr, eps).unwrap().apply(&f);
            f.iter().zip(&g).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        };
        let (e1, e2) = (err(0.2), err(0.1));
        assert!(e1 < 0.2 && e2 < 0.1, "{e1} {e2}");
        assert!(e2 < e1);
    }

    #[test]
    fn inverse_distance_hat_does_not_grow() {
        let tr = SpectralTriple::new(3, 24, 2.0, Order::One).unwrap();
        let center = [1.0, 1.0, 1.0];
        let f = inverse_power(&tr, &center, 1.0, Cutoff::for_box(2.0));
        let params = MorreyParams::admissibility(3, 2.5, 0.5).unwrap();
        let sampler = BallSampler::ladder(&tr, 0.5, 4, CenterSet::All);
        let base = morrey_norm(&tr, &f, &params, &sampler).unwrap();
        for eps in [0.5, 0.25, 0.125] {
            let g = Mollifier::new(&tr, eps).unwrap().apply(&f);
            let mag: Vec<f64> = g.iter().map(|v| v.abs()).collect();
            let hat = morrey_norm(&tr, &mag, &params, &sampler).unwrap();
            assert!(hat <= base * (1.0 + 1e-9), "eps {eps}: {hat} > {base}");
        }
    }

    #[test]
    fn bounded_part_is_cut_above_the_level() {
        let tr = SpectralTriple::new(1, 16, 4.0, Order::One).unwrap();
        let params = MorreyParams::new(2.5, 1.0, 1.0, crate::morrey::Admissibility::Full).unwrap();
        let big = AdmissibleField::bounded(FieldSeries::constant(Field::scalar(vec![5.0; 16])), params);
        let m = Mollifier::new(&tr, 0.5).unwrap();
        let cut = m.admissible(&big);
        assert!(cut.bounded.is_identically_zero());
        let m = Mollifier::new(&tr, 0.1).unwrap();
        let kept = m.admissible(&big);
        assert_eq!(kept.bar.sup(), 5.0);
        let data = m.data(&FieldSeries::constant(Field::scalar(vec![100.0; 16])), 2.0);
        assert!(data.eval(&StepContext::at(0.0)).is_zero());
    }
}
