//! Analytic coefficient and data profiles sampled on the grid.
//!
//! Profiles singular at a point are sampled pointwise except at the node
//! whose cell contains the singular point; that node receives the average of
//! the profile over its cell, so grid quadratures of integrable
//! singularities stay finite.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::field::{Field, FieldSeries};
use crate::triple::SpectralTriple;

/// Smooth radial cutoff: `1` for `r ≤ inner`, `0` for `r ≥ outer`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cutoff {
    pub inner: f64,
    pub outer: f64,
}

impl Cutoff {
    pub fn value(&self, r: f64) -> f64 {
        if r <= self.inner {
            1.0
        } else if r >= self.outer {
            0.0
        } else {
            let s = (self.outer - r) / (self.outer - self.inner);
            let a = (-1.0 / s).exp();
            let b = (-1.0 / (1.0 - s)).exp();
            a / (a + b)
        }
    }

    /// The default periodization used for singular profiles: full support
    /// inside `0.3 L`, vanishing beyond `0.45 L`.
    pub fn for_box(box_length: f64) -> Self {
        Self { inner: 0.3 * box_length, outer: 0.45 * box_length }
    }
}

/// Average of `f(y)` over the cube `offset + [-h/2, h/2]^d`, where `f` may
/// be singular at `y = 0`. Cubes near the singularity are bisected.
pub fn cell_average(f: &dyn Fn(&[f64]) -> f64, offset: &[f64], h: f64) -> f64 {
    fn recurse(f: &dyn Fn(&[f64]) -> f64, center: &[f64], side: f64, depth: u32) -> f64 {
        let d = center.len();
        let dist = center.iter().map(|c| c * c).sum::<f64>().sqrt();
        if depth == 0 || dist > side * d as f64 {
            // tensor 2-point Gauss rule
            let g = 0.5 * side / 3f64.sqrt();
            let mut acc = 0.0;
            let mut y = [0.0; 3];
            for corner in 0..(1usize << d) {
                for a in 0..d {
                    y[a] = center[a] + if corner >> a & 1 == 1 { g } else { -g };
                }
                acc += f(&y[..d]);
            }
            return acc / (1usize << d) as f64;
        }
        let q = 0.25 * side;
        let mut acc = 0.0;
        let mut c = [0.0; 3];
        for corner in 0..(1usize << d) {
            for a in 0..d {
                c[a] = center[a] + if corner >> a & 1 == 1 { q } else { -q };
            }
            acc += recurse(f, &c[..d], 0.5 * side, depth - 1);
        }
        acc / (1usize << d) as f64
    }
    recurse(f, offset, h, 10)
}

/// Displacement `x_j - center` in the periodic box for node `j`.
fn displacement(triple: &SpectralTriple, idx: usize, center: &[f64]) -> [f64; 3] {
    let x = triple.node(idx);
    let mut z = [0.0; 3];
    for a in 0..triple.dim() {
        z[a] = triple.wrap(x[a] - center[a]);
    }
    z
}

fn sample_singular(
    triple: &SpectralTriple,
    center: &[f64],
    n_components: usize,
    profile: &dyn Fn(&[f64], usize) -> f64,
) -> Field {
    let d = triple.dim();
    let h = triple.spacing();
    let mut comps = vec![vec![0.0; triple.len()]; n_components];
    for idx in 0..triple.len() {
        let z = displacement(triple, idx, center);
        let near = z[..d].iter().all(|c| c.abs() <= 0.5 * h);
        for (k, comp) in comps.iter_mut().enumerate() {
            comp[idx] = if near {
                cell_average(&|y: &[f64]| profile(y, k), &z[..d], h)
            } else {
                profile(&z[..d], k)
            };
        }
    }
    Field::from_components(comps).expect("finite profile")
}

/// `|x - c|^{-exponent}·χ(|x - c|)`.
pub fn inverse_power(triple: &SpectralTriple, center: &[f64], exponent: f64, cutoff: Cutoff) -> Vec<f64> {
    let f = move |y: &[f64], _: usize| {
        let r = y.iter().map(|c| c * c).sum::<f64>().sqrt();
        r.powf(-exponent) * cutoff.value(r)
    };
    sample_singular(triple, center, 1, &f).components()[0].clone()
}

/// Radial drift `amplitude · (x - c)/|x - c|²·χ(|x - c|)`; inward when the
/// amplitude is negative. Magnitude `|amplitude|/|x - c|`, with the radius
/// floored at `h/2` inside the cell of the singular point. Cell averages are
/// avoided because `1/|x|` is not locally integrable when `d = 1`.
pub fn radial_drift(triple: &SpectralTriple, center: &[f64], amplitude: f64, cutoff: Cutoff) -> Field {
    let d = triple.dim();
    let floor = 0.5 * triple.spacing();
    let mut comps = vec![vec![0.0; triple.len()]; d];
    for idx in 0..triple.len() {
        let z = displacement(triple, idx, center);
        let r = z[..d].iter().map(|c| c * c).sum::<f64>().sqrt();
        let scale = amplitude * cutoff.value(r) / r.max(floor).powi(2);
        for (k, comp) in comps.iter_mut().enumerate() {
            comp[idx] = scale * z[k];
        }
    }
    Field::from_components(comps).expect("finite profile")
}

/// Drift `amplitude·(x+w_t)/|x+w_t|²` moving with the first `d` Wiener
/// channels.
pub fn comoving_radial_drift(triple: &SpectralTriple, amplitude: f64, cutoff: Cutoff) -> FieldSeries {
    let t = triple.clone();
    let dim = triple.dim();
    let len = triple.len();
    FieldSeries::Comoving {
        sampler: Arc::new(move |shift: &[f64]| {
            let center: Vec<f64> = shift.iter().map(|w| -w).collect();
            radial_drift(&t, &center, amplitude, cutoff)
        }),
        n_components: dim,
        dim,
        len,
    }
}

/// `amplitude·exp(-|x - c|²/(2 width²))`, periodically wrapped.
pub fn gaussian_bump(triple: &SpectralTriple, center: &[f64], width: f64, amplitude: f64) -> Vec<f64> {
    (0..triple.len())
        .map(|idx| {
            let z = displacement(triple, idx, center);
            let r2: f64 = z[..triple.dim()].iter().map(|c| c * c).sum();
            amplitude * (-r2 / (2.0 * width * width)).exp()
        })
        .collect()
}

/// Volume of the unit ball in `d` dimensions.
pub fn unit_ball_volume(d: usize) -> f64 {
    match d {
        1 => 2.0,
        2 => PI,
        3 => 4.0 * PI / 3.0,
        _ => PI.powf(d as f64 / 2.0) / statrs::function::gamma::gamma(d as f64 / 2.0 + 1.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::triple::Order;

    #[test]
    fn cell_average_of_inverse_distance_matches_radial_oracle() {
        // average of 1/|y| over the ball-equivalent: compare a cube average
        // against a fine midpoint rule on an offset cube with no singularity
        let f = |y: &[f64]| 1.0 / y.iter().map(|c| c * c).sum::<f64>().sqrt();
        let a = cell_average(&f, &[2.0, 0.0, 0.0], 1.0);
        let n = 60;
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let y = [
                        1.5 + (i as f64 + 0.5) / n as f64,
                        -0.5 + (j as f64 + 0.5) / n as f64,
                        -0.5 + (k as f64 + 0.5) / n as f64,
                    ];
                    acc += f(&y);
                }
            }
        }
        assert!((a - acc / (n * n * n) as f64).abs() < 1e-4);
        // centred cube: ∫_{[-1/2,1/2]^3} 1/|y| ≈ 2.3800772
        let c = cell_average(&f, &[0.0, 0.0, 0.0], 1.0);
        assert!((c - 2.380077).abs() < 5e-3, "{c}");
    }

    #[test]
    fn cutoff_is_monotone_and_flat_inside() {
        let c = Cutoff { inner: 1.0, outer: 2.0 };
        assert_eq!(c.value(0.5), 1.0);
        assert_eq!(c.value(2.5), 0.0);
        let mut prev = 1.0;
        for i in 0..=100 {
            let v = c.value(1.0 + i as f64 / 100.0);
            assert!(v <= prev + 1e-15);
            prev = v;
        }
    }

    #[test]
    fn radial_drift_is_odd() {
        let t = SpectralTriple::new(1, 16, 4.0, Order::One).unwrap();
        let b = radial_drift(&t, &[0.0], -1.0, Cutoff::for_box(4.0));
        let v = b.component(0);
        assert_eq!(v[0], 0.0);
        for j in 1..8 {
            assert!((v[j] + v[16 - j]).abs() < 1e-14);
            assert!(v[j] < 0.0);
        }
    }
}
