//! Wiener increments from a counter-based generator.
//!
//! Each increment is a pure function of `(seed, path, step, channel)`: the
//! ChaCha stream is keyed by the seed and selected by the path, and the
//! word position encodes `(step, channel)`. Paths can therefore be simulated
//! in any order or in parallel with bit-identical results.

use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub channels: usize,
    pub dt: f64,
    pub steps: usize,
    pub seed: u64,
}

/// Uniform on `(0, 1]` from the top 53 bits.
fn open_unit(x: u64) -> f64 {
    ((x >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

impl NoiseModel {
    /// Validates that `t_final / dt` is an integer up to round-off.
    pub fn new(channels: usize, dt: f64, t_final: f64, seed: u64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::Domain(format!("time step must be positive, got {dt}")));
        }
        if !(t_final.is_finite() && t_final > 0.0) {
            return Err(Error::Domain(format!("final time must be positive, got {t_final}")));
        }
        let ratio = t_final / dt;
        let steps = ratio.round();
        if (ratio - steps).abs() > 1e-9 * ratio.max(1.0) || steps < 1.0 {
            return Err(Error::Config(format!("final time {t_final} is not a whole number of steps {dt}")));
        }
        Ok(Self { channels, dt, steps: steps as usize, seed })
    }

    pub fn t_final(&self) -> f64 {
        self.dt * self.steps as f64
    }

    pub fn time(&self, step: usize) -> f64 {
        step as f64 * self.dt
    }

    /// Fills `out[k] = ΔW^k_step` for one path.
    pub fn increments(&self, path: u64, step: usize, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.channels);
        if self.channels == 0 {
            return;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(path);
        rng.set_word_pos(((step * self.channels) as u128) * 4);
        let scale = self.dt.sqrt();
        for w in out.iter_mut() {
            let u1 = open_unit(rng.next_u64());
            let u2 = open_unit(rng.next_u64());
            *w = scale * (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
        }
    }

    /// All increments of one path, step-major.
    pub fn path_increments(&self, path: u64) -> Vec<f64> {
        let k = self.channels;
        let mut out = vec![0.0; self.steps * k];
        if k == 0 {
            return out;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(path);
        let scale = self.dt.sqrt();
        for w in out.iter_mut() {
            let u1 = open_unit(rng.next_u64());
            let u2 = open_unit(rng.next_u64());
            *w = scale * (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
        }
        out
    }

    /// The same Brownian path on a grid `factor` times coarser: increments
    /// are summed over consecutive blocks.
    pub fn coarsen(&self, increments: &[f64], factor: usize) -> Result<(NoiseModel, Vec<f64>)> {
        if factor == 0 || self.steps % factor != 0 {
            return Err(Error::Config(format!("cannot coarsen {} steps by {factor}", self.steps)));
        }
        let k = self.channels;
        let steps = self.steps / factor;
        let mut out = vec![0.0; steps * k];
        for n in 0..steps {
            for j in 0..factor {
                for c in 0..k {
                    out[n * k + c] += increments[(n * factor + j) * k + c];
                }
            }
        }
        Ok((NoiseModel { channels: k, dt: self.dt * factor as f64, steps, seed: self.seed }, out))
    }
}
