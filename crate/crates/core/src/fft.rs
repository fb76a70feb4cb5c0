//! Multi-dimensional complex FFT over a periodic `M^d` grid stored row-major
//! (last axis contiguous). Transforms are unnormalized; callers apply scaling.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

#[derive(Clone)]
pub(crate) struct GridFft {
    dim: usize,
    m: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for GridFft {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GridFft").field("dim", &self.dim).field("m", &self.m).finish()
    }
}

impl GridFft {
    pub(crate) fn new(dim: usize, m: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            dim,
            m,
            forward: planner.plan_fft_forward(m),
            inverse: planner.plan_fft_inverse(m),
        }
    }

    pub(crate) fn forward(&self, buf: &mut [Complex64]) {
        self.transform(buf, &self.forward);
    }

    pub(crate) fn inverse(&self, buf: &mut [Complex64]) {
        self.transform(buf, &self.inverse);
    }

    fn transform(&self, buf: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let m = self.m;
        debug_assert_eq!(buf.len(), m.pow(self.dim as u32));
        let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
        // contiguous last axis: every chunk of length m is one line
        plan.process_with_scratch(buf, &mut scratch);
        if self.dim == 1 {
            return;
        }
        let mut lines = vec![Complex64::default(); 0];
        for axis in 0..self.dim - 1 {
            let stride = m.pow((self.dim - 1 - axis) as u32);
            let block = stride * m;
            lines.resize(block, Complex64::default());
            for chunk in buf.chunks_mut(block) {
                // gather: line `inner` holds chunk[inner + j*stride], j = 0..m
                for j in 0..m {
                    let row = &chunk[j * stride..(j + 1) * stride];
                    for (inner, &z) in row.iter().enumerate() {
                        lines[inner * m + j] = z;
                    }
                }
                plan.process_with_scratch(&mut lines, &mut scratch);
                for j in 0..m {
                    let row = &mut chunk[j * stride..(j + 1) * stride];
                    for (inner, z) in row.iter_mut().enumerate() {
                        *z = lines[inner * m + j];
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_dft_2d(data: &[Complex64], m: usize) -> Vec<Complex64> {
        let mut out = vec![Complex64::default(); m * m];
        for k0 in 0..m {
            for k1 in 0..m {
                let mut acc = Complex64::default();
                for j0 in 0..m {
                    for j1 in 0..m {
                        let phase = -2.0 * std::f64::consts::PI * ((k0 * j0 + k1 * j1) as f64) / m as f64;
                        acc += data[j0 * m + j1] * Complex64::from_polar(1.0, phase);
                    }
                }
                out[k0 * m + k1] = acc;
            }
        }
        out
    }

    #[test]
    fn matches_naive_dft_in_two_dimensions() {
        let m = 6;
        let data: Vec<Complex64> = (0..m * m)
            .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 1.3).cos()))
            .collect();
        let mut buf = data.clone();
        GridFft::new(2, m).forward(&mut buf);
        let want = naive_dft_2d(&data, m);
        for (a, b) in buf.iter().zip(&want) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn round_trip_three_dimensions() {
        let m = 4;
        let n = m * m * m;
        let data: Vec<Complex64> = (0..n).map(|i| Complex64::new(i as f64, -(i as f64) * 0.5)).collect();
        let mut buf = data.clone();
        let fft = GridFft::new(3, m);
        fft.forward(&mut buf);
        fft.inverse(&mut buf);
        for (a, b) in buf.iter().zip(&data) {
            assert!((a / n as f64 - b).norm() < 1e-12);
        }
    }
}
