//! Discrete Hilbert pair `V ⊂ H` on a periodic box.
//!
//! Both spaces are defined through Fourier weights: with `ξ = 2πk/L`,
//! `|u|²_H = Σ (1+|ξ|²)^{o-1} |û(ξ)|²` and `|u|²_V = Σ (1+|ξ|²)^o |û(ξ)|²`.
//! The coefficients `û` are orthonormal, so for `o = 1` the H-norm is the
//! grid L₂ norm `(h^d Σ_j u_j²)^{1/2}`.
//!
//! First derivatives use the symbol `iξ` with the Nyquist wavenumber of the
//! differentiated axis set to zero (the derivative of a real grid function
//! must stay real). Norm weights and diagonal second-order symbols use the
//! full `|ξ|²`, Nyquist included.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::fft::GridFft;

/// Which Sobolev pair the triple realizes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Order {
    /// `H = L₂`, `V = W¹₂`.
    One,
    /// `H = W¹₂`, `V = W²₂`.
    Two,
}

impl Order {
    pub fn exponent(self) -> i32 {
        match self {
            Order::One => 1,
            Order::Two => 2,
        }
    }

    pub fn from_exponent(o: u32) -> Result<Self> {
        match o {
            1 => Ok(Order::One),
            2 => Ok(Order::Two),
            other => Err(Error::Domain(format!("triple order must be 1 or 2, got {other}"))),
        }
    }
}

struct Inner {
    dim: usize,
    m: usize,
    box_length: f64,
    order: Order,
    len: usize,
    /// per-axis wavenumbers, indexed by flat grid index
    xi: Vec<Vec<f64>>,
    /// per-axis derivative symbols (Nyquist zeroed)
    dxi: Vec<Vec<f64>>,
    xi_sq: Vec<f64>,
    w_h: Vec<f64>,
    w_v: Vec<f64>,
    /// flat index of the conjugate wavenumber `-k`
    conjugate: Vec<usize>,
    fft: GridFft,
}

/// Periodic grid with `M` points per axis on `[0, L)^d` plus the weights of
/// the pair `(H, V)`. Cheap to clone.
#[derive(Clone)]
pub struct SpectralTriple {
    inner: Arc<Inner>,
}

impl fmt::Debug for SpectralTriple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralTriple")
            .field("dim", &self.inner.dim)
            .field("m", &self.inner.m)
            .field("box_length", &self.inner.box_length)
            .field("order", &self.inner.order)
            .finish()
    }
}

impl PartialEq for SpectralTriple {
    fn eq(&self, other: &Self) -> bool {
        self.same_grid(other) && self.inner.order == other.inner.order
    }
}

impl SpectralTriple {
    pub fn new(dim: usize, m: usize, box_length: f64, order: Order) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::Domain(format!("dimension must be 1, 2 or 3, got {dim}")));
        }
        if m < 2 || m % 2 != 0 {
            return Err(Error::Domain(format!("points per axis must be even and >= 2, got {m}")));
        }
        if !(box_length.is_finite() && box_length > 0.0) {
            return Err(Error::Domain(format!("box length must be positive, got {box_length}")));
        }
        let len = m.pow(dim as u32);
        let axis_k = |j: usize| -> i64 {
            if j <= m / 2 {
                j as i64
            } else {
                j as i64 - m as i64
            }
        };
        let scale = 2.0 * PI / box_length;
        let mut xi = vec![vec![0.0; len]; dim];
        let mut dxi = vec![vec![0.0; len]; dim];
        let mut conjugate = vec![0usize; len];
        for idx in 0..len {
            let mut rest = idx;
            let mut conj = 0usize;
            let mut stride = len;
            for axis in 0..dim {
                stride /= m;
                let j = rest / stride;
                rest %= stride;
                let k = axis_k(j);
                xi[axis][idx] = scale * k as f64;
                dxi[axis][idx] = if j == m / 2 { 0.0 } else { scale * k as f64 };
                conj += ((m - j) % m) * stride;
            }
            conjugate[idx] = conj;
        }
        let xi_sq: Vec<f64> = (0..len).map(|i| (0..dim).map(|a| xi[a][i] * xi[a][i]).sum()).collect();
        let p = order.exponent();
        let w_h = xi_sq.iter().map(|s| (1.0 + s).powi(p - 1)).collect();
        let w_v = xi_sq.iter().map(|s| (1.0 + s).powi(p)).collect();
        Ok(Self {
            inner: Arc::new(Inner {
                dim,
                m,
                box_length,
                order,
                len,
                xi,
                dxi,
                xi_sq,
                w_h,
                w_v,
                conjugate,
                fft: GridFft::new(dim, m),
            }),
        })
    }

    /// The same grid carrying the other order.
    pub fn with_order(&self, order: Order) -> Self {
        if order == self.inner.order {
            return self.clone();
        }
        Self::new(self.inner.dim, self.inner.m, self.inner.box_length, order).expect("valid grid")
    }

    pub fn dim(&self) -> usize {
        self.inner.dim
    }
    pub fn points_per_axis(&self) -> usize {
        self.inner.m
    }
    pub fn box_length(&self) -> f64 {
        self.inner.box_length
    }
    pub fn order(&self) -> Order {
        self.inner.order
    }
    /// Number of grid nodes `M^d`.
    pub fn len(&self) -> usize {
        self.inner.len
    }
    pub fn is_empty(&self) -> bool {
        false
    }
    pub fn spacing(&self) -> f64 {
        self.inner.box_length / self.inner.m as f64
    }
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.inner.dim as i32)
    }
    pub fn volume(&self) -> f64 {
        self.inner.box_length.powi(self.inner.dim as i32)
    }

    pub fn same_grid(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
            || (self.inner.dim == other.inner.dim
                && self.inner.m == other.inner.m
                && self.inner.box_length == other.inner.box_length)
    }

    pub(crate) fn check_grid(&self, other: &Self) -> Result<()> {
        if self.same_grid(other) {
            Ok(())
        } else {
            Err(Error::Shape { expected: self.describe(), found: other.describe() })
        }
    }

    pub(crate) fn check_len(&self, values: &[f64]) -> Result<()> {
        if values.len() == self.inner.len {
            Ok(())
        } else {
            Err(Error::Shape {
                expected: format!("{} values", self.inner.len),
                found: format!("{} values", values.len()),
            })
        }
    }

    fn describe(&self) -> String {
        format!("d={} M={} L={}", self.inner.dim, self.inner.m, self.inner.box_length)
    }

    /// Wavenumber components `ξ_axis` per flat index.
    pub fn wavenumbers(&self, axis: usize) -> &[f64] {
        &self.inner.xi[axis]
    }
    /// Symbol of `D_axis` divided by `i` (Nyquist zeroed).
    pub fn derivative_symbol(&self, axis: usize) -> &[f64] {
        &self.inner.dxi[axis]
    }
    pub fn xi_sq(&self) -> &[f64] {
        &self.inner.xi_sq
    }
    pub fn h_weights(&self) -> &[f64] {
        &self.inner.w_h
    }
    pub fn v_weights(&self) -> &[f64] {
        &self.inner.w_v
    }
    pub(crate) fn conjugate_index(&self, idx: usize) -> usize {
        self.inner.conjugate[idx]
    }

    /// Multi-index of a flat grid index.
    pub fn multi_index(&self, idx: usize) -> [usize; 3] {
        let mut out = [0usize; 3];
        let mut rest = idx;
        for axis in (0..self.inner.dim).rev() {
            out[axis] = rest % self.inner.m;
            rest /= self.inner.m;
        }
        out
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        multi.iter().take(self.inner.dim).fold(0, |acc, &j| acc * self.inner.m + j % self.inner.m)
    }

    /// Node coordinates in `[0, L)^d`.
    pub fn node(&self, idx: usize) -> [f64; 3] {
        let h = self.spacing();
        let mi = self.multi_index(idx);
        let mut x = [0.0; 3];
        for axis in 0..self.inner.dim {
            x[axis] = mi[axis] as f64 * h;
        }
        x
    }

    /// Node coordinates mapped to the centered period `[-L/2, L/2)^d`.
    pub fn centered_node(&self, idx: usize) -> [f64; 3] {
        let mut x = self.node(idx);
        for c in x.iter_mut().take(self.inner.dim) {
            *c = self.wrap(*c);
        }
        x
    }

    /// Wrap a coordinate into `[-L/2, L/2)`.
    pub fn wrap(&self, x: f64) -> f64 {
        let l = self.inner.box_length;
        let y = (x + 0.5 * l).rem_euclid(l) - 0.5 * l;
        if y >= 0.5 * l {
            y - l
        } else {
            y
        }
    }

    pub fn zeros(&self) -> GridFunction {
        GridFunction { triple: self.clone(), values: vec![0.0; self.inner.len] }
    }

    /// Sample `f` at the centered node coordinates.
    pub fn sample<F: Fn(&[f64]) -> f64>(&self, f: F) -> GridFunction {
        let d = self.inner.dim;
        let values = (0..self.inner.len).map(|i| f(&self.centered_node(i)[..d])).collect();
        GridFunction { triple: self.clone(), values }
    }

    /// Orthonormal Fourier coefficients: `Σ|c|² = h^d Σ u²`.
    pub fn forward(&self, values: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.inner.fft.forward(&mut buf);
        let scale = (self.cell_volume() / self.inner.len as f64).sqrt();
        buf.iter_mut().for_each(|z| *z *= scale);
        buf
    }

    /// Inverse of [`forward`](Self::forward), keeping the real part.
    pub fn inverse(&self, coeffs: &[Complex64]) -> Vec<f64> {
        let mut buf = coeffs.to_vec();
        self.inverse_in_place(&mut buf)
    }

    pub(crate) fn inverse_in_place(&self, buf: &mut [Complex64]) -> Vec<f64> {
        self.inner.fft.inverse(buf);
        let scale = 1.0 / (self.cell_volume() * self.inner.len as f64).sqrt();
        buf.iter().map(|z| z.re * scale).collect()
    }

    /// Multiply the spectrum by a real symbol.
    pub fn apply_symbol(&self, values: &[f64], symbol: &[f64]) -> Vec<f64> {
        let mut c = self.forward(values);
        c.iter_mut().zip(symbol).for_each(|(z, s)| *z *= *s);
        self.inverse_in_place(&mut c)
    }

    /// Spectral gradient `(D_1 u, …, D_d u)`.
    pub fn gradient(&self, values: &[f64]) -> Vec<Vec<f64>> {
        let c = self.forward(values);
        self.gradient_from_spectrum(&c)
    }

    pub(crate) fn gradient_from_spectrum(&self, c: &[Complex64]) -> Vec<Vec<f64>> {
        (0..self.inner.dim)
            .map(|axis| {
                let mut buf: Vec<Complex64> =
                    c.iter().zip(&self.inner.dxi[axis]).map(|(z, k)| Complex64::new(-z.im * k, z.re * k)).collect();
                self.inverse_in_place(&mut buf)
            })
            .collect()
    }

    /// Spectral Hessian `D_i D_j u` for `i ≤ j`, returned as a full `d×d` list.
    pub fn hessian(&self, values: &[f64]) -> Vec<Vec<f64>> {
        let d = self.inner.dim;
        let c = self.forward(values);
        let mut out = vec![Vec::new(); d * d];
        for i in 0..d {
            for j in i..d {
                let mut buf: Vec<Complex64> = c
                    .iter()
                    .enumerate()
                    .map(|(n, z)| {
                        let s = if i == j {
                            -self.inner.xi[i][n] * self.inner.xi[i][n]
                        } else {
                            -self.inner.dxi[i][n] * self.inner.dxi[j][n]
                        };
                        z * s
                    })
                    .collect();
                let v = self.inverse_in_place(&mut buf);
                out[j * d + i] = v.clone();
                out[i * d + j] = v;
            }
        }
        out
    }

    /// Accumulate `Σ_i D_i F_i` in spectral space.
    pub(crate) fn add_divergence_spectrum(&self, acc: &mut [Complex64], flux: &[f64], axis: usize) {
        let c = self.forward(flux);
        for ((a, z), k) in acc.iter_mut().zip(&c).zip(&self.inner.dxi[axis]) {
            *a += Complex64::new(-z.im * k, z.re * k);
        }
    }

    /// `Σ_i D_i F_i` for a list of fluxes.
    pub fn divergence(&self, fluxes: &[Vec<f64>]) -> Vec<f64> {
        let mut acc = vec![Complex64::default(); self.inner.len];
        for (axis, flux) in fluxes.iter().enumerate() {
            self.add_divergence_spectrum(&mut acc, flux, axis);
        }
        self.inverse_in_place(&mut acc)
    }

    pub fn laplacian(&self, values: &[f64]) -> Vec<f64> {
        let sym: Vec<f64> = self.inner.xi_sq.iter().map(|s| -s).collect();
        self.apply_symbol(values, &sym)
    }

    /// Grid quadrature `h^d Σ u v`.
    pub fn l2_inner(&self, u: &[f64], v: &[f64]) -> f64 {
        self.cell_volume() * u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>()
    }

    fn weighted_inner(&self, u: &[f64], v: &[f64], w: &[f64]) -> f64 {
        let cu = self.forward(u);
        let cv = self.forward(v);
        cu.iter().zip(&cv).zip(w).map(|((a, b), w)| w * (a * b.conj()).re).sum()
    }

    fn weighted_norm_sq(&self, u: &[f64], w: &[f64]) -> f64 {
        self.forward(u).iter().zip(w).map(|(a, w)| w * a.norm_sqr()).sum()
    }

    pub fn h_inner(&self, u: &[f64], v: &[f64]) -> f64 {
        self.weighted_inner(u, v, &self.inner.w_h)
    }
    pub fn v_inner(&self, u: &[f64], v: &[f64]) -> f64 {
        self.weighted_inner(u, v, &self.inner.w_v)
    }
    pub fn h_norm_sq(&self, u: &[f64]) -> f64 {
        self.weighted_norm_sq(u, &self.inner.w_h)
    }
    pub fn v_norm_sq(&self, u: &[f64]) -> f64 {
        self.weighted_norm_sq(u, &self.inner.w_v)
    }

    /// `(|u|²_H, |u|²_V)` from one transform.
    pub fn norms_sq(&self, u: &[f64]) -> (f64, f64) {
        let c = self.forward(u);
        let mut h = 0.0;
        let mut v = 0.0;
        for ((z, wh), wv) in c.iter().zip(&self.inner.w_h).zip(&self.inner.w_v) {
            let a = z.norm_sqr();
            h += wh * a;
            v += wv * a;
        }
        (h, v)
    }

    /// Squared norm in `V*` of the functional `w ↦ (w, g)_{L₂}`.
    pub fn dual_norm_sq(&self, g: &[f64]) -> f64 {
        self.forward(g).iter().zip(&self.inner.w_v).map(|(a, w)| a.norm_sqr() / w).sum()
    }

    /// Squared H-norm of the element represented by the functional `(·, g)_{L₂}`.
    pub fn represented_h_norm_sq(&self, g: &[f64]) -> f64 {
        match self.inner.order {
            Order::One => self.l2_inner(g, g),
            Order::Two => self.forward(g).iter().zip(&self.inner.w_h).map(|(a, w)| a.norm_sqr() / w).sum(),
        }
    }

    /// `(u, g)_H` where `g` is given through its `L₂` representative.
    pub fn to_h_element(&self, representative: &[f64]) -> Vec<f64> {
        match self.inner.order {
            Order::One => representative.to_vec(),
            Order::Two => {
                let sym: Vec<f64> = self.inner.w_h.iter().map(|w| 1.0 / w).collect();
                self.apply_symbol(representative, &sym)
            }
        }
    }

    /// `L₂` representative of the functional `w ↦ (w, u)_H`.
    pub fn h_representative(&self, u: &[f64]) -> Vec<f64> {
        match self.inner.order {
            Order::One => u.to_vec(),
            Order::Two => self.apply_symbol(u, &self.inner.w_h),
        }
    }

    /// `R_λ f`: the unique `v` with `(f,u)_H = λ(v,u)_H + (v,u)_V` for all `u`.
    pub fn resolvent(&self, lambda: f64, f: &GridFunction) -> Result<GridFunction> {
        check_lambda(lambda)?;
        self.check_grid(&f.triple)?;
        let sym: Vec<f64> =
            self.inner.w_h.iter().zip(&self.inner.w_v).map(|(wh, wv)| wh / (lambda * wh + wv)).collect();
        Ok(GridFunction { triple: self.clone(), values: self.apply_symbol(&f.values, &sym) })
    }

    /// `g` with `R_λ g = v`, obtained by inverting the resolvent symbol.
    pub fn resolvent_preimage(&self, lambda: f64, v: &GridFunction) -> Result<GridFunction> {
        check_lambda(lambda)?;
        self.check_grid(&v.triple)?;
        let sym: Vec<f64> =
            self.inner.w_h.iter().zip(&self.inner.w_v).map(|(wh, wv)| (lambda * wh + wv) / wh).collect();
        Ok(GridFunction { triple: self.clone(), values: self.apply_symbol(&v.values, &sym) })
    }

    /// `S_n f = n R_n f`.
    pub fn smooth(&self, n: u64, f: &GridFunction) -> Result<GridFunction> {
        if n == 0 {
            return Err(Error::Domain("smoothing index must be at least 1".into()));
        }
        let mut v = self.resolvent(n as f64, f)?;
        v.values.iter_mut().for_each(|x| *x *= n as f64);
        Ok(v)
    }

    /// `(|f|_H, |f|_V)`.
    pub fn norms(&self, f: &GridFunction) -> Result<(f64, f64)> {
        self.check_grid(&f.triple)?;
        let (h, v) = self.norms_sq(&f.values);
        Ok((h.sqrt(), v.sqrt()))
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda.is_finite() && lambda >= 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("resolvent parameter must be a nonnegative number, got {lambda}")))
    }
}

/// Free-function form of [`SpectralTriple::resolvent`].
pub fn resolvent(triple: &SpectralTriple, lambda: f64, f: &GridFunction) -> Result<GridFunction> {
    triple.resolvent(lambda, f)
}

/// Free-function form of [`SpectralTriple::smooth`].
pub fn smooth(triple: &SpectralTriple, n: u64, f: &GridFunction) -> Result<GridFunction> {
    triple.smooth(n, f)
}

/// Free-function form of [`SpectralTriple::norms`].
pub fn norms(triple: &SpectralTriple, f: &GridFunction) -> Result<(f64, f64)> {
    triple.norms(f)
}

/// Real values on the grid of a triple.
#[derive(Clone, Debug)]
pub struct GridFunction {
    triple: SpectralTriple,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(triple: &SpectralTriple, values: Vec<f64>) -> Result<Self> {
        triple.check_len(&values)?;
        ensure_finite(&values, "grid function")?;
        Ok(Self { triple: triple.clone(), values })
    }

    pub fn triple(&self) -> &SpectralTriple {
        &self.triple
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { triple: self.triple.clone(), values: self.values.iter().map(|v| c * v).collect() }
    }

    /// `self + c·other`.
    pub fn axpy(&self, c: f64, other: &Self) -> Result<Self> {
        self.triple.check_grid(&other.triple)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + c * b).collect();
        Ok(Self { triple: self.triple.clone(), values })
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(t: &SpectralTriple, seed: u64) -> GridFunction {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = (0..t.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        GridFunction::new(t, v).unwrap()
    }

    #[test]
    fn constant_mode_resolvent_solves_two_by_two_identity() {
        let t = SpectralTriple::new(1, 16, 2.0 * PI, Order::One).unwrap();
        let f = t.sample(|_| 1.0);
        let v = t.resolvent(1.0, &f).unwrap();
        // on the constant mode (f,u)_H = λ(v,u)_H + (v,u)_V reads 1 = v + v
        for x in v.values() {
            assert_relative_eq!(*x, 0.5, epsilon = 1e-14);
        }
    }

    #[test]
    fn zero_lambda_solves_helmholtz() {
        let t = SpectralTriple::new(1, 32, 2.0 * PI, Order::One).unwrap();
        let f = t.sample(|x| (3.0 * x[0]).sin());
        let v = t.resolvent(0.0, &f).unwrap();
        // v - v'' = f gives v = sin(3x)/10
        for (a, b) in v.values().iter().zip(f.values()) {
            assert_relative_eq!(*a, b / 10.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn sine_norms_match_quadrature() {
        let t = SpectralTriple::new(1, 64, 2.0 * PI, Order::One).unwrap();
        let f = t.sample(|x| x[0].sin());
        let (h, v) = t.norms(&f).unwrap();
        // ∫ sin² = π, ∫ sin² + cos² = 2π
        assert_relative_eq!(h * h, PI, epsilon = 1e-12);
        assert_relative_eq!(v * v, 2.0 * PI, epsilon = 1e-12);
    }

    #[test]
    fn order_two_norms_are_shifted_sobolev_norms() {
        let t = SpectralTriple::new(1, 64, 2.0 * PI, Order::Two).unwrap();
        let f = t.sample(|x| (2.0 * x[0]).cos());
        let (h, v) = t.norms(&f).unwrap();
        assert_relative_eq!(h * h, 5.0 * PI, epsilon = 1e-12);
        assert_relative_eq!(v * v, 25.0 * PI, epsilon = 1e-12);
    }

    #[test]
    fn parseval_in_three_dimensions() {
        let t = SpectralTriple::new(3, 6, 3.0, Order::One).unwrap();
        let f = random(&t, 3);
        let spectral: f64 = t.forward(f.values()).iter().map(|z| z.norm_sqr()).sum();
        assert_relative_eq!(spectral, t.l2_inner(f.values(), f.values()), max_relative = 1e-13);
    }

    #[test]
    fn rejects_bad_input() {
        let t = SpectralTriple::new(1, 8, 1.0, Order::One).unwrap();
        let other = SpectralTriple::new(1, 16, 1.0, Order::One).unwrap();
        assert!(matches!(t.resolvent(-1.0, &t.zeros()), Err(Error::Domain(_))));
        assert!(matches!(t.resolvent(1.0, &other.zeros()), Err(Error::Shape { .. })));
        assert!(SpectralTriple::new(1, 7, 1.0, Order::One).is_err());
        assert!(t.smooth(0, &t.zeros()).is_err());
    }

    #[test]
    fn derivative_and_divergence_are_adjoint() {
        let t = SpectralTriple::new(2, 8, 2.0, Order::One).unwrap();
        let u = random(&t, 1);
        let g = random(&t, 2);
        let du = t.gradient(u.values());
        let div = t.divergence(&[g.values().to_vec(), vec![0.0; t.len()]]);
        assert_relative_eq!(t.l2_inner(&du[0], g.values()), -t.l2_inner(u.values(), &div), epsilon = 1e-12);
    }

    #[test]
    fn wrap_is_centered() {
        let t = SpectralTriple::new(1, 4, 4.0, Order::One).unwrap();
        assert_eq!(t.wrap(3.0), -1.0);
        assert_eq!(t.wrap(2.0), -2.0);
        assert_eq!(t.wrap(-2.5), 1.5);
        assert_eq!(t.centered_node(3)[0], -1.0);
    }
}
