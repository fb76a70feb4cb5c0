//! Multi-component grid fields, their time dependence, and file formats.
//!
//! The binary format is little-endian: the magic `SPDF`, a `u32` format
//! version, `u32` dimension, `u32` points per axis, `f64` box length,
//! `u32` number of time slices and `u32` number of components, followed by
//! the `f64` values ordered time-major, then component, then grid node.

use std::borrow::Cow;
use std::fmt;
use std::io::{Read, Write};
use std::sync::Arc;

use crate::error::{ensure_finite, Error, Result};
use crate::triple::SpectralTriple;

/// Time, step index and the accumulated Wiener path at which a
/// time-dependent quantity is evaluated.
#[derive(Clone, Copy, Debug)]
pub struct StepContext<'a> {
    pub t: f64,
    pub step: usize,
    pub wiener: &'a [f64],
}

impl StepContext<'static> {
    /// Deterministic evaluation point with the Wiener path at the origin.
    pub fn at(t: f64) -> Self {
        StepContext { t, step: 0, wiener: &[] }
    }
}

/// One or more real components over the grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    len: usize,
    components: Vec<Vec<f64>>,
}

impl Field {
    pub fn scalar(values: Vec<f64>) -> Self {
        Self { len: values.len(), components: vec![values] }
    }

    pub fn from_components(components: Vec<Vec<f64>>) -> Result<Self> {
        let len = components.first().map(Vec::len).ok_or_else(|| Error::Config("field without components".into()))?;
        if components.iter().any(|c| c.len() != len) {
            return Err(Error::Shape { expected: format!("{len} values per component"), found: "ragged".into() });
        }
        for c in &components {
            ensure_finite(c, "field component")?;
        }
        Ok(Self { len, components })
    }

    pub fn zeros(len: usize, n_components: usize) -> Self {
        Self { len, components: vec![vec![0.0; len]; n_components] }
    }

    pub fn len(&self) -> usize {
        self.len
    }
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
    pub fn n_components(&self) -> usize {
        self.components.len()
    }
    pub fn component(&self, i: usize) -> &[f64] {
        &self.components[i]
    }
    pub fn components(&self) -> &[Vec<f64>] {
        &self.components
    }
    pub fn components_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.components
    }

    /// Pointwise Euclidean length over components.
    pub fn magnitude(&self) -> Vec<f64> {
        if self.components.len() == 1 {
            return self.components[0].iter().map(|v| v.abs()).collect();
        }
        (0..self.len).map(|i| self.components.iter().map(|c| c[i] * c[i]).sum::<f64>().sqrt()).collect()
    }

    pub fn max_magnitude(&self) -> f64 {
        self.magnitude().into_iter().fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.components.iter().all(|c| c.iter().all(|v| *v == 0.0))
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            len: self.len,
            components: self.components.iter().map(|c| c.iter().map(|v| s * v).collect()).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.len != other.len || self.n_components() != other.n_components() {
            return Err(Error::Shape {
                expected: format!("{}x{}", self.n_components(), self.len),
                found: format!("{}x{}", other.n_components(), other.len),
            });
        }
        let components = self
            .components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + y).collect())
            .collect();
        Ok(Self { len: self.len, components })
    }

    /// Apply `f` to every component.
    pub fn map_components<F: FnMut(&[f64]) -> Vec<f64>>(&self, mut f: F) -> Self {
        Self { len: self.len, components: self.components.iter().map(|c| f(c)).collect() }
    }
}

/// Field evaluated at shifted coordinates `x + w_t`, used for coefficients
/// that move with the driving noise.
pub type ShiftedSampler = Arc<dyn Fn(&[f64]) -> Field + Send + Sync>;

/// Time dependence of a coefficient or forcing channel.
#[derive(Clone)]
pub enum FieldSeries {
    Static(Arc<Field>),
    /// Piecewise constant: the entry with the largest time `≤ t`.
    Tabulated { times: Vec<f64>, values: Vec<Arc<Field>> },
    /// `F(t) = profile(t)·shape`.
    Modulated { shape: Arc<Field>, profile: Arc<dyn Fn(f64) -> f64 + Send + Sync> },
    /// `F(t)(x) = G(x + w_t)` with `w_t` the first `d` Wiener channels.
    Comoving { sampler: ShiftedSampler, n_components: usize, dim: usize, len: usize },
    /// Pointwise sum of series with equal shapes.
    Sum(Vec<FieldSeries>),
    /// Arbitrary function of time and the Wiener state.
    Lazy { eval: LazyEval, n_components: usize, len: usize },
}

pub type LazyEval = Arc<dyn Fn(f64, &[f64]) -> Field + Send + Sync>;

impl fmt::Debug for FieldSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldSeries::Static(_) => write!(f, "Static"),
            FieldSeries::Tabulated { times, .. } => write!(f, "Tabulated({} slices)", times.len()),
            FieldSeries::Modulated { .. } => write!(f, "Modulated"),
            FieldSeries::Comoving { .. } => write!(f, "Comoving"),
            FieldSeries::Sum(parts) => write!(f, "Sum({parts:?})"),
            FieldSeries::Lazy { .. } => write!(f, "Lazy"),
        }
    }
}

impl FieldSeries {
    pub fn constant(field: Field) -> Self {
        FieldSeries::Static(Arc::new(field))
    }

    pub fn zeros(len: usize, n_components: usize) -> Self {
        FieldSeries::Static(Arc::new(Field::zeros(len, n_components)))
    }

    pub fn tabulated(times: Vec<f64>, values: Vec<Field>) -> Result<Self> {
        if times.is_empty() || times.len() != values.len() {
            return Err(Error::Config("tabulated field needs one slice per time".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("tabulated times must increase".into()));
        }
        Ok(FieldSeries::Tabulated { times, values: values.into_iter().map(Arc::new).collect() })
    }

    pub fn n_components(&self) -> usize {
        match self {
            FieldSeries::Static(f) => f.n_components(),
            FieldSeries::Tabulated { values, .. } => values[0].n_components(),
            FieldSeries::Modulated { shape, .. } => shape.n_components(),
            FieldSeries::Comoving { n_components, .. } => *n_components,
            FieldSeries::Sum(parts) => parts[0].n_components(),
            FieldSeries::Lazy { n_components, .. } => *n_components,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            FieldSeries::Static(f) => f.len(),
            FieldSeries::Tabulated { values, .. } => values[0].len(),
            FieldSeries::Modulated { shape, .. } => shape.len(),
            FieldSeries::Comoving { len, .. } => *len,
            FieldSeries::Sum(parts) => parts[0].len(),
            FieldSeries::Lazy { len, .. } => *len,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// True when the series is known to vanish at every time.
    pub fn is_identically_zero(&self) -> bool {
        match self {
            FieldSeries::Static(f) => f.is_zero(),
            FieldSeries::Tabulated { values, .. } => values.iter().all(|v| v.is_zero()),
            FieldSeries::Modulated { shape, .. } => shape.is_zero(),
            FieldSeries::Comoving { .. } => false,
            FieldSeries::Sum(parts) => parts.iter().all(|p| p.is_identically_zero()),
            FieldSeries::Lazy { .. } => false,
        }
    }

    pub fn is_time_independent(&self) -> bool {
        match self {
            FieldSeries::Static(_) => true,
            FieldSeries::Tabulated { values, .. } => values.len() == 1,
            FieldSeries::Sum(parts) => parts.iter().all(|p| p.is_time_independent()),
            _ => false,
        }
    }

    /// Sum of several series; errors when shapes differ.
    pub fn sum(parts: Vec<FieldSeries>) -> Result<Self> {
        let first = parts.first().ok_or_else(|| Error::Config("empty sum of fields".into()))?;
        if parts.iter().any(|p| p.len() != first.len() || p.n_components() != first.n_components()) {
            return Err(Error::Config("summed fields differ in shape".into()));
        }
        Ok(if parts.len() == 1 { parts.into_iter().next().unwrap() } else { FieldSeries::Sum(parts) })
    }

    pub fn eval(&self, ctx: &StepContext<'_>) -> Cow<'_, Field> {
        match self {
            FieldSeries::Static(f) => Cow::Borrowed(f.as_ref()),
            FieldSeries::Tabulated { times, values } => {
                let i = times.partition_point(|&s| s <= ctx.t).saturating_sub(1);
                Cow::Borrowed(values[i].as_ref())
            }
            FieldSeries::Modulated { shape, profile } => Cow::Owned(shape.scaled(profile(ctx.t))),
            FieldSeries::Comoving { sampler, dim, .. } => {
                let mut shift = [0.0; 3];
                for (s, w) in shift.iter_mut().zip(ctx.wiener.iter()).take(*dim) {
                    *s = *w;
                }
                Cow::Owned(sampler(&shift[..*dim]))
            }
            FieldSeries::Sum(parts) => {
                let mut acc = parts[0].eval(ctx).into_owned();
                for p in &parts[1..] {
                    acc = acc.add(&p.eval(ctx)).expect("validated shapes");
                }
                Cow::Owned(acc)
            }
            FieldSeries::Lazy { eval, .. } => Cow::Owned(eval(ctx.t, ctx.wiener)),
        }
    }

    /// Apply a pointwise or spectral transform to every stored slice.
    /// Comoving series are transformed lazily at evaluation time.
    pub fn map<F>(&self, f: F) -> Self
    where
        F: Fn(&Field) -> Field + Send + Sync + 'static,
    {
        match self {
            FieldSeries::Static(v) => FieldSeries::Static(Arc::new(f(v))),
            FieldSeries::Tabulated { times, values } => FieldSeries::Tabulated {
                times: times.clone(),
                values: values.iter().map(|v| Arc::new(f(v))).collect(),
            },
            FieldSeries::Modulated { shape, profile } => {
                FieldSeries::Modulated { shape: Arc::new(f(shape)), profile: profile.clone() }
            }
            FieldSeries::Comoving { sampler, n_components, dim, len } => {
                let inner = sampler.clone();
                FieldSeries::Comoving {
                    sampler: Arc::new(move |shift: &[f64]| f(&inner(shift))),
                    n_components: *n_components,
                    dim: *dim,
                    len: *len,
                }
            }
            FieldSeries::Sum(_) | FieldSeries::Lazy { .. } => {
                // the map need not be additive, so evaluate first
                let inner = self.clone();
                let probe = f(&self.eval(&StepContext::at(0.0)));
                let (n_components, len) = (probe.n_components(), probe.len());
                FieldSeries::Lazy {
                    eval: Arc::new(move |t: f64, w: &[f64]| f(&inner.eval(&StepContext { t, step: 0, wiener: w }))),
                    n_components,
                    len,
                }
            }
        }
    }

    /// Representative slices used for time-uniform certification.
    pub fn representative_slices(&self) -> Vec<Cow<'_, Field>> {
        match self {
            FieldSeries::Static(f) => vec![Cow::Borrowed(f.as_ref())],
            FieldSeries::Tabulated { values, .. } => values.iter().map(|v| Cow::Borrowed(v.as_ref())).collect(),
            FieldSeries::Modulated { shape, .. } => vec![Cow::Borrowed(shape.as_ref())],
            FieldSeries::Comoving { sampler, dim, .. } => vec![Cow::Owned(sampler(&vec![0.0; *dim]))],
            FieldSeries::Sum(_) | FieldSeries::Lazy { .. } => self
                .breakpoints()
                .into_iter()
                .map(|t| Cow::Owned(self.eval(&StepContext::at(t)).into_owned()))
                .collect(),
        }
    }

    /// Times at which a piecewise constant series may change; `[0]` for
    /// series without tabulated structure.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut out = match self {
            FieldSeries::Tabulated { times, .. } => times.clone(),
            FieldSeries::Sum(parts) => parts.iter().flat_map(|p| p.breakpoints()).collect(),
            _ => vec![0.0],
        };
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }
}

/// Envelope `f̄_t` of a bounded part.
#[derive(Clone, Debug, PartialEq)]
pub enum Envelope {
    Constant(f64),
    /// Piecewise constant in time, same convention as [`FieldSeries::Tabulated`].
    Tabulated { times: Vec<f64>, values: Vec<f64> },
}

impl Envelope {
    pub fn at(&self, t: f64) -> f64 {
        match self {
            Envelope::Constant(v) => *v,
            Envelope::Tabulated { times, values } => {
                let i = times.partition_point(|&s| s <= t).saturating_sub(1);
                values[i]
            }
        }
    }

    /// Rectangle-rule `Σ f̄_{t_n}^{power} dt` over `steps` steps.
    pub fn integral_of_power(&self, power: f64, dt: f64, steps: usize) -> f64 {
        (0..steps).map(|n| self.at(n as f64 * dt).powf(power) * dt).sum()
    }

    pub fn sup(&self) -> f64 {
        match self {
            Envelope::Constant(v) => *v,
            Envelope::Tabulated { values, .. } => values.iter().copied().fold(0.0, f64::max),
        }
    }

    /// Pointwise `f(parts(t))` on the union of the breakpoints.
    pub fn combine(parts: &[&Envelope], f: impl Fn(&[f64]) -> f64) -> Envelope {
        let mut times: Vec<f64> = parts
            .iter()
            .flat_map(|e| match e {
                Envelope::Constant(_) => Vec::new(),
                Envelope::Tabulated { times, .. } => times.clone(),
            })
            .collect();
        let at = |t: f64| f(&parts.iter().map(|e| e.at(t)).collect::<Vec<_>>());
        if times.is_empty() {
            return Envelope::Constant(at(0.0));
        }
        times.sort_by(f64::total_cmp);
        times.dedup();
        let values = times.iter().map(|&t| at(t)).collect();
        Envelope::Tabulated { times, values }
    }

    pub fn plus(&self, c: f64) -> Envelope {
        Envelope::combine(&[self], |v| v[0] + c)
    }
}

const MAGIC: &[u8; 4] = b"SPDF";
const FORMAT_VERSION: u32 = 1;

/// Grid header of a field file.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldHeader {
    pub dim: usize,
    pub points_per_axis: usize,
    pub box_length: f64,
    pub time_count: usize,
    pub n_components: usize,
}

/// Write `slices` (one [`Field`] per time) in the binary field format.
pub fn write_fields<W: Write>(mut out: W, triple: &SpectralTriple, slices: &[Field]) -> Result<()> {
    let n_components = slices.first().map(Field::n_components).unwrap_or(0);
    for s in slices {
        triple.check_len(s.components.first().map(Vec::as_slice).unwrap_or(&[]))?;
        if s.n_components() != n_components {
            return Err(Error::Config("all time slices must have the same component count".into()));
        }
    }
    out.write_all(MAGIC)?;
    out.write_all(&FORMAT_VERSION.to_le_bytes())?;
    out.write_all(&(triple.dim() as u32).to_le_bytes())?;
    out.write_all(&(triple.points_per_axis() as u32).to_le_bytes())?;
    out.write_all(&triple.box_length().to_le_bytes())?;
    out.write_all(&(slices.len() as u32).to_le_bytes())?;
    out.write_all(&(n_components as u32).to_le_bytes())?;
    let mut buf = Vec::with_capacity(triple.len() * 8);
    for s in slices {
        for c in &s.components {
            buf.clear();
            c.iter().for_each(|v| buf.extend_from_slice(&v.to_le_bytes()));
            out.write_all(&buf)?;
        }
    }
    Ok(())
}

/// Read a binary field file.
pub fn read_fields<R: Read>(mut input: R) -> Result<(FieldHeader, Vec<Field>)> {
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("bad magic bytes".into()));
    }
    let mut u = || -> Result<u32> {
        let mut b = [0u8; 4];
        input.read_exact(&mut b)?;
        Ok(u32::from_le_bytes(b))
    };
    let version = u()?;
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let dim = u()? as usize;
    let m = u()? as usize;
    let mut lb = [0u8; 8];
    input.read_exact(&mut lb)?;
    let box_length = f64::from_le_bytes(lb);
    let mut u = || -> Result<u32> {
        let mut b = [0u8; 4];
        input.read_exact(&mut b)?;
        Ok(u32::from_le_bytes(b))
    };
    let time_count = u()? as usize;
    let n_components = u()? as usize;
    if !(1..=3).contains(&dim) || m == 0 || n_components == 0 {
        return Err(Error::Format(format!("invalid header d={dim} M={m} components={n_components}")));
    }
    let len = m.pow(dim as u32);
    let mut slices = Vec::with_capacity(time_count);
    let mut raw = vec![0u8; len * 8];
    for _ in 0..time_count {
        let mut comps = Vec::with_capacity(n_components);
        for _ in 0..n_components {
            input.read_exact(&mut raw)?;
            comps.push(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect());
        }
        slices.push(Field::from_components(comps)?);
    }
    let header = FieldHeader { dim, points_per_axis: m, box_length, time_count, n_components };
    Ok((header, slices))
}

/// CSV of one component: the whole grid for `d ≤ 2`, otherwise the plane
/// through the origin orthogonal to the last axis. Columns are the centered
/// coordinates followed by `value`.
pub fn write_csv_slice<W: Write>(mut out: W, triple: &SpectralTriple, values: &[f64]) -> Result<()> {
    triple.check_len(values)?;
    let d = triple.dim();
    let names = ["x", "y", "z"];
    let shown = d.min(2);
    writeln!(out, "{},value", names[..shown].join(","))?;
    for idx in 0..triple.len() {
        if d == 3 && triple.multi_index(idx)[2] != 0 {
            continue;
        }
        let x = triple.centered_node(idx);
        let coords: Vec<String> = x[..shown].iter().map(|c| format!("{c:.17e}")).collect();
        writeln!(out, "{},{:.17e}", coords.join(","), values[idx])?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::triple::Order;

    #[test]
    fn binary_round_trip() {
        let t = SpectralTriple::new(2, 4, 3.0, Order::One).unwrap();
        let a = Field::from_components(vec![(0..16).map(f64::from).collect(), vec![0.5; 16]]).unwrap();
        let b = a.scaled(-2.0);
        let mut buf = Vec::new();
        write_fields(&mut buf, &t, &[a.clone(), b.clone()]).unwrap();
        let (header, slices) = read_fields(buf.as_slice()).unwrap();
        assert_eq!(header.dim, 2);
        assert_eq!(header.points_per_axis, 4);
        assert_eq!(header.time_count, 2);
        assert_eq!(header.n_components, 2);
        assert_eq!(slices, vec![a, b]);
    }

    #[test]
    fn rejects_garbage() {
        assert!(matches!(read_fields(&b"NOPE0000"[..]), Err(Error::Format(_))));
    }

    #[test]
    fn tabulated_series_is_piecewise_constant() {
        let s = FieldSeries::tabulated(vec![0.0, 1.0], vec![Field::scalar(vec![1.0]), Field::scalar(vec![2.0])]).unwrap();
        assert_eq!(s.eval(&StepContext::at(0.5)).component(0)[0], 1.0);
        assert_eq!(s.eval(&StepContext::at(1.0)).component(0)[0], 2.0);
        assert_eq!(s.eval(&StepContext::at(7.0)).component(0)[0], 2.0);
    }

    #[test]
    fn csv_slice_of_three_dimensional_grid_is_a_plane() {
        let t = SpectralTriple::new(3, 4, 1.0, Order::One).unwrap();
        let mut out = Vec::new();
        write_csv_slice(&mut out, &t, &vec![1.0; t.len()]).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().count(), 1 + 16);
        assert!(text.starts_with("x,y,value"));
    }
}
