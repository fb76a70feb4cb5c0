//! Matrix-free operators of the abstract equation and the problem container.
//!
//! Every operator returns `L₂` representatives: for a functional `ℓ` the
//! returned grid function `g` satisfies `ℓ(w) = (w, g)_{L₂}`. Elements of `H`
//! enter through the representative of `w ↦ (w, x)_H`, so dual pairings,
//! `H`-inner products and Riesz maps all reduce to grid quadrature.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::{Envelope, FieldSeries, StepContext};
use crate::triple::SpectralTriple;

/// An operator frozen at one time and Wiener state.
pub trait FrozenDual: Send + Sync {
    fn apply(&self, v: &[f64]) -> Vec<f64>;

    /// Real Fourier symbol `s` when the representative is `F⁻¹[s·v̂]`.
    fn symbol(&self) -> Option<&[f64]> {
        None
    }

    /// Diagonal stand-in used to precondition implicit solves.
    fn reference_symbol(&self) -> Option<&[f64]> {
        self.symbol()
    }
}

/// Time-dependent linear map with values in `V*` (or `H`, seen inside `V*`).
pub trait DualOperator: Send + Sync {
    fn at<'a>(&'a self, ctx: &StepContext<'_>) -> Box<dyn FrozenDual + 'a>;
}

/// `K` channels frozen at one time; channel `k` is returned as the
/// representative of `w ↦ (w, B^k v)_H`.
pub trait FrozenChannels: Send + Sync {
    fn apply(&self, v: &[f64]) -> Vec<Vec<f64>>;
}

/// Time-dependent linear map into `ℓ₂(H)` truncated to `K` channels.
pub trait ChannelOperator: Send + Sync {
    fn channels(&self) -> usize;
    fn at<'a>(&'a self, ctx: &StepContext<'_>) -> Box<dyn FrozenChannels + 'a>;
}

/// Owned copy of a [`StepContext`] for operators built from closures.
#[derive(Clone, Debug, PartialEq)]
pub struct OwnedContext {
    pub t: f64,
    pub step: usize,
    pub wiener: Vec<f64>,
}

impl OwnedContext {
    pub fn from_ctx(ctx: &StepContext<'_>) -> Self {
        Self { t: ctx.t, step: ctx.step, wiener: ctx.wiener.to_vec() }
    }
    pub fn as_ctx(&self) -> StepContext<'_> {
        StepContext { t: self.t, step: self.step, wiener: &self.wiener }
    }
}

/// Fourier-diagonal operator with a time-independent real symbol.
#[derive(Clone, Debug)]
pub struct SymbolOperator {
    triple: SpectralTriple,
    symbol: Arc<Vec<f64>>,
}

impl SymbolOperator {
    pub fn new(triple: &SpectralTriple, symbol: Vec<f64>) -> Result<Self> {
        if symbol.len() != triple.len() {
            return Err(Error::Shape { expected: triple.len().to_string(), found: symbol.len().to_string() });
        }
        crate::error::ensure_finite(&symbol, "operator symbol")?;
        Ok(Self { triple: triple.clone(), symbol: Arc::new(symbol) })
    }

    /// `⟨w, A v⟩ = −diffusion·(Dw, Dv)_{L₂} − reaction·(w, v)_{L₂}` on the
    /// `L₂` pair; on the `W¹₂` pair the same form is tested against `(1−Δ)w`.
    pub fn heat(triple: &SpectralTriple, diffusion: f64, reaction: f64) -> Self {
        let symbol = triple
            .xi_sq()
            .iter()
            .zip(triple.h_weights())
            .map(|(s, wh)| -(diffusion * s + reaction) * wh)
            .collect();
        Self { triple: triple.clone(), symbol: Arc::new(symbol) }
    }

    /// The pairing `−(w, v)_V`, whose coercivity constant is exactly 2.
    pub fn negative_v_pairing(triple: &SpectralTriple) -> Self {
        let symbol = triple.v_weights().iter().map(|w| -w).collect();
        Self { triple: triple.clone(), symbol: Arc::new(symbol) }
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { triple: self.triple.clone(), symbol: Arc::new(self.symbol.iter().map(|s| c * s).collect()) }
    }

    pub fn symbol(&self) -> &[f64] {
        &self.symbol
    }
}

impl FrozenDual for SymbolOperator {
    fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.triple.apply_symbol(v, &self.symbol)
    }
    fn symbol(&self) -> Option<&[f64]> {
        Some(&self.symbol)
    }
}

impl DualOperator for SymbolOperator {
    fn at<'a>(&'a self, _ctx: &StepContext<'_>) -> Box<dyn FrozenDual + 'a> {
        Box::new(self.clone())
    }
}

type DualFn = dyn Fn(&StepContext<'_>, &[f64]) -> Vec<f64> + Send + Sync;

/// Operator given by a closure `(ctx, v) ↦ representative`.
#[derive(Clone)]
pub struct FnOperator {
    action: Arc<DualFn>,
    reference: Option<Arc<Vec<f64>>>,
}

impl FnOperator {
    pub fn new<F>(action: F) -> Self
    where
        F: Fn(&StepContext<'_>, &[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        Self { action: Arc::new(action), reference: None }
    }

    pub fn with_reference_symbol(mut self, symbol: Vec<f64>) -> Self {
        self.reference = Some(Arc::new(symbol));
        self
    }
}

struct FrozenFn<'a> {
    op: &'a FnOperator,
    ctx: OwnedContext,
}

impl FrozenDual for FrozenFn<'_> {
    fn apply(&self, v: &[f64]) -> Vec<f64> {
        (self.op.action)(&self.ctx.as_ctx(), v)
    }
    fn reference_symbol(&self) -> Option<&[f64]> {
        self.op.reference.as_deref().map(|s| s.as_slice())
    }
}

impl DualOperator for FnOperator {
    fn at<'a>(&'a self, ctx: &StepContext<'_>) -> Box<dyn FrozenDual + 'a> {
        Box::new(FrozenFn { op: self, ctx: OwnedContext::from_ctx(ctx) })
    }
}

/// `B^k v = scale·D_k v` for `k < d`.
#[derive(Clone, Debug)]
pub struct DerivativeChannels {
    triple: SpectralTriple,
    scale: f64,
}

impl DerivativeChannels {
    pub fn new(triple: &SpectralTriple, scale: f64) -> Self {
        Self { triple: triple.clone(), scale }
    }
}

impl FrozenChannels for DerivativeChannels {
    fn apply(&self, v: &[f64]) -> Vec<Vec<f64>> {
        self.triple
            .gradient(v)
            .into_iter()
            .map(|g| {
                let g: Vec<f64> = g.into_iter().map(|x| self.scale * x).collect();
                self.triple.h_representative(&g)
            })
            .collect()
    }
}

impl ChannelOperator for DerivativeChannels {
    fn channels(&self) -> usize {
        self.triple.dim()
    }
    fn at<'a>(&'a self, _ctx: &StepContext<'_>) -> Box<dyn FrozenChannels + 'a> {
        Box::new(self.clone())
    }
}

/// `K` channels that vanish identically.
#[derive(Clone, Copy, Debug)]
pub struct ZeroChannels(pub usize);

impl FrozenChannels for ZeroChannels {
    fn apply(&self, v: &[f64]) -> Vec<Vec<f64>> {
        vec![vec![0.0; v.len()]; self.0]
    }
}

impl ChannelOperator for ZeroChannels {
    fn channels(&self) -> usize {
        self.0
    }
    fn at<'a>(&'a self, _ctx: &StepContext<'_>) -> Box<dyn FrozenChannels + 'a> {
        Box::new(*self)
    }
}

type ChannelFn = dyn Fn(&StepContext<'_>, &[f64]) -> Vec<Vec<f64>> + Send + Sync;

/// Channel operator given by a closure returning representatives.
#[derive(Clone)]
pub struct FnChannels {
    channels: usize,
    action: Arc<ChannelFn>,
}

impl FnChannels {
    pub fn new<F>(channels: usize, action: F) -> Self
    where
        F: Fn(&StepContext<'_>, &[f64]) -> Vec<Vec<f64>> + Send + Sync + 'static,
    {
        Self { channels, action: Arc::new(action) }
    }
}

struct FrozenChannelFn<'a> {
    op: &'a FnChannels,
    ctx: OwnedContext,
}

impl FrozenChannels for FrozenChannelFn<'_> {
    fn apply(&self, v: &[f64]) -> Vec<Vec<f64>> {
        (self.op.action)(&self.ctx.as_ctx(), v)
    }
}

impl ChannelOperator for FnChannels {
    fn channels(&self) -> usize {
        self.channels
    }
    fn at<'a>(&'a self, ctx: &StepContext<'_>) -> Box<dyn FrozenChannels + 'a> {
        Box::new(FrozenChannelFn { op: self, ctx: OwnedContext::from_ctx(ctx) })
    }
}

/// Principal operators `A_t`, `B_t` with their structural constants.
#[derive(Clone)]
pub struct OperatorPair {
    pub principal: Arc<dyn DualOperator>,
    pub noise: Arc<dyn ChannelOperator>,
    /// coercivity constant `δ`
    pub delta: f64,
    /// `|A_t v|_{V*} ≤ K|v|_V`
    pub bound: f64,
    /// `(Σ_k |B^k_t v|²_H)^{1/2} ≤ K₀|v|_V (+ K₁|v|_H)`
    pub noise_bound: f64,
    pub affine_noise_bound: Option<f64>,
}

impl OperatorPair {
    pub fn new(principal: Arc<dyn DualOperator>, noise: Arc<dyn ChannelOperator>, delta: f64) -> Result<Self> {
        if !(delta.is_finite() && delta > 0.0) {
            return Err(Error::Domain(format!("coercivity constant must be positive, got {delta}")));
        }
        Ok(Self { principal, noise, delta, bound: f64::INFINITY, noise_bound: f64::INFINITY, affine_noise_bound: None })
    }

    pub fn with_bounds(mut self, bound: f64, noise_bound: f64) -> Self {
        self.bound = bound;
        self.noise_bound = noise_bound;
        self
    }

    pub fn with_affine_noise_bound(mut self, k1: f64) -> Self {
        self.affine_noise_bound = Some(k1);
        self
    }

    pub fn channels(&self) -> usize {
        self.noise.channels()
    }
}

/// Time-pointwise operator norms of the lower-order terms.
#[derive(Clone, Debug, PartialEq)]
pub struct LowerOrderBounds {
    /// `|𝔞_t|` as a map `V → H`
    pub gradient: Envelope,
    /// `|𝔞*_t|` as a map `H → V*`
    pub dual: Envelope,
    /// `|𝔟_t|` as a map `H → ℓ₂(H)`
    pub noise: Envelope,
    /// `|𝔠_t|` as a map `H → H`
    pub reaction: Envelope,
}

impl LowerOrderBounds {
    pub fn zero() -> Self {
        Self {
            gradient: Envelope::Constant(0.0),
            dual: Envelope::Constant(0.0),
            noise: Envelope::Constant(0.0),
            reaction: Envelope::Constant(0.0),
        }
    }

    /// `(∫|𝔞|², ∫|𝔞*|², ∫|𝔟|², ∫|𝔠|)` by the rectangle rule.
    pub fn integrated(&self, dt: f64, steps: usize) -> [f64; 4] {
        [
            self.gradient.integral_of_power(2.0, dt, steps),
            self.dual.integral_of_power(2.0, dt, steps),
            self.noise.integral_of_power(2.0, dt, steps),
            self.reaction.integral_of_power(1.0, dt, steps),
        ]
    }
}

/// Lower-order perturbations `𝔞, 𝔞*, 𝔟, 𝔠`; absent terms vanish.
#[derive(Clone)]
pub struct LowerOrderSet {
    pub gradient: Option<Arc<dyn DualOperator>>,
    pub dual: Option<Arc<dyn DualOperator>>,
    pub noise: Option<Arc<dyn ChannelOperator>>,
    pub reaction: Option<Arc<dyn DualOperator>>,
    pub bounds: LowerOrderBounds,
}

impl LowerOrderSet {
    pub fn none() -> Self {
        Self { gradient: None, dual: None, noise: None, reaction: None, bounds: LowerOrderBounds::zero() }
    }

    pub(crate) fn explicit_terms(&self) -> impl Iterator<Item = &Arc<dyn DualOperator>> {
        [&self.gradient, &self.dual, &self.reaction].into_iter().flatten()
    }
}

impl Default for LowerOrderSet {
    fn default() -> Self {
        Self::none()
    }
}

/// Free terms of the equation. The `dual` channel holds `L₂` representatives
/// of `V*`-valued forcing; the others hold grid elements of `H`.
#[derive(Clone, Debug, Default)]
pub struct ForcingSet {
    /// `f*`
    pub dual: Option<FieldSeries>,
    /// `f`, measured against the weight as `α⁻¹|f|²_H`
    pub weighted: Option<FieldSeries>,
    /// `g`, integrable in time only
    pub integrable: Option<FieldSeries>,
    /// `h`, one component per Wiener channel
    pub noise: Option<FieldSeries>,
}

impl ForcingSet {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn scaled(&self, c: f64) -> Self {
        let s = |f: &Option<FieldSeries>| f.as_ref().map(|f| f.map(move |x| x.scaled(c)));
        Self { dual: s(&self.dual), weighted: s(&self.weighted), integrable: s(&self.integrable), noise: s(&self.noise) }
    }
}

/// Squared norms of the data at one step.
#[derive(Clone, Copy, Debug, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DataNorms {
    /// `|f*|²_{V*}`
    pub dual_sq: f64,
    /// `|f|²_H`
    pub weighted_sq: f64,
    /// `|g|_H` (not squared)
    pub integrable: f64,
    /// `Σ_k |h^k|²_H`
    pub noise_sq: f64,
}

/// The complete abstract problem on one triple.
#[derive(Clone)]
pub struct EvolutionProblem {
    pub triple: SpectralTriple,
    pub ops: OperatorPair,
    pub lower: LowerOrderSet,
    pub forcing: ForcingSet,
    pub initial: Vec<f64>,
}

impl EvolutionProblem {
    pub fn new(
        triple: &SpectralTriple,
        ops: OperatorPair,
        lower: LowerOrderSet,
        forcing: ForcingSet,
        initial: Vec<f64>,
    ) -> Result<Self> {
        triple.check_len(&initial)?;
        crate::error::ensure_finite(&initial, "initial datum")?;
        let k = ops.channels();
        if let Some(b) = &lower.noise {
            if b.channels() != k {
                return Err(Error::Config(format!("lower-order noise has {} channels, expected {k}", b.channels())));
            }
        }
        let n = triple.len();
        for (name, f, comps) in [
            ("f*", &forcing.dual, 1),
            ("f", &forcing.weighted, 1),
            ("g", &forcing.integrable, 1),
            ("h", &forcing.noise, k),
        ] {
            if let Some(f) = f {
                if f.len() != n || f.n_components() != comps {
                    return Err(Error::Config(format!(
                        "forcing {name} must have {comps} component(s) of length {n}, got {} of length {}",
                        f.n_components(),
                        f.len()
                    )));
                }
            }
        }
        Ok(Self { triple: triple.clone(), ops, lower, forcing, initial })
    }

    pub fn channels(&self) -> usize {
        self.ops.channels()
    }

    /// Same operators, data multiplied by `c`.
    pub fn scaled_data(&self, c: f64) -> Self {
        Self {
            triple: self.triple.clone(),
            ops: self.ops.clone(),
            lower: self.lower.clone(),
            forcing: self.forcing.scaled(c),
            initial: self.initial.iter().map(|x| c * x).collect(),
        }
    }

    pub fn with_initial(&self, initial: Vec<f64>) -> Result<Self> {
        Self::new(&self.triple, self.ops.clone(), self.lower.clone(), self.forcing.clone(), initial)
    }

    pub fn with_forcing(&self, forcing: ForcingSet) -> Result<Self> {
        Self::new(&self.triple, self.ops.clone(), self.lower.clone(), forcing, self.initial.clone())
    }
}
