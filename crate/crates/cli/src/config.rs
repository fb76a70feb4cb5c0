//! Experiment configuration files (TOML).
//!
//! Every table except `kind` has defaults, so a config only names what it
//! changes. Relative paths are resolved against the directory holding the
//! config file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use spdelab::spde::GaussianConfig;

use crate::error::RunError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    ResolventSuite,
    MorreySuite,
    ItoSuite,
    Energy,
    Stability,
    GaussianBenchmark,
    Lp,
    W1p,
    Sweep,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default)]
    pub triple: TripleSpec,
    #[serde(default)]
    pub noise: NoiseSpec,
    #[serde(default)]
    pub problem: ProblemSpec,
    #[serde(default)]
    pub estimate: EstimateSpec,
    #[serde(default)]
    pub report: ReportOptions,
    #[serde(default)]
    pub resolvent: ResolventSpec,
    #[serde(default)]
    pub morrey: MorreySpec,
    #[serde(default)]
    pub ito: ItoSpec,
    #[serde(default)]
    pub stability: StabilitySpec,
    #[serde(default)]
    pub gaussian: GaussianConfig,
    pub sweep: Option<SweepSpec>,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TripleSpec {
    pub dim: usize,
    pub grid: usize,
    pub box_length: f64,
    pub order: u32,
}

impl Default for TripleSpec {
    fn default() -> Self {
        Self { dim: 1, grid: 64, box_length: 2.0 * std::f64::consts::PI, order: 1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSpec {
    pub dt: f64,
    pub t_final: f64,
    pub seed: u64,
    pub n_paths: usize,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self { dt: 0.01, t_final: 1.0, seed: 0, n_paths: 16 }
    }
}

/// A scalar grid profile centered at the origin of the periodic box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProfileSpec {
    Gaussian {
        width: f64,
        #[serde(default = "one")]
        amplitude: f64,
    },
    /// `amplitude·sin(2π·mode·x₁/L)`
    Sine {
        mode: u32,
        #[serde(default = "one")]
        amplitude: f64,
    },
    Constant {
        value: f64,
    },
    /// First component of the first slice of a binary field file.
    File {
        path: PathBuf,
    },
}

fn one() -> f64 {
    1.0
}

/// Inward radial drift `−amplitude·y/|y|²`, static at the origin or moving
/// with the first `d` Wiener channels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DriftSpec {
    None,
    InverseDistance { amplitude: f64 },
    Comoving { amplitude: f64 },
    /// bounded drift `value·(1, …, 1)`
    Constant { value: f64 },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForcingSpec {
    /// `𝔣`, the same profile on every axis
    pub divergence: Option<ProfileSpec>,
    pub source: Option<ProfileSpec>,
    pub integrable: Option<ProfileSpec>,
    /// `h`, the same profile on every channel
    pub noise: Option<ProfileSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemSpec {
    /// `a = diffusion·I`
    pub diffusion: f64,
    /// `σ^{ik} = noise·δ^{ik}`
    pub noise: f64,
    /// Wiener channels `K`
    pub channels: usize,
    pub initial: ProfileSpec,
    pub drift: DriftSpec,
    /// bounded constant `c`
    pub reaction: f64,
    /// bounded constant `ν^k` on every channel
    pub noise_reaction: f64,
    /// attach spectral derivatives of the coefficients
    pub derivatives: bool,
    pub forcing: ForcingSpec,
    /// multiplies the initial datum and every forcing channel
    pub scale: f64,
    /// Morrey exponent and largest radius of the certificates
    pub r: f64,
    pub rho0: f64,
}

impl Default for ProblemSpec {
    fn default() -> Self {
        Self {
            diffusion: 1.0,
            noise: 0.0,
            channels: 1,
            initial: ProfileSpec::Gaussian { width: 0.5, amplitude: 1.0 },
            drift: DriftSpec::None,
            reaction: 0.0,
            noise_reaction: 0.0,
            derivatives: false,
            forcing: ForcingSpec::default(),
            scale: 1.0,
            r: 2.5,
            rho0: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimateSpec {
    pub delta: f64,
    pub theta: f64,
    pub gate: bool,
    pub n0: Option<f64>,
    /// `λ`, `N` or `C` of the weight recipe
    pub weight_scale: f64,
    pub mu: f64,
    /// exponent of the `L_p` and `W¹_p` estimates
    pub p: f64,
    /// Fourier modes and random samples of the coercivity probe
    pub probe_modes: usize,
    pub probe_random: usize,
}

impl Default for EstimateSpec {
    fn default() -> Self {
        Self {
            delta: 0.5,
            theta: 0.1,
            gate: true,
            n0: None,
            weight_scale: 1.0,
            mu: 0.0,
            p: 4.0,
            probe_modes: 256,
            probe_random: 8,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportOptions {
    /// write every state of the first path as a binary field file
    pub dump_states: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResolventSpec {
    pub lambdas: Vec<f64>,
    pub samples: usize,
    /// convergence is probed along `λ = 2^j`, `j = 0..=max_power`
    pub max_power: u32,
    pub seed: u64,
}

impl Default for ResolventSpec {
    fn default() -> Self {
        Self { lambdas: vec![1.0, 10.0, 1000.0], samples: 100, max_power: 20, seed: 1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MorreySpec {
    /// grid of the `1/|x|` scaling check
    pub scaling_grid: usize,
    pub scaling_box: f64,
    pub radii: usize,
    /// two grids for the threshold-split constant
    pub split_grids: Vec<usize>,
    pub split_box: f64,
    pub split_amplitude: f64,
    pub split_p: f64,
    pub split_n_hats: Vec<f64>,
}

impl Default for MorreySpec {
    fn default() -> Self {
        Self {
            scaling_grid: 96,
            scaling_box: 2.0,
            radii: 4,
            split_grids: vec![32, 48],
            split_box: 2.0,
            split_amplitude: 0.3,
            split_p: 4.0,
            split_n_hats: vec![1.0, 2.0, 4.0, 8.0],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ItoSpec {
    pub n_paths: usize,
    /// each step must divide `t_final`; the first two are compared
    pub dts: Vec<f64>,
    pub t_final: f64,
    pub seed: u64,
}

impl Default for ItoSpec {
    fn default() -> Self {
        Self { n_paths: 1000, dts: vec![1e-2, 5e-3], t_final: 1.0, seed: 3 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StabilitySpec {
    pub epsilons: Vec<f64>,
    /// exponent of the data cutoffs
    pub p: f64,
    pub tolerance: f64,
}

impl Default for StabilitySpec {
    fn default() -> Self {
        Self { epsilons: (1..=6).map(|n| 0.5f64.powi(n)).collect(), p: 2.0, tolerance: 1e-14 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub base: PathBuf,
    pub param: String,
    pub values: Vec<f64>,
}

/// Scalar knobs accepted by `sweep`.
pub const SWEEP_PARAMS: [&str; 11] =
    ["kappa", "epsilon", "dt", "channels", "n_paths", "scale", "grid", "seed", "delta", "theta", "weight_scale"];

impl ExperimentConfig {
    pub fn parse(text: &str, origin: &Path) -> Result<Self, RunError> {
        toml::from_str(text).map_err(|e| RunError::Config(format!("{}: {e}", origin.display())))
    }

    pub fn load(path: &Path) -> Result<(Self, Vec<u8>), RunError> {
        let bytes = std::fs::read(path).map_err(|e| RunError::io(path, e))?;
        let text = std::str::from_utf8(&bytes)
            .map_err(|_| RunError::Config(format!("{}: not valid UTF-8", path.display())))?;
        let mut cfg = Self::parse(text, path)?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        Ok((cfg, bytes))
    }

    fn resolve_paths(&mut self, dir: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        };
        fix(&mut self.output);
        if let Some(s) = &mut self.sweep {
            fix(&mut s.base);
        }
        let profiles = [
            Some(&mut self.problem.initial),
            self.problem.forcing.divergence.as_mut(),
            self.problem.forcing.source.as_mut(),
            self.problem.forcing.integrable.as_mut(),
            self.problem.forcing.noise.as_mut(),
        ];
        for p in profiles.into_iter().flatten() {
            if let ProfileSpec::File { path } = p {
                fix(path);
            }
        }
    }

    /// Kind-specific checks beyond the schema.
    pub fn validate(&self) -> Result<(), RunError> {
        let bad = |m: String| Err(RunError::Config(m));
        let t = &self.triple;
        if !(1..=3).contains(&t.dim) || t.grid < 2 || t.grid % 2 != 0 || !(t.order == 1 || t.order == 2) {
            return bad(format!("triple: need dim in 1..=3, even grid >= 2, order 1 or 2; got {t:?}"));
        }
        let uses_problem =
            matches!(self.kind, ExperimentKind::Energy | ExperimentKind::Stability | ExperimentKind::Lp | ExperimentKind::W1p);
        if uses_problem {
            let n = &self.noise;
            let ratio = n.t_final / n.dt;
            if !(n.dt > 0.0 && n.t_final > 0.0) || (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) {
                return bad(format!("noise: t_final {} must be a whole number of steps dt {}", n.t_final, n.dt));
            }
            if n.n_paths == 0 {
                return bad("noise: n_paths must be positive".into());
            }
            let profiles = [
                Some(&self.problem.initial),
                self.problem.forcing.divergence.as_ref(),
                self.problem.forcing.source.as_ref(),
                self.problem.forcing.integrable.as_ref(),
                self.problem.forcing.noise.as_ref(),
            ];
            for p in profiles.into_iter().flatten() {
                if let ProfileSpec::File { path } = p {
                    if !path.is_file() {
                        return bad(format!("problem: referenced field file {} does not exist", path.display()));
                    }
                }
            }
            if matches!(self.problem.drift, DriftSpec::Comoving { .. }) && self.problem.channels < t.dim {
                return bad("problem: a comoving drift needs at least dim Wiener channels".into());
            }
        }
        match self.kind {
            ExperimentKind::Lp | ExperimentKind::W1p if !(self.estimate.p > 2.0) => {
                bad(format!("estimate: p must exceed 2, got {}", self.estimate.p))
            }
            ExperimentKind::Stability if self.stability.epsilons.is_empty() => {
                bad("stability: epsilons must not be empty".into())
            }
            ExperimentKind::ItoSuite if self.ito.dts.is_empty() || self.ito.n_paths == 0 => {
                bad("ito: need at least one step and one path".into())
            }
            ExperimentKind::Sweep => match &self.sweep {
                None => bad("sweep: the [sweep] table is required".into()),
                Some(s) if !s.base.is_file() => bad(format!("sweep: base config {} does not exist", s.base.display())),
                Some(s) if s.values.is_empty() => bad("sweep: values must not be empty".into()),
                Some(s) => check_param(&s.param),
            },
            _ => Ok(()),
        }
    }

    /// Sets one sweep knob.
    pub fn apply_param(&mut self, name: &str, value: f64) -> Result<(), RunError> {
        check_param(name)?;
        let whole = |v: f64| -> Result<usize, RunError> {
            if v >= 0.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(RunError::Config(format!("sweep: {name} takes whole numbers, got {v}")))
            }
        };
        match name {
            "kappa" => match &mut self.problem.drift {
                DriftSpec::InverseDistance { amplitude } | DriftSpec::Comoving { amplitude } => *amplitude = value,
                DriftSpec::Constant { value: v } => *v = value,
                DriftSpec::None => return Err(RunError::Config("sweep: kappa needs a drift profile".into())),
            },
            "epsilon" => self.stability.epsilons = vec![value],
            "dt" => {
                self.noise.dt = value;
                self.ito.dts = vec![value];
                self.gaussian.dt = value;
            }
            "channels" => self.problem.channels = whole(value)?,
            "n_paths" => {
                self.noise.n_paths = whole(value)?;
                self.ito.n_paths = whole(value)?;
            }
            "scale" => self.problem.scale = value,
            "grid" => {
                self.triple.grid = whole(value)?;
                self.gaussian.grid = whole(value)?;
            }
            "seed" => {
                let s = whole(value)? as u64;
                self.noise.seed = s;
                self.ito.seed = s;
                self.gaussian.seed = s;
                self.resolvent.seed = s;
            }
            "delta" => self.estimate.delta = value,
            "theta" => self.estimate.theta = value,
            "weight_scale" => self.estimate.weight_scale = value,
            _ => unreachable!("checked above"),
        }
        Ok(())
    }
}

fn check_param(name: &str) -> Result<(), RunError> {
    if SWEEP_PARAMS.contains(&name) {
        Ok(())
    } else {
        Err(RunError::Config(format!("unknown sweep parameter {name:?}; recognized: {}", SWEEP_PARAMS.join(", "))))
    }
}
