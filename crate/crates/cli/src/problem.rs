//! Builds grids, coefficients, forcing and initial data from a config.

use std::fs::File;
use std::io::BufReader;

use spdelab::evolution::CoercivityProbe;
use spdelab::field::read_fields;
use spdelab::morrey::{Admissibility, AdmissibleField, MorreyParams};
use spdelab::profiles::gaussian_bump;
use spdelab::spde::{
    radial_drift_coefficient, AssemblyOptions, DriftMotion, SpdeCoefficients, SpdeForcing, WeightConstants,
};
use spdelab::{Field, FieldSeries, Order, SpectralTriple};

use crate::config::{DriftSpec, EstimateSpec, ExperimentConfig, ProfileSpec, TripleSpec};
use crate::error::RunError;

pub fn build_triple(spec: &TripleSpec) -> Result<SpectralTriple, RunError> {
    let order = match spec.order {
        1 => Order::One,
        2 => Order::Two,
        o => return Err(RunError::Config(format!("triple: order must be 1 or 2, got {o}"))),
    };
    Ok(SpectralTriple::new(spec.dim, spec.grid, spec.box_length, order)?)
}

/// Admissibility exponent when `d ≥ 3`; the full exponent otherwise, where
/// only bounded coefficients are accepted.
pub fn morrey_params(d: usize, r: f64, rho0: f64) -> Result<MorreyParams, RunError> {
    Ok(if d >= 3 {
        MorreyParams::admissibility(d, r, rho0)?
    } else {
        MorreyParams::new(r, rho0, 1.0, Admissibility::Full)?
    })
}

pub fn sample_profile(triple: &SpectralTriple, profile: &ProfileSpec) -> Result<Vec<f64>, RunError> {
    let d = triple.dim();
    let l = triple.box_length();
    Ok(match profile {
        ProfileSpec::Gaussian { width, amplitude } => {
            if !(*width > 0.0) {
                return Err(RunError::Config(format!("gaussian width must be positive, got {width}")));
            }
            gaussian_bump(triple, &vec![0.0; d], *width, *amplitude)
        }
        ProfileSpec::Sine { mode, amplitude } => {
            let w = 2.0 * std::f64::consts::PI * f64::from(*mode) / l;
            triple.sample(|x| amplitude * (w * x[0]).sin()).into_values()
        }
        ProfileSpec::Constant { value } => vec![*value; triple.len()],
        ProfileSpec::File { path } => {
            let file = File::open(path).map_err(|e| RunError::io(path, e))?;
            let (header, slices) = read_fields(BufReader::new(file))?;
            let matches = header.dim == d
                && header.points_per_axis == triple.points_per_axis()
                && (header.box_length - l).abs() <= 1e-12 * l;
            if !matches || slices.is_empty() {
                return Err(RunError::Config(format!(
                    "{}: field file grid (d={}, M={}, L={}) does not match the configured triple",
                    path.display(),
                    header.dim,
                    header.points_per_axis,
                    header.box_length
                )));
            }
            slices[0].component(0).to_vec()
        }
    })
}

/// Everything an SPDE experiment needs before assembly.
#[derive(Clone, Debug)]
pub struct SpdeSetup {
    pub triple: SpectralTriple,
    pub params: MorreyParams,
    pub coefficients: SpdeCoefficients,
    pub forcing: SpdeForcing,
    pub initial: Vec<f64>,
}

impl SpdeSetup {
    pub fn from_config(cfg: &ExperimentConfig) -> Result<Self, RunError> {
        let triple = build_triple(&cfg.triple)?;
        let spec = &cfg.problem;
        let (d, k, n) = (triple.dim(), spec.channels, triple.len());
        if k == 0 {
            return Err(RunError::Config("problem: channels must be positive".into()));
        }
        let params = morrey_params(d, spec.r, spec.rho0)?;
        let mut c = SpdeCoefficients::isotropic(&triple, k, spec.diffusion, spec.noise, params);
        let constant = |value: f64, comps: usize| {
            AdmissibleField::bounded(
                FieldSeries::constant(Field::from_components(vec![vec![value; n]; comps]).expect("finite constant")),
                params,
            )
        };
        c.drift = match spec.drift {
            DriftSpec::None => c.drift,
            DriftSpec::InverseDistance { amplitude } => {
                radial_drift_coefficient(&triple, amplitude, DriftMotion::Static, params)?
            }
            DriftSpec::Comoving { amplitude } => {
                radial_drift_coefficient(&triple, amplitude, DriftMotion::Comoving, params)?
            }
            DriftSpec::Constant { value } => constant(value, d),
        };
        if spec.reaction != 0.0 {
            c.reaction = constant(spec.reaction, 1);
        }
        if spec.noise_reaction != 0.0 {
            c.noise_reaction = constant(spec.noise_reaction, k);
        }
        if spec.derivatives || triple.order() == Order::Two {
            c = c.with_spectral_derivatives(&triple, params);
        }
        let s = spec.scale;
        let channel = |p: &Option<ProfileSpec>, comps: usize| -> Result<Option<FieldSeries>, RunError> {
            p.as_ref()
                .map(|p| {
                    let v: Vec<f64> = sample_profile(&triple, p)?.into_iter().map(|x| s * x).collect();
                    Ok(FieldSeries::constant(Field::from_components(vec![v; comps])?))
                })
                .transpose()
        };
        let f = &spec.forcing;
        let forcing = SpdeForcing {
            divergence: channel(&f.divergence, d)?,
            source: channel(&f.source, 1)?,
            integrable: channel(&f.integrable, 1)?,
            noise: channel(&f.noise, k)?,
        };
        let initial = sample_profile(&triple, &spec.initial)?.into_iter().map(|x| s * x).collect();
        Ok(Self { triple, params, coefficients: c, forcing, initial })
    }
}

pub fn assembly_options(est: &EstimateSpec) -> AssemblyOptions {
    let mut o = AssemblyOptions::new(est.delta).with_theta(est.theta).with_gate(est.gate);
    o.probe = CoercivityProbe { max_modes: est.probe_modes, random: est.probe_random, ..CoercivityProbe::default() };
    if let Some(n0) = est.n0 {
        o = o.with_n0(n0);
    }
    o
}

pub fn weight_constants(est: &EstimateSpec) -> WeightConstants {
    WeightConstants { scale: est.weight_scale, mu: est.mu, delta: est.delta }
}
