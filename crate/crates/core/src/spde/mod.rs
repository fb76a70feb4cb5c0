//! Divergence-form parabolic SPDEs with Morrey-admissible lower-order
//! coefficients on the periodic grid.

pub mod assemble;
pub mod coefficients;
pub mod estimates;
pub mod gaussian;
pub mod mollify;
pub mod weak;

pub use assemble::{
    assemble, assemble_l2, assemble_w12, bilinear_form, Assembly, AssemblyConstants, AssemblyOptions,
};
pub use coefficients::{CoefficientDerivatives, EllipticityReport, HatSum, SpdeCoefficients, SpdeForcing};
pub use mollify::{lp_norm, mollify_problem, MollifiedProblem, Mollifier};
pub use weak::{trajectory_weak_residual, weak_residual, DiscretePath, TestSet, WeakResidual};
pub use estimates::{
    l2_report, l2_weight, lp_report, lp_weight, w12_report, w12_weight, w1p_report, w1p_weight, WeightConstants,
};
pub use gaussian::{
    drift_family, gaussian_benchmark, radial_drift_coefficient, DriftMotion, supercritical_probe, GaussianConfig, GaussianReport, LadderConfig, ProbeConfig,
    ProbePoint,
};
