//! Linear stochastic evolution equations in a discrete Gelfand triple:
//! time stepping, coercivity certificates, Itô residuals, weighted energy
//! reports and stability under approximation.

pub mod coercivity;
pub mod energy;
mod gmres;
pub mod ito;
pub mod noise;
pub mod operators;
pub mod report;
pub mod solver;
pub mod stability;
pub mod weights;

pub use coercivity::{check_coercivity, CoercivityProbe, CoercivityReport, Sample};
pub use energy::energy_report;
pub use ito::{ito_residual, Bracket, ItoResidual};
pub use noise::NoiseModel;
pub use operators::{
    ChannelOperator, DataNorms, DerivativeChannels, DualOperator, EvolutionProblem, FnChannels, FnOperator,
    ForcingSet, FrozenChannels, FrozenDual, LowerOrderBounds, LowerOrderSet, OperatorPair, OwnedContext,
    SymbolOperator, ZeroChannels,
};
pub use report::EstimateReport;
pub use solver::{
    solve, solve_deterministic, solve_ensemble, solve_with_increments, Ensemble, PathStatus, Retention,
    SchemeOptions, StepOutput, Stepper, Trajectory,
};
pub use stability::{stability_experiment, StabilityRow, StabilityTable};
pub use weights::{required_rate, WeightProcess};
