//! Spectral laboratory for linear stochastic evolution equations in a
//! Gelfand triple and for divergence-form SPDEs with singular coefficients.

pub mod error;
pub mod evolution;
mod fft;
pub mod field;
pub mod morrey;
pub mod profiles;
pub mod spde;
pub mod triple;

pub use error::{Error, Result};
pub use field::{Envelope, Field, FieldSeries, StepContext};
pub use triple::{GridFunction, Order, SpectralTriple};
