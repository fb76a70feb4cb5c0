use std::path::Path;

use thiserror::Error;

/// Failure of a run, mapped to a process exit code.
#[derive(Debug, Error)]
pub enum RunError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Core(#[from] spdelab::Error),
    #[error("{diverged} of {total} paths diverged")]
    Diverged { diverged: usize, total: usize },
}

impl RunError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io { path: path.display().to_string(), source }
    }

    /// 1: bad input, 2: a theory precondition refused, 3: numerical failure.
    pub fn exit_code(&self) -> i32 {
        use spdelab::Error as E;
        match self {
            Self::Config(_) | Self::Io { .. } => 1,
            Self::Core(E::GateRefused { .. } | E::Coercivity { .. } | E::Ellipticity { .. }) => 2,
            Self::Core(E::NonFinite(_) | E::LinearSolve { .. }) | Self::Diverged { .. } => 3,
            Self::Core(_) => 1,
        }
    }
}
