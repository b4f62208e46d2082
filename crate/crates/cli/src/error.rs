use spinqubit_core::Error;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error(transparent)]
    Core(#[from] Error),
    #[error("cache entry {0} is corrupt")]
    CacheCorrupt(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// Process exit code: 2 for invalid input, 3 for solver failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) | CliError::Io(_) => 2,
            CliError::CacheCorrupt(_) => 3,
            CliError::Core(e) => match e {
                Error::SolverDiverged { .. }
                | Error::NotConverged { .. }
                | Error::DegenerateSubspaceUnresolved { .. }
                | Error::UnpairedState { .. }
                | Error::OverlapTooSmall { .. }
                | Error::ZeroLarmor
                | Error::DegenerateExcitedState { .. }
                | Error::SingularPrincipalFactor { .. }
                | Error::DimensionTooLarge { .. } => 3,
                _ => 2,
            },
        }
    }
}
