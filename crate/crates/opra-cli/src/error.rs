//! CLI error taxonomy with stable exit codes: 2 for configuration and input
//! validation problems, 3 for estimation failures on valid configurations.

use opra_core::{EstimatorError, OpraError, PolicyError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Estimation(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        Self::Config(msg.into())
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Estimation(_) => 3,
            Self::Io { .. } => 2,
        }
    }
}

fn from_policy(err: &PolicyError) -> CliError {
    match err {
        // A dataset without propensities and no behavior file is a
        // configuration hole, not an estimation failure.
        PolicyError::UnresolvedBehavior { row } => CliError::Config(format!(
            "behavior source unresolved: row {row} has no logged propensity and no behavior policy was supplied"
        )),
        other => CliError::Estimation(other.to_string()),
    }
}

impl From<EstimatorError> for CliError {
    fn from(err: EstimatorError) -> Self {
        match &err {
            EstimatorError::Policy(p) => from_policy(p),
            EstimatorError::Model(_) => Self::Config(err.to_string()),
            _ => Self::Estimation(err.to_string()),
        }
    }
}

impl From<OpraError> for CliError {
    fn from(err: OpraError) -> Self {
        match &err {
            OpraError::Policy(p) => from_policy(p),
            OpraError::Estimator(e) => match e {
                EstimatorError::Policy(p) => from_policy(p),
                EstimatorError::Model(_) => Self::Config(err.to_string()),
                _ => Self::Estimation(err.to_string()),
            },
            _ => Self::Config(err.to_string()),
        }
    }
}
