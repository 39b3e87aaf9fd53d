use std::path::PathBuf;

use markov_sampler::{CmdpError, SimError};
use serde::Serialize;
use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID_INPUT: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;
pub const EXIT_INTERNAL: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("{0}")]
    Infeasible(String),
    #[error("internal consistency failure: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Io { .. } | Self::Parse { .. } | Self::InvalidInput(_) => EXIT_INVALID_INPUT,
            Self::Infeasible(_) => EXIT_INFEASIBLE,
            Self::Internal(_) => EXIT_INTERNAL,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::Io { .. } => "io",
            Self::Parse { .. } => "parse",
            Self::InvalidInput(_) => "invalid_input",
            Self::Infeasible(_) => "infeasible",
            Self::Internal(_) => "internal",
        }
    }

    /// Single-line JSON object written to stderr on failure.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Body<'a> {
            kind: &'a str,
            message: String,
            exit_code: i32,
        }
        #[derive(Serialize)]
        struct Envelope<'a> {
            error: Body<'a>,
        }
        serde_json::to_string(&Envelope {
            error: Body {
                kind: self.kind(),
                message: self.to_string(),
                exit_code: self.exit_code(),
            },
        })
        .expect("error envelope serializes")
    }
}

impl From<CmdpError> for CliError {
    fn from(err: CmdpError) -> Self {
        match err {
            CmdpError::Infeasible | CmdpError::InfeasibleByConstruction { .. } => {
                Self::Infeasible(err.to_string())
            }
            CmdpError::InvalidParameter(_)
            | CmdpError::PolicyShape(_)
            | CmdpError::InducedNotErgodic(_)
            | CmdpError::PeriodExceedsM { .. } => Self::InvalidInput(err.to_string()),
            CmdpError::Unbounded
            | CmdpError::Lp(_)
            | CmdpError::InducedChain(_)
            | CmdpError::ObjectiveMismatch { .. } => Self::Internal(err.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(err: SimError) -> Self {
        match err {
            SimError::Model(inner) => inner.into(),
            other => Self::InvalidInput(other.to_string()),
        }
    }
}
