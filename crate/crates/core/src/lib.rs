//! Distributed non-Bayesian learning with the min-rule under event-triggered
//! and quantized communication.
//!
//! Agents and hypotheses are zero-based inside the library. Everything a user
//! reads or writes (scenario files, CSV, summaries, wire ids, errors) is
//! one-based.

pub mod belief;
pub mod event;
pub mod hypothesis;
pub mod logmath;
pub mod metrics;
pub mod network;
pub mod output;
pub mod quant;
pub mod rng;
pub mod run;
pub mod scenario;
pub mod trace;

pub use run::{run, sweep, RunError, RunOptions, RunOutput, Summary, SweepReport};
pub use scenario::{Scenario, ScenarioError, ScenarioFile};

use thiserror::Error;

/// Top-level failure, mapped to a process exit code.
#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Run(#[from] RunError),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl SimError {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Self::Io {
            context: context.into(),
            source,
        }
    }

    /// 1 for bad input, 2 for a runtime invariant breach, 3 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Scenario(ScenarioError::Io { .. }) => 3,
            Self::Scenario(_) => 1,
            Self::Run(RunError::Output(_)) => 3,
            Self::Run(RunError::NoSeeds) => 1,
            Self::Run(_) => 2,
            Self::Io { .. } => 3,
        }
    }
}
