//! Benchmark driver for the inertiafb solvers: key=value configuration,
//! problem construction, streamed traces, certification reports and
//! concurrent suites.

pub mod config;
pub mod problems;
pub mod run;

pub use config::{ProblemKind, RunConfig};
pub use run::{estimate_fstar, expand_solvers, run, run_suite, RunOutcome};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("solver failure: {0}")]
    Solver(inertiafb::Error),

    #[error("certification failed")]
    Certification,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<inertiafb::Error> for CliError {
    fn from(e: inertiafb::Error) -> Self {
        match e {
            inertiafb::Error::Io(io) => CliError::Io(io),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl CliError {
    /// 0 ok, 2 configuration, 3 solver failure, 4 certification failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Certification => 4,
        }
    }
}
