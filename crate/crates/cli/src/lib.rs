//! Command-line harness: experiment configuration, simulation runs with CSV
//! output, and the sampled property-check suites.

pub mod checks;
pub mod config;
pub mod experiment;

use monostab_core::Error;

/// Process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Pass = 0,
    Violation = 1,
    Config = 2,
    SolverFailure = 3,
}

impl Exit {
    pub fn code(self) -> i32 {
        self as i32
    }

    pub fn for_error(e: &Error) -> Exit {
        match e {
            Error::Convergence { .. } => Exit::SolverFailure,
            _ => Exit::Config,
        }
    }
}

/// Thread count from `MONOSTAB_THREADS` (default 1).
pub fn threads_from_env() -> Result<usize, Error> {
    match std::env::var("MONOSTAB_THREADS") {
        Err(_) => Ok(1),
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|n| *n > 0)
            .ok_or_else(|| Error::Config(format!("MONOSTAB_THREADS must be a positive integer, got '{v}'"))),
    }
}
