//! Command failures and their exit codes.

use postsel::Error;
use thiserror::Error as ThisError;

#[derive(Debug, ThisError)]
pub enum CliError {
    /// Unreadable or invalid input; exit code 1.
    #[error("{0}")]
    Input(String),
    /// The numerical solver did not reach a certified answer; exit code 2.
    #[error("solver failure: {0}")]
    Solver(String),
    /// The requested message dimension is beyond what the channel supports; exit code 3.
    #[error("rate infeasible: {0}")]
    Infeasible(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 1,
            CliError::Solver(_) => 2,
            CliError::Infeasible(_) => 3,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::SolverFailure(_) | Error::NoConvergence | Error::FeasibilityFailure(_) | Error::EmptyScalingInterval { .. } => {
                CliError::Solver(e.to_string())
            }
            Error::InfeasibleRate { dm_sq, threshold } => CliError::Infeasible(format!(
                "d_M^2 = {dm_sq} is not below eps/(1-eps)*2^I_omega + 1 = {threshold:.6} (beyond the one-shot converse)"
            )),
            other => CliError::Input(other.to_string()),
        }
    }
}
