use ambig_pricer::PricerError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("solver failure: {0}")]
    Solver(#[from] PricerError),

    #[error("output error: {0}")]
    Output(String),

    /// Verification ran to completion but some checks failed.
    #[error("{0} verification check(s) failed")]
    ChecksFailed(usize),
}

impl CliError {
    /// Library validation errors raised while reading a config.
    pub fn invalid(e: PricerError) -> Self {
        CliError::Config(e.to_string())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::ChecksFailed(_) => 1,
            CliError::Config(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Output(_) => 4,
        }
    }
}
