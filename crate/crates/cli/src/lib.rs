//! Library side of the `sphere-ineq` command-line tool: run configuration,
//! serializable reports and one function per subcommand.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod report;

pub use commands::{
    cmd_fuzz_inequality, cmd_g_curve, cmd_monotonicity, cmd_spectrum, cmd_sweep, cmd_verify_closed_form,
    SpectrumMode,
};
pub use config::{Format, RunConfig};
pub use report::{Record, Relation, Report};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Numeric(#[from] sphere_ineq::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl CliError {
    /// Process exit status: `1` for usage, configuration and I/O problems,
    /// `2` when a numerical routine itself fails.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Numeric(_) => 2,
            _ => 1,
        }
    }
}
