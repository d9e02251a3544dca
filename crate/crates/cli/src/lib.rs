//! Command-line harness around `tpm-core`: instance generation, decomposition
//! runs, landscape sweeps, restart planning and self-tests.
//!
//! Every output is a pure function of the configuration and seed.

use std::ffi::OsString;
use std::fmt;
use std::io::Write;

use clap::Parser;
use tpm_core::TpmError;

mod commands;
pub mod config;

pub use commands::{Cli, Command};
pub use config::{ExperimentConfig, ModelChoice};

pub const SUCCESS: u8 = 0;
pub const INVARIANT_FAILURE: u8 = 1;
pub const EXTRACTION_FAILURE: u8 = 2;
pub const PLANNING_INFEASIBLE: u8 = 3;
pub const BAD_INPUT: u8 = 4;

/// An error together with the exit code it maps to.
#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<TpmError> for Failure {
    fn from(e: TpmError) -> Self {
        let code = match e {
            TpmError::ExtractionFailure { .. } | TpmError::DegenerateIterate { .. } => EXTRACTION_FAILURE,
            TpmError::NoFeasibleRestarts { .. } => PLANNING_INFEASIBLE,
            TpmError::StalledDescent { .. } => INVARIANT_FAILURE,
            _ => BAD_INPUT,
        };
        Self::new(code, e.to_string())
    }
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { BAD_INPUT } else { SUCCESS };
            let rendered = e.render().to_string();
            let sink: &mut dyn Write = if e.use_stderr() { stderr } else { stdout };
            let _ = sink.write_all(rendered.as_bytes());
            return code;
        }
    };
    match commands::execute(cli, stdout, stderr) {
        Ok(code) => code,
        Err(failure) => {
            let _ = writeln!(stderr, "error: {failure}");
            failure.code
        }
    }
}
