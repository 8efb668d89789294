//! Harness library behind the `seqtest` binary: config resolution, CSV
//! stream I/O, single-stream analysis, Monte Carlo simulation with
//! rejection-time CDFs, and grid confidence sequences.

pub mod config;
pub mod csrun;
pub mod run;
pub mod simulate;
pub mod stream;

use thiserror::Error;

/// Harness-level errors. Parse and config problems map to exit code 2.
#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] seqtest::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl HarnessError {
    /// Process exit code: 2 for parse/config errors, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Parse { .. } | HarnessError::Config(_) => 2,
            HarnessError::Core(seqtest::Error::OutOfRange { .. }) => 2,
            _ => 1,
        }
    }
}

/// Round-trip-exact float formatting used in every CSV the harness emits
/// (17 significant digits).
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}
