//! Declarative scenario runner: TOML scenario in, deterministic JSON/CSV
//! reports out.

pub mod exact;
pub mod report;
pub mod run;
pub mod scenario;
pub mod schema;

pub use report::{emit_report, Format};
pub use run::{run_scenario, run_scenario_file, BlockResult, RunOptions, RunReport, Status};
pub use scenario::{GroupSpec, Scenario, VerifierSpec};

/// Exit code when every contract holds.
pub const EXIT_OK: i32 = 0;
/// Exit code on errors (parse, invalid scenario, runtime failure).
pub const EXIT_ERROR: i32 = 1;
/// Exit code when a verifier reports a contract violation.
pub const EXIT_VIOLATION: i32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid scenario at `{path}`: {message}")]
    Invalid { path: String, message: String },
    #[error("verifier[{index}] ({kind}): {source}")]
    Verifier {
        index: usize,
        kind: String,
        #[source]
        source: carnot_core::Error,
    },
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
