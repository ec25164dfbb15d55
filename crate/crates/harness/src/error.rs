use std::path::PathBuf;

use serde::Serialize;
use serde_json::{json, Value};

/// One offending key in a config file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SchemaIssue {
    pub path: String,
    pub message: String,
}

impl std::fmt::Display for SchemaIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "`{}`: {}", self.path, self.message)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot parse config: {0}")]
    Parse(String),

    #[error("config has {} schema violation(s): {}", .0.len(), join(.0))]
    Schema(Vec<SchemaIssue>),

    #[error("sweep expands to {runs} runs, above the cap of {cap} (raise `max_runs` to allow it)")]
    TooManyRuns { runs: usize, cap: usize },

    #[error("run {run} failed: {source}")]
    Run {
        run: String,
        #[source]
        source: jaguar_core::Error,
    },

    #[error(transparent)]
    Core(#[from] jaguar_core::Error),

    #[error("{0}")]
    Csv(#[from] csv::Error),

    #[error("report: {0}")]
    Report(String),

    #[error("unknown {what} `{name}`; expected one of: {}", .known.join(", "))]
    Unknown {
        what: &'static str,
        name: String,
        known: Vec<String>,
    },
}

fn join(issues: &[SchemaIssue]) -> String {
    issues
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

impl HarnessError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.into(),
            source,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            HarnessError::Io { .. } => "io",
            HarnessError::Parse(_) => "parse",
            HarnessError::Schema(_) => "schema",
            HarnessError::TooManyRuns { .. } => "too-many-runs",
            HarnessError::Run { .. } => "run",
            HarnessError::Core(_) => "core",
            HarnessError::Csv(_) => "csv",
            HarnessError::Report(_) => "report",
            HarnessError::Unknown { .. } => "unknown-name",
        }
    }

    /// Machine-readable form printed by the CLI on failure.
    pub fn to_json(&self) -> Value {
        let mut report = json!({
            "kind": self.kind(),
            "message": self.to_string(),
        });
        match self {
            HarnessError::Schema(issues) => report["issues"] = json!(issues),
            HarnessError::Run { run, source } => {
                report["run"] = json!(run);
                if let jaguar_core::Error::Step { iteration, source } = source {
                    report["iteration"] = json!(iteration);
                    report["cause"] = json!(source.to_string());
                }
            }
            _ => {}
        }
        json!({ "error": report })
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
