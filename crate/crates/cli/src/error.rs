use std::path::PathBuf;

use thiserror::Error;

/// One schema problem, located by its dotted key path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchemaIssue {
    pub path: String,
    pub message: String,
}

impl std::fmt::Display for SchemaIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage error: {0}")]
    Usage(String),
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("schema error: {}", join(.0))]
    Schema(Vec<SchemaIssue>),
    #[error("capacity error: {0}")]
    Capacity(String),
    #[error("computation error: {0}")]
    Compute(String),
    #[error("i/o error on {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

fn join(issues: &[SchemaIssue]) -> String {
    issues.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

impl CliError {
    pub fn schema(path: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Schema(vec![SchemaIssue { path: path.into(), message: message.into() }])
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    /// Solver failure while running a validated scenario.
    pub fn from_run(kind: &str, e: stgames_core::Error) -> Self {
        if e.is_capacity() {
            CliError::Capacity(format!("{kind}: {e}"))
        } else {
            CliError::Compute(format!("{kind}: {e}"))
        }
    }

    /// Core rejection while building objects from the config at `path`.
    pub fn from_build(path: &str, e: stgames_core::Error) -> Self {
        if e.is_capacity() {
            CliError::Capacity(format!("{path}: {e}"))
        } else {
            CliError::schema(path, e.to_string())
        }
    }

    /// 0 success, 1 usage or schema, 2 computation, 3 capacity.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Syntax { .. } | CliError::Schema(_) => 1,
            CliError::Compute(_) | CliError::Io { .. } => 2,
            CliError::Capacity(_) => 3,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
