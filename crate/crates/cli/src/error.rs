use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("schema violation: {0}")]
    Schema(String),

    #[error(transparent)]
    Core(#[from] ddkf::Error),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    /// Machine-readable category reported on failure.
    pub fn category(&self) -> &'static str {
        match self {
            CliError::Io { .. } => "io",
            CliError::Schema(_) => "schema",
            CliError::Core(e) => e.category(),
        }
    }

    /// Process exit code; one per category.
    pub fn exit_code(&self) -> i32 {
        match self.category() {
            "io" => 3,
            "schema" => 4,
            "insufficient-data" => 5,
            "dimension-mismatch" => 6,
            "invalid-parameter" => 7,
            "numerical" => 8,
            _ => 1,
        }
    }

    pub fn report(&self) -> serde_json::Value {
        serde_json::json!({
            "error": {
                "category": self.category(),
                "message": self.to_string(),
            }
        })
    }
}
