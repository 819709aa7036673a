use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("missing inputs; produce these first:\n{}", .0.iter().map(|s| format!("  - {s}")).collect::<Vec<_>>().join("\n"))]
    MissingInputs(Vec<String>),

    #[error("inputs come from different configurations: {0}")]
    MixedHashes(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("stage '{stage}' failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<CliError>,
    },

    #[error(transparent)]
    Core(#[from] gan_stability::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    /// 2 usage/config, 3 numeric failure, 4 internal invariant violation.
    pub fn exit_code(&self) -> i32 {
        use gan_stability::Error as E;
        match self {
            CliError::Stage { source, .. } => source.exit_code(),
            CliError::Core(E::NonFinite { .. }) => 3,
            CliError::Core(E::Budget { .. } | E::Shape { .. } | E::State(_)) => 4,
            _ => 2,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn in_stage(self, stage: &'static str) -> Self {
        CliError::Stage {
            stage,
            source: Box::new(self),
        }
    }
}
