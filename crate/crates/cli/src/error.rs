use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

/// Pipeline stage, used to tag diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Load,
    Split,
    Train,
    Errors,
    Detect,
    Test,
    Evaluate,
    Report,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Load => "load",
            Stage::Split => "split",
            Stage::Train => "train",
            Stage::Errors => "errors",
            Stage::Detect => "detect",
            Stage::Test => "test",
            Stage::Evaluate => "evaluate",
            Stage::Report => "report",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),

    #[error("[{stage}] {source}")]
    Core {
        stage: Stage,
        #[source]
        source: lstm_evt_core::Error,
    },

    #[error("[{stage}] {message}")]
    Data { stage: Stage, message: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("{}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Core { source, .. } if source.is_numerical() => 3,
            _ => 2,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

/// Attaches a stage to core results.
pub trait AtStage<T> {
    fn at(self, stage: Stage) -> Result<T, CliError>;
}

impl<T> AtStage<T> for lstm_evt_core::Result<T> {
    fn at(self, stage: Stage) -> Result<T, CliError> {
        self.map_err(|source| CliError::Core { stage, source })
    }
}
