use std::path::PathBuf;

use ccdsim_core::Error as CoreError;

/// Exit status for a failed command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitKind {
    Validation = 1,
    Divergence = 2,
    Io = 3,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// A configuration field failed validation. `field` is `section.key`.
    #[error("invalid configuration: `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("cannot parse {path}: {message}")]
    ConfigSyntax { path: PathBuf, message: String },

    #[error(transparent)]
    Core(#[from] CoreError),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{source_name}, line {line}: {message}")]
    Parse {
        source_name: String,
        line: u64,
        message: String,
    },

    #[error("{source_name}, line {line}: unknown label `{label}`")]
    Label {
        source_name: String,
        line: u64,
        label: String,
    },

    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

impl CliError {
    pub fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        CliError::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_kind(&self) -> ExitKind {
        match self {
            CliError::Io { .. } => ExitKind::Io,
            CliError::Core(CoreError::Divergence { .. }) => ExitKind::Divergence,
            _ => ExitKind::Validation,
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
