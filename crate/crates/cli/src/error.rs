use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid value for {flag}: {msg}")]
    Param { flag: String, msg: String },
    #[error("assertion failed: {0}")]
    Assertion(String),
    #[error("{stage}: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<CliError>,
    },
    #[error("cannot write {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] eklab::Error),
}

impl CliError {
    pub fn param(flag: &str, msg: impl Into<String>) -> Self {
        CliError::Param {
            flag: format!("--{flag}"),
            msg: msg.into(),
        }
    }

    pub fn env(var: &str, msg: impl Into<String>) -> Self {
        CliError::Param {
            flag: var.to_string(),
            msg: msg.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn in_stage(self, stage: impl Into<String>) -> Self {
        CliError::Stage {
            stage: stage.into(),
            source: Box::new(self),
        }
    }

    /// 2 for bad input, 1 for everything that is the tool's fault.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Param { .. } => 2,
            CliError::Stage { source, .. } => source.exit_code(),
            CliError::Core(e) => match e {
                eklab::Error::Parameter { .. } | eklab::Error::Domain(_) => 2,
                _ => 1,
            },
            CliError::Assertion(_) | CliError::Io { .. } => 1,
        }
    }

    /// Core parameter errors are re-labelled with the flag spelling.
    pub fn normalize(self) -> Self {
        match self {
            CliError::Core(eklab::Error::Parameter { param, msg }) => CliError::param(&param.replace('_', "-"), msg),
            CliError::Core(eklab::Error::Assertion(msg)) => CliError::Assertion(msg),
            CliError::Stage { stage, source } => CliError::Stage {
                stage,
                source: Box::new(source.normalize()),
            },
            other => other,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
