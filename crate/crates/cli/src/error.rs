use codclust_core::CodError;
use thiserror::Error;

/// Failures surfaced to the command line, each mapped to an exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, configs or input files (exit code 2).
    #[error("{0}")]
    Usage(String),
    /// The computation itself failed (exit code 3).
    #[error("numerical failure in {stage}: {source}")]
    Numerical {
        stage: String,
        #[source]
        source: CodError,
    },
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Numerical { .. } => 3,
        }
    }

    /// Wraps a library error raised while running `stage`. Precondition
    /// violations are usage errors; everything else is numerical.
    pub fn at(stage: &str) -> impl FnOnce(CodError) -> CliError + '_ {
        move |e| match e {
            CodError::Argument(msg) => CliError::Usage(format!("{stage}: {msg}")),
            other => CliError::Numerical {
                stage: stage.to_string(),
                source: other,
            },
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
