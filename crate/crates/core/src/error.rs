use thiserror::Error;

/// Errors raised by the clustering library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CodError {
    /// An input violated a documented precondition.
    #[error("invalid argument: {0}")]
    Argument(String),
    /// A feature (fixed row/column position across samples) has zero variance.
    #[error("feature ({row}, {col}) has zero variance and cannot be standardized")]
    DegenerateFeature {
        /// 0-based row index of the feature.
        row: usize,
        /// 0-based column index of the feature.
        col: usize,
    },
    /// A generative model could not be built or sampled.
    #[error("model error: {0}")]
    Model(String),
}

impl CodError {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        CodError::Argument(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, CodError>;
