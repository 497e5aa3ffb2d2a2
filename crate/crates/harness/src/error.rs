use thiserror::Error;

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("internal error: {0}")]
    Internal(String),

    #[error(transparent)]
    Core(#[from] copcs_core::Error),

    #[error(transparent)]
    Neural(#[from] copcs_neural::NeuralError),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl HarnessError {
    /// Whether the failure traces back to the caller's input rather than to this program.
    pub fn is_user_error(&self) -> bool {
        use copcs_core::Error as C;
        use copcs_neural::NeuralError as N;
        match self {
            HarnessError::Config(_) => true,
            HarnessError::Internal(_) | HarnessError::Csv(_) => false,
            HarnessError::Io(e) => matches!(e.kind(), std::io::ErrorKind::NotFound | std::io::ErrorKind::PermissionDenied),
            HarnessError::Core(e) => !matches!(e, C::Io(_) | C::Csv(_)),
            HarnessError::Neural(e) => matches!(e, N::Config(_) | N::Checkpoint(_) | N::Json(_) | N::FeatureWidth { .. } | N::Core(_)),
        }
    }
}
