use std::path::PathBuf;

use sci_core::SciError;

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("invalid configuration: {0}")]
    Validation(String),
    #[error(transparent)]
    Core(#[from] SciError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("dataset {0} contains no scenes")]
    EmptyDataset(PathBuf),
}

pub type AppResult<T> = Result<T, AppError>;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

impl AppError {
    pub fn validation(msg: impl Into<String>) -> Self {
        AppError::Validation(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        AppError::Io { path: path.into(), source }
    }

    /// Bad inputs map to 2; failures while reading or computing map to 3.
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Validation(_) => EXIT_VALIDATION,
            AppError::Core(e) => match e {
                SciError::ShapeMismatch(_)
                | SciError::NonPositiveGamma(_)
                | SciError::GammaOutOfRange(_)
                | SciError::OutOfAlphabet(_)
                | SciError::TooLarge { .. }
                | SciError::CropOutOfBounds { .. }
                | SciError::InvalidConfig(_)
                | SciError::WeightShapeMismatch(_) => EXIT_VALIDATION,
                _ => EXIT_RUNTIME,
            },
            AppError::Io { .. } | AppError::Format { .. } | AppError::EmptyDataset(_) => EXIT_RUNTIME,
        }
    }
}
