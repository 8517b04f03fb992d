use std::path::PathBuf;

use gwb_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    /// Bad user input: flags, config fields or file contents.
    #[error("invalid {field}: {message}")]
    Validation { field: String, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: parse error at row {row}, column {column}: {message}")]
    Parse {
        path: PathBuf,
        row: usize,
        column: String,
        message: String,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("{context}: {source}")]
    Core {
        context: String,
        #[source]
        source: CoreError,
    },
}

impl AppError {
    pub fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        AppError::Validation {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn core(context: impl Into<String>, source: CoreError) -> Self {
        AppError::Core {
            context: context.into(),
            source,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        AppError::Io {
            path: path.into(),
            source,
        }
    }

    /// 2 for anything the user can fix in their input, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Validation { .. } | AppError::Parse { .. } | AppError::Json { .. } => 2,
            AppError::Core { source, .. } if is_input_error(source) => 2,
            _ => 1,
        }
    }
}

fn is_input_error(e: &CoreError) -> bool {
    matches!(
        e,
        CoreError::NotSymmetric { .. }
            | CoreError::NotSquare { .. }
            | CoreError::NonFinite(_)
            | CoreError::DimensionMismatch { .. }
            | CoreError::NegativeLambda(_)
            | CoreError::OutOfRange { .. }
            | CoreError::EmptyViewRow { .. }
            | CoreError::NonPsdViewCovariance
            | CoreError::SingularViewCovariance
            | CoreError::NonPsdPrior
            | CoreError::TargetMismatch
            | CoreError::NotPositiveDefinite(_)
            | CoreError::NegativeEigenvalueBeyondTolerance { .. }
    )
}

pub type Result<T, E = AppError> = std::result::Result<T, E>;
