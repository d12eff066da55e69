use thiserror::Error;

/// Errors produced anywhere in the AQKS pipeline.
#[derive(Debug, Error)]
pub enum AqksError {
    #[error("size error: {0}")]
    Size(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("numerical contract violated: {0}")]
    Numerical(String),

    #[error("shape mismatch in {context}: expected {expected}, found {found}")]
    Shape {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid configuration `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("training error: {0}")]
    Training(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("parse error in {field}: {message}")]
    Parse { field: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl AqksError {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        AqksError::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn parse(field: impl Into<String>, message: impl Into<String>) -> Self {
        AqksError::Parse {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn shape(context: &'static str, expected: usize, found: usize) -> Self {
        AqksError::Shape {
            context,
            expected,
            found,
        }
    }
}

pub type Result<T> = std::result::Result<T, AqksError>;
