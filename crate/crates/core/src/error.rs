use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not positive definite{}", context_suffix(.0))]
    NotPositiveDefinite(String),

    #[error("covariance is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("arm {arm} out of range for a {arms}-armed bandit")]
    ArmOutOfRange { arm: usize, arms: usize },

    #[error("invalid parameter `{name}`: {message}")]
    InvalidParameter { name: &'static str, message: String },

    #[error("outside the valid domain: {0}")]
    Domain(String),

    #[error("grid does not cover the {which} density: mass deficit {deficit:e}")]
    GridCoverage { which: &'static str, deficit: f64 },

    #[error("invalid partition: {0}")]
    Partition(String),

    #[error("construction undefined: {0}")]
    ConstructionUndefined(String),

    #[error("config field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("config parse error: {0}")]
    Toml(#[from] toml::de::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn context_suffix(context: &str) -> String {
    if context.is_empty() {
        String::new()
    } else {
        format!(" ({context})")
    }
}

impl Error {
    pub(crate) fn param(name: &'static str, message: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            message: message.into(),
        }
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    /// True for failures of the numerics themselves (factorization, coverage,
    /// undefined constructions) as opposed to bad input or configuration.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::NotPositiveDefinite(_)
                | Error::GridCoverage { .. }
                | Error::ConstructionUndefined(_)
        )
    }
}
