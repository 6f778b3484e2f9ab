use thiserror::Error;

/// Configuration problems: malformed documents or violated parameter rules.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("malformed configuration: {0}")]
    Malformed(String),
    /// `rule` is the human-readable statement of the violated invariant.
    #[error("{rule}")]
    Invalid { rule: String },
}

impl ConfigError {
    pub(crate) fn invalid(rule: impl Into<String>) -> Self {
        ConfigError::Invalid { rule: rule.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericError {
    #[error("{what}: argument {value} outside the domain")]
    Domain { what: &'static str, value: f64 },
    #[error("{what} did not converge: {detail}")]
    NonConvergence { what: &'static str, detail: String },
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Numeric(#[from] NumericError),
    #[error("internal invariant breached: {0}")]
    Invariant(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
