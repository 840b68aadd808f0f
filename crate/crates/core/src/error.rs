use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("numeric overflow: {0}")]
    NumericOverflow(String),

    #[error("inner iteration did not converge (residual {residual:.3e} after {iterations} iterations)")]
    InnerNonconvergence { residual: f64, iterations: usize },

    #[error("implicit step {step} failed: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("outer iteration did not converge after {iterations} iterations (last residual {residual:.3e})")]
    OuterNonconvergence {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    #[error("hypothesis not satisfied: {0}")]
    Hypothesis(String),

    #[error("stage {label} failed: {source}")]
    Stage {
        label: String,
        #[source]
        source: Box<Error>,
    },

    #[error("config parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid config field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Parameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn stage(label: impl Into<String>, source: Error) -> Self {
        Error::Stage {
            label: label.into(),
            source: Box::new(source),
        }
    }

    /// Short machine-readable tag used in failure documents.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Dimension { .. } => "dimension",
            Error::Parameter { .. } => "parameter",
            Error::Domain(_) => "domain",
            Error::NumericOverflow(_) => "numeric_overflow",
            Error::InnerNonconvergence { .. } => "inner_nonconvergence",
            Error::Step { source, .. } | Error::Stage { source, .. } => source.kind(),
            Error::OuterNonconvergence { .. } => "outer_nonconvergence",
            Error::Hypothesis(_) => "hypothesis",
            Error::Parse { .. } => "parse",
            Error::Config { .. } => "config",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}
