use thiserror::Error;

/// Errors raised anywhere in the laboratory.
///
/// Variants map onto the CLI exit-code contract through [`Error::exit_code`].
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("data error: field `{field}` is not finite at node {node}")]
    NonFinite { field: String, node: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate ball: no mesh node within {radius} of the requested center")]
    DegenerateBall { radius: f64 },

    #[error("resource error: {0}")]
    Resource(String),

    #[error("range error: overflow at node {node}")]
    Overflow { node: usize },

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("no roots: lambda = {lambda} is not below lambda3 = {lambda3}")]
    NoRoots { lambda: f64, lambda3: f64 },

    #[error("configuration error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("resolution error: bubble radius {eps} is below four mesh spacings ({min})")]
    Resolution { eps: f64, min: f64 },

    #[error("verification error: {0}")]
    Verification(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("shape mismatch: expected {expected} values, found {found}")]
    Shape { expected: usize, found: usize },

    #[error("i/o error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config { key: key.into(), message: message.into() }
    }

    /// 0 success, 1 property/assertion failure, 2 configuration error, 3 numeric error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Verification(_) => 1,
            Error::Config { .. } | Error::Usage(_) | Error::Parse(_) | Error::Io(_) => 2,
            Error::Domain(_) | Error::NonFinite { .. } | Error::Shape { .. } => 2,
            Error::Resolution { .. } | Error::DegenerateBall { .. } | Error::Resource(_) => 2,
            Error::Overflow { .. } | Error::Numeric(_) | Error::NoRoots { .. } => 3,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
