//! Error type shared across the pipeline.

use std::fmt;

#[derive(Debug)]
pub enum Error {
    /// Shape or size mismatch (filter larger than input, misaligned masks, ...).
    Dimension(String),
    /// Invalid configuration or argument value.
    Parameter(String),
    /// Operation invoked in the wrong order (e.g. backward before forward).
    State(String),
    /// Non-finite values where finite values are required.
    Numeric(String),
    /// A required region is empty (e.g. no AF pixels in a semantic map).
    EmptyRegion(String),
    /// Every ellipse candidate was filtered out.
    NoCandidates(String),
    /// An input record violates its invariants (e.g. non-unit direction).
    Input(String),
    /// Malformed file contents (PGM, manifest, weight file, config).
    Format(String),
    Io(std::io::Error),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Dimension(m) => write!(f, "dimension error: {m}"),
            Error::Parameter(m) => write!(f, "parameter error: {m}"),
            Error::State(m) => write!(f, "state error: {m}"),
            Error::Numeric(m) => write!(f, "numeric error: {m}"),
            Error::EmptyRegion(m) => write!(f, "empty region: {m}"),
            Error::NoCandidates(m) => write!(f, "no candidates: {m}"),
            Error::Input(m) => write!(f, "input error: {m}"),
            Error::Format(m) => write!(f, "format error: {m}"),
            Error::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(e) => Some(e),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e)
    }
}

pub type Result<T> = std::result::Result<T, Error>;
