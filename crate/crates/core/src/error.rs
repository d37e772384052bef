use std::fmt;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Phase of a two-party session, reported alongside transport failures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Setup,
    Handshake,
    Projections,
    Variance,
    NoiseParams,
    End,
    Compute,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Phase::Setup => "setup",
            Phase::Handshake => "handshake",
            Phase::Projections => "projections",
            Phase::Variance => "variance",
            Phase::NoiseParams => "noise-params",
            Phase::End => "end",
            Phase::Compute => "compute",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
#[non_exhaustive]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("sample size {n} is too small (need at least {min})")]
    SampleSize { n: usize, min: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate metric: all pairwise distances are zero")]
    DegenerateMetric,

    #[error("privacy budget error: {0}")]
    Budget(String),

    #[error("cannot partition {n} rows into {k} blocks of at least 4 rows")]
    Partition { n: usize, k: usize },

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("handshake error: {0}")]
    Handshake(String),

    #[error("decode error: {0}")]
    Decode(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("session failed after phase {phase}: {source}")]
    Session {
        phase: Phase,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn session(phase: Phase, source: Error) -> Self {
        match source {
            // keep the innermost phase
            e @ Error::Session { .. } => e,
            other => Error::Session {
                phase,
                source: Box::new(other),
            },
        }
    }
}
