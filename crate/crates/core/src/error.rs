use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed image: {0}")]
    MalformedImage(String),

    #[error("mask is empty")]
    EmptyMask,

    #[error("region is empty")]
    EmptyRegion,

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: String, right: String },

    #[error("image is too small for this operation ({width}x{height})")]
    TooSmall { width: u32, height: u32 },

    #[error("zero-length edge at vertex {0}")]
    ZeroLengthEdge(usize),

    #[error("bounding box has zero area")]
    DegenerateBox,

    #[error("vector is already normalized")]
    AlreadyNormalized,

    #[error("vector is not normalized")]
    UnnormalizedVector,

    #[error("channel {0} is identically zero")]
    ZeroChannel(usize),

    #[error("degenerate statistics in channel {0}")]
    DegenerateStatistics(usize),

    #[error("zero vector")]
    ZeroVector,

    #[error("both vectors are all zero")]
    BothZero,

    #[error("negative input to jaccard at element {0}")]
    NegativeInput(usize),

    #[error("mixed payload kinds in one store")]
    MixedKinds,

    #[error("kind mismatch: expected {expected}, found {found}")]
    KindMismatch { expected: String, found: String },

    #[error("unknown metric {0:?}")]
    UnknownMetric(String),

    #[error("unknown feature kind {0:?}")]
    UnknownFeature(String),

    #[error("class has no queries")]
    EmptyClass,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("store format mismatch: {0}")]
    FormatVersionMismatch(String),

    #[error("checksum mismatch: manifest {expected}, data {found}")]
    ChecksumMismatch { expected: String, found: String },

    #[error("malformed store data: {0}")]
    MalformedStore(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn dims(left: impl ToString, right: impl ToString) -> Self {
        Error::DimensionMismatch {
            left: left.to_string(),
            right: right.to_string(),
        }
    }
}
