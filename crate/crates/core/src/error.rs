use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Broad failure class, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numerical,
}

#[derive(Error, Debug)]
pub enum Error {
    // PGM parsing
    #[error("malformed PGM header at byte {offset}: {reason}")]
    MalformedHeader { offset: usize, reason: String },
    #[error("truncated PGM pixel data at byte {offset}: expected {expected} more bytes")]
    TruncatedData { offset: usize, expected: usize },
    #[error("unsupported PGM magic number at byte {offset}: {magic:?}")]
    UnsupportedMagic { offset: usize, magic: String },

    #[error("image too small for scale space: {width}x{height} (need at least 16x16)")]
    ImageTooSmall { width: usize, height: usize },

    // descriptor import
    #[error("line {line}: expected 132 fields (4 frame + 128 descriptor), found {found}")]
    FieldCount { line: usize, found: usize },
    #[error("line {line}: non-numeric token {token:?}")]
    BadToken { line: usize, token: String },

    #[error("descriptor pool is empty")]
    EmptyPool,
    #[error("pool has {rows} rows but {requested} centroids were requested")]
    TooFewRows { rows: usize, requested: usize },
    #[error("only {distinct} distinct rows available for {requested} centroids")]
    TooFewDistinct { distinct: usize, requested: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("local Gram system is singular after regularization")]
    SingularSystem,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("training data must contain both classes")]
    SingleClass,
    #[error("class {class} is missing from the training labels")]
    MissingClass { class: usize },
    #[error("component {component} has fewer than 2 points on one side")]
    DegeneratePair { component: String },
    #[error("SMO did not converge after {iterations} iterations (KKT violation {violation:.3e})")]
    NonConvergence { iterations: usize, violation: f64 },
    #[error("every tuning grid point failed")]
    AllGridPointsDegenerate,
    #[error("max voting requires a pairwise conditional table")]
    MissingPairwiseTable,

    #[error("empty record set")]
    EmptyRecords,

    #[error("incompatible artifact: {0}")]
    Incompatible(String),
    #[error("bad artifact {what}: {reason}")]
    BadArtifact { what: String, reason: String },

    #[error("configuration error: {0}")]
    Config(String),
    #[error("stage {stage} failed on {input}: {source}")]
    Stage {
        stage: String,
        input: String,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) | Error::InvalidParameter(_) => ErrorKind::Config,
            Error::SingularSystem
            | Error::NonConvergence { .. }
            | Error::AllGridPointsDegenerate
            | Error::TooFewDistinct { .. } => ErrorKind::Numerical,
            Error::Stage { source, .. } => source.kind(),
            _ => ErrorKind::Data,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_stage(self, stage: &str, input: impl Into<String>) -> Self {
        match self {
            e @ Error::Stage { .. } => e,
            e => Error::Stage {
                stage: stage.to_string(),
                input: input.into(),
                source: Box::new(e),
            },
        }
    }

    pub(crate) fn artifact(what: &str, reason: impl Into<String>) -> Self {
        Error::BadArtifact {
            what: what.to_string(),
            reason: reason.into(),
        }
    }
}
