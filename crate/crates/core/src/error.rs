use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported glyph {0:?}")]
    UnsupportedGlyph(char),
    #[error("canvas too small for N={n_max}: {detail}")]
    CanvasTooSmall { n_max: u32, detail: String },
    #[error("invalid render config: {0}")]
    InvalidRenderConfig(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("label {label} out of range 0..={max}")]
    LabelOutOfRange { label: u32, max: u32 },
    #[error("key ({n},{m}) outside [0,{n_max}]^2")]
    KeyOutOfRange { n: u32, m: u32, n_max: u32 },

    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: String, found: String },
    #[error("version mismatch: expected {expected}, found {found}")]
    VersionMismatch { expected: u16, found: u16 },
    #[error("truncated at record {record}")]
    TruncatedRecord { record: usize },
    #[error("truncated: {0}")]
    Truncated(String),
    #[error("checksum mismatch: stored {stored:08x}, computed {computed:08x}")]
    ChecksumMismatch { stored: u32, computed: u32 },
    #[error("malformed file: {0}")]
    Malformed(String),

    #[error("infeasible split: {0}")]
    InfeasibleSplit(String),
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error("schema mismatch: expected version {expected}, found {found}")]
    SchemaMismatch { expected: u32, found: u32 },
    #[error("duplicate key ({n},{m})")]
    DuplicateKey { n: u32, m: u32 },
    #[error("incomplete cover: {missing} key(s) missing, first ({n},{m})")]
    IncompleteCover { missing: usize, n: u32, m: u32 },

    #[error("invalid network spec at layer {layer}: {detail}")]
    InvalidSpec { layer: usize, detail: String },
    #[error("shape mismatch at layer {layer}: {detail}")]
    ShapeMismatch { layer: usize, detail: String },
    #[error("stale cache: {0}")]
    StaleCache(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("training diverged at epoch {epoch}, batch {batch}: loss {loss}")]
    Diverged { epoch: usize, batch: usize, loss: f64 },
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("checkpoint/set mismatch: {0}")]
    SetMismatch(String),
    #[error("empty key set")]
    EmptyKeySet,
    #[error("inconsistent trials: {0}")]
    InconsistentTrials(String),
    #[error("coverage mismatch: {0}")]
    CoverageMismatch(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
