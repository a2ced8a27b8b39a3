use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown wavelet `{0}`")]
    UnknownWavelet(String),
    #[error("filter length {0} is odd; QMF derivation needs an even length")]
    OddFilterLength(usize),
    #[error("filter lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("invalid extent {extent}: {reason}")]
    InvalidExtent { extent: usize, reason: &'static str },
    #[error("input contains NaN or infinite values")]
    NonFiniteInput,
    #[error("band shapes are inconsistent: {0}")]
    BandShapeMismatch(String),
    #[error("multiply-add count is not integral for M={m}, N={n}")]
    NonIntegralResult { m: u64, n: u64 },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("soft-shrink threshold must be non-negative, got {0}")]
    NegativeLambda(f64),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("training diverged at epoch {epoch}, batch {batch}: loss = {loss}")]
    DivergedLoss { epoch: usize, batch: usize, loss: f64 },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("pre-activation margin {margin:e} at node {node} is below {required:e}")]
    KinkProximity { node: usize, margin: f64, required: f64 },
    #[error("input values must lie in [0, 1]")]
    OutOfRangeInput,
    #[error("baseline error sum is zero")]
    ZeroBaseline,
    #[error("malformed image header: {0}")]
    MalformedHeader(String),
    #[error("unsupported maxval {0} (only 255 is supported)")]
    UnsupportedMaxval(u32),
    #[error("payload truncated: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: usize, found: usize },
    #[error("bad magic {0:?}")]
    BadMagic([u8; 4]),
    #[error("unsupported container version {0}")]
    UnsupportedVersion(u8),
    #[error("duplicate record name `{0}`")]
    DuplicateName(String),
    #[error("wavelet file line {line}: {msg}")]
    WaveletFile { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
