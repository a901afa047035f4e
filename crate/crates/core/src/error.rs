use thiserror::Error;

/// Errors surfaced by the simulation library.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied parameter is out of range or inconsistent.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The sample has no usable largest-component proxy for the infinite
    /// cluster (e.g. an empty graph, or a giant fraction below the floor).
    #[error("subcritical sample: giant fraction {fraction:.4} below floor {floor:.4}")]
    Subcritical { fraction: f64, floor: f64 },

    /// Too many replicas of an experiment were discarded as subcritical.
    #[error("subcritical quota exceeded: {failed} of {total} replicas discarded (quota {quota:.0}%)")]
    SubcriticalQuota {
        failed: usize,
        total: usize,
        quota: f64,
    },

    /// The empirical jump kernel is undefined because the occupied set has
    /// no eligible neighbors; the chain halts here.
    #[error("no neighbors of the occupied set: the jump kernel is undefined")]
    NoNeighbor,

    /// An internal consistency check failed (negative weight, broken bound).
    #[error("integrity violation: {0}")]
    Integrity(String),

    /// Requested output is only available in two dimensions.
    #[error("unsupported dimension {0}: this output is 2-d only")]
    UnsupportedDimension(usize),

    /// Configuration file could not be parsed or validated.
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code used by the CLI: 2 config, 3 subcritical quota,
    /// 4 I/O, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidParameter(_) => 2,
            Error::SubcriticalQuota { .. } => 3,
            Error::Io(_) => 4,
            _ => 1,
        }
    }
}
