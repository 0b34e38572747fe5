use thiserror::Error;

/// Errors produced by the key-management pipeline.
///
/// The `Display` strings are stable identifiers; the CLI and the steward
/// service surface them verbatim.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("division-by-zero")]
    DivisionByZero,
    #[error("field-exhausted: {0} shards exceed the 256 evaluation points of GF(256)")]
    FieldExhausted(usize),
    #[error("insufficient-shards: have {have}, need {need}")]
    InsufficientShards { have: usize, need: usize },
    #[error("bad-shards: {0}")]
    BadShards(&'static str),
    #[error("recovery-failed")]
    RecoveryFailed,
    #[error("grid-too-small: {0} blocks, need at least 4")]
    GridTooSmall(usize),
    #[error("insufficient-minutiae: have {have}, need {need}")]
    InsufficientMinutiae { have: usize, need: usize },
    #[error("weak-template: {public} of {blocks} blocks are recoverable from stored parity alone")]
    WeakTemplate { public: usize, blocks: usize },
    #[error("block-claim-mismatch: block {claimed} maps to {maps_to}, point is in {target}")]
    BlockClaimMismatch {
        claimed: usize,
        maps_to: usize,
        target: usize,
    },
    #[error("no-match")]
    NoMatch,
    #[error("decrypt-failed")]
    DecryptFailed,
    #[error("bad-key")]
    BadKey,
    #[error("bad-params: {0}")]
    BadParams(String),
    #[error("below-threshold: have {have}, need {need}")]
    BelowThreshold { have: usize, need: usize },
    #[error("corrupt-share: x={0}")]
    CorruptShare(u8),
    #[error("mixed-sets")]
    MixedSets,
    #[error("placement-failed")]
    PlacementFailed,
    #[error("bad-format: {0}")]
    Format(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}
