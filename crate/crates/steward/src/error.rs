use thiserror::Error;

/// What went wrong with one steward during a fan-out.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StewardFailure {
    pub name: String,
    pub reason: String,
}

impl std::fmt::Display for StewardFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.name, self.reason)
    }
}

fn join(items: &[StewardFailure]) -> String {
    items
        .iter()
        .map(|f| f.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Debug, Error)]
pub enum StewardError {
    #[error("bad-config: {0}")]
    BadConfig(String),
    #[error("distribution-incomplete: {}", join(.failures))]
    DistributionIncomplete {
        recovery_id: String,
        failures: Vec<StewardFailure>,
    },
    #[error("quorum-failed: {have} of {need} valid shares; {}", join(.diagnostics))]
    QuorumFailed {
        have: usize,
        need: usize,
        diagnostics: Vec<StewardFailure>,
    },
    #[error("share conflict at x={0}")]
    Conflict(u8),
    #[error(transparent)]
    Core(#[from] biokey_core::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = StewardError> = std::result::Result<T, E>;
