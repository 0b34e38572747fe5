use biokey_core::Error as CoreError;
use biokey_steward::StewardError;
use thiserror::Error;

/// Every failure maps to one process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    /// The fingerprint did not unlock the vault.
    #[error("{0}")]
    NoMatch(String),
    /// Shares could not be stored or collected.
    #[error("{0}")]
    Recovery(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::NoMatch(_) => 2,
            CliError::Recovery(_) => 3,
            CliError::Io(_) => 4,
        }
    }

    pub fn io(context: impl std::fmt::Display, e: impl std::fmt::Display) -> Self {
        CliError::Io(format!("io: {context}: {e}"))
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            // the matcher could not rebuild a hash the verifier accepts
            CoreError::NoMatch | CoreError::RecoveryFailed => CliError::NoMatch("no-match".into()),
            CoreError::DecryptFailed
            | CoreError::InsufficientMinutiae { .. }
            | CoreError::WeakTemplate { .. } => CliError::NoMatch(e.to_string()),
            CoreError::BelowThreshold { .. }
            | CoreError::CorruptShare(_)
            | CoreError::MixedSets
            | CoreError::InsufficientShards { .. } => CliError::Recovery(e.to_string()),
            CoreError::Format(_) => CliError::Io(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<biokey_fingerprint::Error> for CliError {
    fn from(e: biokey_fingerprint::Error) -> Self {
        use biokey_fingerprint::Error as F;
        match e {
            F::ImageTooSmall { .. } | F::UnusableImage { .. } => CliError::NoMatch(e.to_string()),
            F::Decode(_) | F::Image(_) => CliError::Io(e.to_string()),
            F::Template(inner) => inner.into(),
            F::Config(_) => CliError::Usage(e.to_string()),
        }
    }
}

impl From<StewardError> for CliError {
    fn from(e: StewardError) -> Self {
        match e {
            StewardError::BadConfig(_) => CliError::Usage(e.to_string()),
            StewardError::Core(inner) => match CliError::from(inner) {
                CliError::Usage(m) => CliError::Recovery(m),
                other => other,
            },
            StewardError::Io(_) => CliError::Io(e.to_string()),
            _ => CliError::Recovery(e.to_string()),
        }
    }
}
