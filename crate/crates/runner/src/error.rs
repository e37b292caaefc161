use grl_core::GrlError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("config error: {0}")]
    Config(String),
    #[error("runtime cap reached: {0}")]
    Cap(GrlError),
    #[error("internal invariant violated: {0}")]
    Invariant(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl RunError {
    pub fn exit_code(&self) -> u8 {
        match self {
            RunError::Config(_) => 2,
            RunError::Cap(_) => 3,
            RunError::Invariant(_) => 4,
            RunError::Io(_) => 1,
        }
    }

    /// Short tag recorded in summaries.
    pub fn tag(&self) -> &'static str {
        match self {
            RunError::Config(_) => "config",
            RunError::Cap(_) => "runtime_cap",
            RunError::Invariant(_) => "invariant",
            RunError::Io(_) => "io",
        }
    }
}

/// Classifies a core error raised while an experiment is running.
impl From<GrlError> for RunError {
    fn from(e: GrlError) -> Self {
        match e {
            GrlError::PlanTooDeep { .. } | GrlError::EnumerationCap(_) => RunError::Cap(e),
            other => RunError::Invariant(other.to_string()),
        }
    }
}
