use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GrlError {
    #[error("invalid environment `{env}`: {detail}")]
    InvalidEnvironment { env: String, detail: String },
    #[error("episode ended: the environment halted")]
    EpisodeEnded,
    #[error("bad catalog spec: {0}")]
    BadCatalogSpec(String),
    #[error("plan too deep: {depth} steps requested, cap is {cap}{}", achievable_hint(*.achievable_eps))]
    PlanTooDeep {
        depth: usize,
        cap: usize,
        achievable_eps: Option<f64>,
    },
    #[error("impossible percept under class at t={t}: mixture probability is 0")]
    Unrealizable { t: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("enumeration cap exceeded: {0}")]
    EnumerationCap(String),
}

fn achievable_hint(eps: Option<f64>) -> String {
    match eps {
        Some(e) => format!(" (achievable eps at this cap: {e:.3e})"),
        None => String::new(),
    }
}

pub type Result<T> = std::result::Result<T, GrlError>;
