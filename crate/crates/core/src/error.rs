use thiserror::Error;

use crate::env::InstructionType;
use crate::feedback::FeedbackKind;
use crate::templates::TemplateError;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("unknown environment `{0}`")]
    UnknownEnv(String),
    #[error("environment `{env}` does not support instruction type `{kind}`")]
    UnsupportedInstructionType { env: String, kind: InstructionType },
    #[error("environment `{env}` does not support feedback type(s) {}", fmt_kinds(.kinds))]
    UnsupportedFeedbackType { env: String, kinds: Vec<FeedbackKind> },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("infeasible configuration: {0}")]
    InfeasibleConfig(String),
    #[error("step called before reset")]
    NotReset,
    #[error("episode is over; call reset")]
    EpisodeOver,
    #[error("input contains a non-finite value")]
    NonFiniteInput,
    #[error("no evaluation has been made yet")]
    NoEvaluationYet,
    #[error("failed to load assets: {0}")]
    Assets(String),
    #[error(transparent)]
    Template(#[from] TemplateError),
}

fn fmt_kinds(kinds: &[FeedbackKind]) -> String {
    kinds.iter().map(|k| k.code()).collect::<Vec<_>>().join(", ")
}

impl EnvError {
    /// Stable wire code used by the protocol server.
    pub fn code(&self) -> &'static str {
        match self {
            EnvError::UnknownEnv(_) => "unknown_env",
            EnvError::UnsupportedInstructionType { .. } => "unsupported_instruction",
            EnvError::UnsupportedFeedbackType { .. } => "unsupported_feedback",
            EnvError::InvalidConfig(_) | EnvError::InfeasibleConfig(_) => "invalid_config",
            EnvError::NotReset => "not_reset",
            EnvError::EpisodeOver => "episode_over",
            EnvError::NonFiniteInput
            | EnvError::NoEvaluationYet
            | EnvError::Assets(_)
            | EnvError::Template(_) => "internal",
        }
    }
}
