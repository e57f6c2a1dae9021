use std::path::PathBuf;

use thiserror::Error;

use crate::data::Group;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("too few users in {group} group: need at least {needed}, found {found}")]
    TooFewUsers {
        group: Group,
        needed: usize,
        found: usize,
    },

    #[error("no interactions")]
    NoInteractions,

    #[error("user {user} has no interactions")]
    EmptyUser { user: usize },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("unknown user `{id}` in {path}")]
    UnknownUser { id: String, path: PathBuf },

    #[error("user `{id}` has no demographic label")]
    MissingLabel { id: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("non-positive sample {0}")]
    NonPositiveSample(f64),

    #[error("degenerate sample")]
    DegenerateSample,

    #[error("user {user} has an empty candidate set")]
    EmptyCandidates { user: usize },

    #[error("need {needed} eligible items, only {available} available")]
    InsufficientItems { needed: usize, available: usize },

    #[error("diverged at epoch {epoch}: loss {loss}")]
    Diverged { epoch: usize, loss: f64 },

    #[error("both classes must be present (positives {positives}, negatives {negatives})")]
    SingleClass { positives: usize, negatives: usize },

    #[error("no item was recommended to at least {min_count} users")]
    NoQualifyingItems { min_count: usize },

    #[error("duplicate item {item} in ranked list")]
    DuplicateItem { item: u32 },

    #[error("empty group {0}")]
    EmptyGroup(Group),

    #[error("logistic probe did not converge after {iterations} iterations (gradient norm {grad_norm:e})")]
    NonConvergence { iterations: usize, grad_norm: f64 },

    #[error("unsupported format: {0}")]
    Format(String),

    #[error("config: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short stable identifier written into error rows of sweep reports.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid-argument",
            Error::TooFewUsers { .. } => "too-few-users",
            Error::NoInteractions => "no-interactions",
            Error::EmptyUser { .. } => "empty-user",
            Error::Parse { .. } => "parse",
            Error::UnknownUser { .. } => "unknown-user",
            Error::MissingLabel { .. } => "missing-label",
            Error::Io { .. } => "io",
            Error::NonPositiveSample(_) => "non-positive-sample",
            Error::DegenerateSample => "degenerate-sample",
            Error::EmptyCandidates { .. } => "empty-candidates",
            Error::InsufficientItems { .. } => "insufficient-items",
            Error::Diverged { .. } => "diverged",
            Error::SingleClass { .. } => "single-class",
            Error::NoQualifyingItems { .. } => "no-qualifying-items",
            Error::DuplicateItem { .. } => "duplicate-item",
            Error::EmptyGroup(_) => "empty-group",
            Error::NonConvergence { .. } => "non-convergence",
            Error::Format(_) => "format",
            Error::Config(_) => "config",
        }
    }
}
