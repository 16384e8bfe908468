use alloc::string::String;

/// Errors reported by the laboratory.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("point outside the evaluator domain: {0}")]
    OutOfDomain(String),
    #[error("capability missing: {0}")]
    Capability(String),
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("generator universe mismatch")]
    UniverseMismatch,
    #[error("rank mismatch: {0} vs {1}")]
    RankMismatch(usize, usize),
    #[error("singular point: {0}")]
    Singular(String),
    #[error("point outside the transformed image: {0}")]
    OutsideImage(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
}

pub type Result<T> = core::result::Result<T, Error>;
