use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("no root: {0}")]
    NoRoot(String),
    #[error("under-resolved: {0}")]
    Resolution(String),
    #[error("pole of the gamma function at {0}")]
    Pole(String),
    #[error("degenerate matching (condition {0:.3e})")]
    DegenerateMatching(f64),
    #[error("partition of unity violated by {0:.3e}")]
    Partition(f64),
    #[error("step control failed: {0}")]
    Stiffness(String),
    #[error("singular matrix at pivot {0}")]
    Singular(usize),
    #[error("did not converge: {0}")]
    Convergence(String),
    #[error("insufficient decay: E(T)/E(0) = {0:.3}")]
    InsufficientDecay(f64),
    #[error("empty window")]
    EmptyWindow,
    #[error("invalid config: {0}")]
    Config(String),
    #[error("missing artifact: {0}")]
    MissingArtifact(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
