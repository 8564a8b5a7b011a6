use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed game file: {0}")]
    Parse(String),
    #[error("invalid game: {0}")]
    InvalidGame(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("matrix is singular")]
    Singular,
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("the empty normal set routes to the all-abnormal stationary construction")]
    EmptyNormalSet,
    #[error("LCP(R, 0) has a nontrivial solution; the stationary construction applies")]
    StationaryPathApplies,
    #[error("building block failed condition {condition}: {detail}")]
    BlockCheck { condition: String, detail: String },
    #[error("anchor sequence failed: {0}")]
    Sequence(String),
    #[error("verification did not pass after {attempts} attempts: {detail}")]
    Verification { attempts: usize, detail: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
