use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid game: {0}")]
    InvalidGame(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("root finding failed: {0}")]
    RootFinding(String),

    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),

    #[error("descent sequence did not terminate within {0} iterations")]
    NonTermination(usize),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("trajectory not absorbed after {0} periods")]
    NotAbsorbed(u64),

    #[error("state space too large: more than {cap} states")]
    StateSpaceTooLarge { cap: usize },

    #[error("root {0} unreachable: some node has no finite path to it")]
    RootUnreachable(usize),

    #[error("no aggregate-taking strategy on the strategy grid")]
    NoAts,

    #[error("Nash strategy not unique: best-response iteration ended at {0:?}")]
    NashNotUnique(Vec<usize>),

    #[error("analysis discrepancy: {0}")]
    Discrepancy(String),

    #[error("analysis unsound: {0}")]
    Unsound(String),
}

pub type Result<T> = std::result::Result<T, Error>;
