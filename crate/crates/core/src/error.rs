use thiserror::Error;

/// Errors produced by the disparity pipeline, grouped by stage family.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("map format error: {0}")]
    Format(String),

    #[error("simulation error: {0}")]
    Simulation(String),

    #[error("matching error: {0}")]
    Matching(String),

    #[error("refinement error: {0}")]
    Refine(String),

    #[error("evaluation error: {0}")]
    Eval(String),
}

pub type Result<T> = std::result::Result<T, Error>;
