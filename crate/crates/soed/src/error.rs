#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    /// Every point of the discretized posterior underflowed to zero.
    #[error("posterior mass underflowed to zero")]
    DegeneratePosterior,
}

pub type Result<T> = std::result::Result<T, Error>;
