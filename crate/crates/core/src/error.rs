use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("index out of range: {0}")]
    Index(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid configuration: {}", .0.join("; "))]
    Config(Vec<String>),
    #[error("initialization failed: {0}")]
    Init(String),
    #[error("outer iteration {iter}: {source}")]
    Outer {
        iter: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("inconsistent state: {0}")]
    Integrity(String),
    #[error("instance too large: {0}")]
    Size(String),
    #[error("conic layer: {0}")]
    Conic(#[from] rsma_conic::ConicError),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
