use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("degenerate weight law: W0 = 1/2 almost surely")]
    DegenerateLaw,
    #[error("invalid weight law: {0}")]
    InvalidLaw(String),
    #[error("quadrature did not converge: {0}")]
    QuadratureFailure(String),
    #[error("depth {depth} exceeds the limit {limit}")]
    DepthExceeded { depth: usize, limit: usize },
    #[error("argument out of domain: {0}")]
    DomainError(String),
    #[error("invalid parameter: {0}")]
    ParameterError(String),
    #[error("dimension error: {0}")]
    DimensionError(String),
    #[error("inconsistent spectral constants: {0}")]
    ConsistencyError(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
