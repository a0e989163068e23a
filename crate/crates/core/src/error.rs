use thiserror::Error;

/// Failure classes shared by every module of the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// The caller handed over inconsistent arguments (dimension mismatch, bad range).
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// The domain geometry violates a hypothesis (disconnected lens, center off the boundary).
    #[error("geometry error: {0}")]
    Geometry(String),
    /// A numerical stage produced an unusable result.
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code: 2 for bad input or configuration, 3 for geometry,
    /// 4 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidInput(_) => 2,
            Error::Geometry(_) => 3,
            Error::Numerical(_) => 4,
        }
    }
}
