use thiserror::Error;

/// Failure modes shared by every module of the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Malformed arguments: dimension mismatch, non-finite values, empty inputs.
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// A numerical routine failed (Cholesky, root bracketing, bisection budget).
    #[error("numerical failure: {0}")]
    Numerical(String),
    /// A documented invariant or precondition was violated at runtime.
    #[error("contract violated: {0}")]
    Contract(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_finite(v: &[f64], what: &str) -> Result<()> {
    if let Some(i) = v.iter().position(|x| !x.is_finite()) {
        return Err(Error::InvalidInput(format!("{what}: non-finite entry at index {i}")));
    }
    Ok(())
}
