use thiserror::Error;

/// Errors raised by the element-level privacy primitives.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An item has no cluster in the partition.
    #[error("item {item} is not assigned to any cluster (partition covers {num_items} items)")]
    Assignment { item: usize, num_items: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A parameter is outside the domain where the operation is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// Numerical procedure failed to reach its tolerance.
    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("iteration became unstable at step {step}: |theta| = {norm:.3e}")]
    Instability { step: usize, norm: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}

pub(crate) fn dimension<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Dimension(msg.into()))
}
