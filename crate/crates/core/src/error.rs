use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Cholesky factorization kept failing after every jitter escalation.
    #[error("kernel matrix is numerically singular (diagonal scale {scale:.3e}, last jitter {jitter:.3e})")]
    SingularKernel { scale: f64, jitter: f64 },

    #[error("degenerate vector: {0}")]
    DegenerateVector(&'static str),

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid value for {name}: {value} ({reason})")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    /// The requested logit has no finite value (pure hard labels or a
    /// probability pinned at 0 or 1).
    #[error("unbounded solution: {0}")]
    Unbounded(&'static str),

    #[error("numeric overflow: {0}")]
    Overflow(&'static str),

    #[error("training diverged at epoch {epoch} (loss {loss})")]
    Divergence { epoch: usize, loss: f64 },

    #[error("checkpoint format error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(context: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            got,
        })
    }
}
