use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("{what} supports ground size at most {limit}, got {got}")]
    Capacity {
        what: &'static str,
        limit: usize,
        got: usize,
    },

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("invalid instance: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_capacity(what: &'static str, limit: usize, got: usize) -> Result<()> {
    if got > limit {
        Err(Error::Capacity { what, limit, got })
    } else {
        Ok(())
    }
}
