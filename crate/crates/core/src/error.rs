use thiserror::Error;

/// Errors raised by the solvers, mesh tools and I/O layer.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("CFL condition violated: {0}")]
    Cfl(String),

    #[error("solution became unstable at step {step} (t = {time}): {reason}")]
    Unstable { step: usize, time: f64, reason: String },

    #[error("mesh error at line {line}: {msg}")]
    MeshParse { line: usize, msg: String },

    #[error("mesh error: {0}")]
    Mesh(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
