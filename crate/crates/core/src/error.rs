use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong in a simulation or experiment.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("time {t} outside the covered range [{start}, {end}]")]
    Range { t: f64, start: f64, end: f64 },

    #[error("state became non-finite after t = {last_valid_t}")]
    Diverged { last_valid_t: f64 },

    #[error("invalid run at t = {t}: boundary mass fraction {fraction:.3e} exceeds guard")]
    BoundaryMass { t: f64, fraction: f64 },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
        if expected == got {
            Ok(())
        } else {
            Err(Error::Dimension { expected, got })
        }
    }
}
