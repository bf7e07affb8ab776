use std::path::PathBuf;

/// Errors produced by the model, the simulator, the estimators and the harness.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An argument fell outside the domain of a model function.
    #[error("{what} = {value} is outside {domain}")]
    Domain {
        what: &'static str,
        value: f64,
        domain: &'static str,
    },

    /// The bracketed root search could not reach the residual tolerance.
    #[error("inversion of n = {target} did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        target: f64,
        iterations: usize,
        residual: f64,
    },

    /// A computed quantity became NaN or infinite.
    #[error("non-finite {what}: {value}")]
    NonFinite { what: &'static str, value: f64 },

    /// An error raised while processing a given decision slot.
    #[error("slot {slot}: {source}")]
    AtSlot {
        slot: usize,
        #[source]
        source: Box<Error>,
    },

    /// Invalid configuration, with the offending field.
    #[error("invalid config field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed input file (CSV, parameter dump, config).
    #[error("{}: {message}", path.display())]
    Parse { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn at_slot(self, slot: usize) -> Self {
        match self {
            e @ Error::AtSlot { .. } => e,
            e => Error::AtSlot {
                slot,
                source: Box::new(e),
            },
        }
    }

    /// True for errors caused by user-provided configuration rather than by a run.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Fails with [`Error::NonFinite`] unless `value` is finite.
pub(crate) fn ensure_finite(what: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite { what, value })
    }
}
