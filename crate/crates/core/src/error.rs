use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("{what} out of domain: {value}")]
    Domain { what: &'static str, value: f64 },

    #[error("window length {0} is not a power of two")]
    NotPowerOfTwo(usize),

    #[error("degenerate window: {0}")]
    DegenerateWindow(&'static str),

    #[error("discriminator has no stable zero crossing on [{lo}, {hi}] chips")]
    NoZeroCrossing { lo: f64, hi: f64 },

    #[error("composite prompt vanishes at delta_tau = {delta_tau}; carrier phase undefined")]
    PromptCancellation { delta_tau: f64 },

    #[error("epoch {epoch}: {source}")]
    AtEpoch {
        epoch: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {reason}")]
    Schema { path: String, reason: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn at_epoch(self, epoch: u64) -> Self {
        Error::AtEpoch {
            epoch,
            source: Box::new(self),
        }
    }

    /// True for errors caused by bad user input rather than runtime failures.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::InvalidParameter { .. }
            | Error::Domain { .. }
            | Error::NotPowerOfTwo(_)
            | Error::Schema { .. } => true,
            Error::AtEpoch { source, .. } => source.is_validation(),
            _ => false,
        }
    }
}

pub(crate) fn require_finite(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must be finite, got {value}")))
    }
}
