use alloc::string::String;
use alloc::vec::Vec;

use crate::pll::EpochRecord;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch in {context}: expected {expected:?}, found {found:?}")]
    Shape {
        context: &'static str,
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid data at instance {instance}: {reason}")]
    Data { instance: usize, reason: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-finite {what}")]
    NonFinite { what: &'static str },

    /// Training produced a non-finite value. `trace` holds every epoch that
    /// completed before the failure.
    #[error("training diverged at epoch {epoch}, batch {batch}: {reason}")]
    Training {
        epoch: usize,
        batch: usize,
        reason: String,
        trace: Vec<EpochRecord>,
    },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn data(instance: usize, reason: impl Into<String>) -> Self {
        Error::Data {
            instance,
            reason: reason.into(),
        }
    }
}
