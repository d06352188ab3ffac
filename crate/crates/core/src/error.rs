use alloc::string::String;

use crate::slm::{Arm, LinearParams};

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Caller passed arguments that do not fit together (shapes, names, ranges).
    #[error("usage error: {0}")]
    Usage(String),

    /// The physical or sector configuration violates an invariant.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("{arm} arm angle {angle:e} rad maps to pixel {pixel}, outside the mask")]
    OutOfMask { arm: Arm, angle: f64, pixel: i64 },

    #[error("mask optimisation did not converge after {iterations} iterations")]
    NotConverged { iterations: usize, best: LinearParams },

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
