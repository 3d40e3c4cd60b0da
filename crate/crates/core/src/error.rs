use std::path::PathBuf;

use thiserror::Error;

use crate::Scheme;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("{what} did not converge after {iterations} iterations (last residual {residual:.3e})")]
    NonConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("{scheme} power allocation infeasible (spectral radius {spectral_radius:.6})")]
    Infeasible { scheme: Scheme, spectral_radius: f64 },

    #[error("{scheme} finite power solve infeasible: {reason}")]
    InfeasibleRealization { scheme: Scheme, reason: String },

    #[error("degenerate system: {0}")]
    Degenerate(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors that mean "this instance has no valid power allocation",
    /// as opposed to bad input or a numerical breakdown.
    pub fn is_infeasible(&self) -> bool {
        matches!(
            self,
            Error::Infeasible { .. } | Error::InfeasibleRealization { .. } | Error::NonConvergence { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
