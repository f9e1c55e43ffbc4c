// Copyright 2026 The tweezer-gates Authors
// SPDX-License-Identifier: Apache-2.0

//! Library error type.

use thiserror::Error;

/// Errors raised by the numerical modules.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("solver did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("mechanical instability: {0}")]
    Unstable(String),
    #[error("modes not localized: {0}")]
    NotLocalized(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors caused by bad user input rather than numerics.
    pub fn is_config_error(&self) -> bool {
        matches!(self, Error::InvalidInput(_) | Error::Json(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
