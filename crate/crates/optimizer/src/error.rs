// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Design(#[from] acdiff_core::Error),

    #[error(transparent)]
    Model(#[from] acdiff_neural::Error),

    #[error("config: {0}")]
    Config(String),

    #[error("{phase} round {round} failed: {reason}")]
    RoundFailure {
        phase: String,
        round: usize,
        reason: String,
    },

    #[error("cannot resume: {0}")]
    Resume(String),

    #[error("non-finite metric for design `{0}`")]
    NonFiniteMetric(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
