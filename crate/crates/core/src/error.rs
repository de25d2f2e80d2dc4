// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

use crate::legalize::{LegalizeAction, LegalizeReport};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("count {count} does not fit in {bits} binary digits")]
    EncodingOverflow { count: u32, bits: usize },

    #[error("prefix node ({row}, {col}) has no valid parent pair")]
    MissingParent { row: usize, col: usize },

    #[error("action {0:?} is not applicable to this design")]
    InapplicableAction(LegalizeAction),

    #[error(
        "legalization failed after {} steps with {} violations left",
        .0.steps_taken,
        .0.final_violations
    )]
    LegalizationFailure(Box<LegalizeReport>),

    #[error("illegal design: {0}")]
    IllegalDesign(String),

    #[error("a QoR reference must be computed before evaluating designs")]
    MissingReference,

    #[error("mutation produced no legal design after {0} attempts")]
    MutationFailed(usize),

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
