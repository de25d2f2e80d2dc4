// SPDX-License-Identifier: Apache-2.0

use std::fmt;

use serde::{Deserialize, Serialize};

/// A design-rule violation found in a compressor tree or prefix bitmap.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DesignRuleViolation {
    /// Compressors at `(column, stage)` consume more bits than are available.
    OverCompression {
        column: usize,
        stage: usize,
        excess: u32,
    },
    /// More than two bits remain in `column` after the last stage.
    UnderCompression { column: usize, excess: u32 },
    /// Present prefix node without any upper/lower parent pair.
    MissingLowerParent { row: usize, col: usize },
    /// A diagonal input node or a column-0 output node is absent.
    MissingRequiredNode { row: usize, col: usize },
}

impl DesignRuleViolation {
    pub fn magnitude(&self) -> u32 {
        match *self {
            DesignRuleViolation::OverCompression { excess, .. }
            | DesignRuleViolation::UnderCompression { excess, .. } => excess,
            DesignRuleViolation::MissingLowerParent { .. }
            | DesignRuleViolation::MissingRequiredNode { .. } => 1,
        }
    }
}

impl fmt::Display for DesignRuleViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            DesignRuleViolation::OverCompression {
                column,
                stage,
                excess,
            } => write!(f, "over-compression at column {column}, stage {stage} (+{excess})"),
            DesignRuleViolation::UnderCompression { column, excess } => {
                write!(f, "under-compression at column {column} (+{excess})")
            }
            DesignRuleViolation::MissingLowerParent { row, col } => {
                write!(f, "missing parent for prefix node ({row}, {col})")
            }
            DesignRuleViolation::MissingRequiredNode { row, col } => {
                write!(f, "missing required prefix node ({row}, {col})")
            }
        }
    }
}
