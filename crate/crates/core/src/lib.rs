// SPDX-License-Identifier: Apache-2.0

//! Compressor-tree and prefix-adder design representations for multiplier
//! optimization: tensor codec, design-rule checks, legalization, gate-level
//! netlists, QoR evaluation and dataset generation.

pub mod codec;
pub mod ct;
pub mod dataset;
pub mod design;
pub mod error;
pub mod legalize;
pub mod netlist;
pub mod prefix;
pub mod qor;
pub mod seeds;
pub mod violation;

pub use codec::{from_tensor, to_tensor, DesignTensor};
pub use ct::{propagate_counts, validate_ct, wallace_min_stages, CompressorKind, CompressorTree};
pub use design::{Design, DesignKind, FORMAT_VERSION};
pub use error::{Error, Result};
pub use legalize::{legalize_ct, legalize_prefix, LegalizeReport};
pub use prefix::{canonical_parents, validate_prefix, PrefixBitmap};
pub use qor::{evaluate_qor, Evaluator, QorLabel, QorReference};
pub use seeds::{seed_design, SeedKind};
pub use violation::DesignRuleViolation;
