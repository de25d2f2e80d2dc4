// SPDX-License-Identifier: Apache-2.0

//! Design-space exploration campaigns: guided sampling, legalization,
//! verification, labeling and fine-tuning over several rounds, with a
//! Pareto archive of everything evaluated.

pub mod campaign;
pub mod config;
pub mod error;
pub mod experiments;
pub mod export;
pub mod models;
pub mod pareto;
pub mod pipeline;

pub use campaign::{run_campaign, stage_seed, CampaignReport, LabeledPoint, PhaseReport, RoundRecord, Stage};
pub use config::{CampaignConfig, LabelSelection, RoundConfig};
pub use error::{Error, Result};
pub use experiments::{spread, sweep, SweepAxis, SweepPlan, SweepRow};
pub use export::export_plots;
pub use models::ModelPair;
pub use pareto::{ParetoArchive, ParetoPoint};
pub use pipeline::{draw, evaluate_all, legalize, realize, verify, Candidate, CandidateStatus};
