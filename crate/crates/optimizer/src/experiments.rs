// SPDX-License-Identifier: Apache-2.0

//! Guidance sweeps: achieved cost against the target, and against the
//! guidance strength.

use std::fs;
use std::path::Path;

use acdiff_core::dataset::write_versioned_csv;
use acdiff_core::{Design, Evaluator};
use acdiff_neural::GuidanceConfig;
use serde::{Deserialize, Serialize};

use crate::config::CampaignConfig;
use crate::error::Result;
use crate::models::ModelPair;
use crate::pipeline::{draw, evaluate_all, realize};

pub const TARGET_SWEEP_FILE: &str = "target_sweep.csv";
pub const STRENGTH_SWEEP_FILE: &str = "strength_sweep.csv";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepAxis {
    Target,
    Strength,
}

/// One sampled chain of a sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    /// Target cost or guidance strength, by axis.
    pub setting: f64,
    pub sample: usize,
    pub predicted_y: Option<f64>,
    pub raw_violations: usize,
    pub legalize_steps: usize,
    pub legal: bool,
    /// Evaluated cost of the legalized design.
    pub achieved_y: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepPlan {
    pub targets: Vec<f64>,
    pub strengths: Vec<f64>,
    pub samples: usize,
}

impl SweepPlan {
    /// Targets evenly spread over the range of `labels`.
    pub fn from_config(cfg: &CampaignConfig, labels: &[f64]) -> Self {
        let lo = labels.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = labels.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        SweepPlan {
            targets: spread(lo, hi, cfg.sweep_targets),
            strengths: cfg.sweep_strengths.clone(),
            samples: cfg.sweep_samples,
        }
    }
}

/// `count` evenly spaced values from `lo` to `hi` inclusive.
pub fn spread(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![(lo + hi) / 2.0],
        _ => (0..count).map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64).collect(),
    }
}

/// Samples `samples` chains per setting, varying one guidance parameter.
/// Every setting reuses the same seed, so the settings share initial noise.
#[allow(clippy::too_many_arguments)]
pub fn sweep(
    models: &ModelPair,
    evaluator: &Evaluator,
    base: &GuidanceConfig,
    axis: SweepAxis,
    settings: &[f64],
    samples: usize,
    max_legalize_steps: usize,
    seed: u64,
) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    for &setting in settings {
        let mut g = base.clone();
        match axis {
            SweepAxis::Target => g.target = setting,
            SweepAxis::Strength => g.strength = setting,
        }
        let drawn = draw(models, &g, samples, seed)?;
        let cands = realize(&drawn, evaluator, max_legalize_steps)?;
        let legal: Vec<&Design> = cands.iter().filter(|c| c.is_legal()).filter_map(|c| c.design.as_ref()).collect();
        let mut labels = evaluate_all(&legal, evaluator)?.into_iter();
        for c in &cands {
            rows.push(SweepRow {
                setting,
                sample: c.chain,
                predicted_y: c.predicted,
                raw_violations: c.raw_violations,
                legalize_steps: c.legalize_steps,
                legal: c.is_legal(),
                achieved_y: if c.is_legal() { labels.next().map(|l| l.y) } else { None },
            });
        }
    }
    Ok(rows)
}

pub fn write_sweep(path: &Path, rows: &[SweepRow]) -> Result<()> {
    write_versioned_csv(path, rows)?;
    Ok(())
}

pub fn read_sweep(path: &Path) -> Result<Vec<SweepRow>> {
    Ok(acdiff_core::dataset::read_versioned_csv(path)?)
}

/// Runs both sweeps of `plan` with the campaign's guidance settings.
pub fn run_sweeps(
    dir: &Path,
    models: &ModelPair,
    evaluator: &Evaluator,
    cfg: &CampaignConfig,
    plan: &SweepPlan,
    seed: u64,
) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (axis, settings, file) in [
        (SweepAxis::Target, &plan.targets, TARGET_SWEEP_FILE),
        (SweepAxis::Strength, &plan.strengths, STRENGTH_SWEEP_FILE),
    ] {
        let path = dir.join(file);
        if path.is_file() {
            continue;
        }
        let rows = sweep(
            models,
            evaluator,
            &cfg.guidance,
            axis,
            settings,
            plan.samples,
            cfg.max_legalize_steps,
            seed,
        )?;
        write_sweep(&path, &rows)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spread_is_inclusive() {
        assert_eq!(spread(1.0, 2.0, 3), vec![1.0, 1.5, 2.0]);
        assert_eq!(spread(1.0, 2.0, 1), vec![1.5]);
        assert!(spread(1.0, 2.0, 0).is_empty());
    }
}
