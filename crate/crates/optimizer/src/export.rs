// SPDX-License-Identifier: Apache-2.0

//! Plot-ready CSV tables from a campaign directory.

use std::fs;
use std::path::{Path, PathBuf};

use acdiff_core::dataset::write_versioned_csv;
use serde::Serialize;

use crate::campaign::{CampaignReport, ARCHIVE_FILE, REPORT_FILE};
use crate::error::Result;
use crate::experiments::{read_sweep, SweepRow, STRENGTH_SWEEP_FILE, TARGET_SWEEP_FILE};
use crate::pareto::{ParetoArchive, ParetoPoint};

#[derive(Serialize)]
struct TargetRow {
    target: f64,
    sample: usize,
    achieved_y: Option<f64>,
    predicted_y: Option<f64>,
    raw_violations: usize,
    legal: bool,
}

#[derive(Serialize)]
struct StrengthRow {
    strength: f64,
    sample: usize,
    achieved_y: Option<f64>,
    predicted_y: Option<f64>,
    raw_violations: usize,
    legal: bool,
}

#[derive(Serialize)]
struct RoundRow {
    phase: String,
    round: usize,
    best_of_round: Option<f64>,
    best_so_far: f64,
}

/// CSV writer that emits the header even with no rows.
fn write_with_header<T: Serialize>(path: &Path, header: &[&str], rows: Vec<T>) -> Result<()> {
    if rows.is_empty() {
        fs::write(path, format!("# format_version: 1\n{}\n", header.join(",")))?;
        return Ok(());
    }
    write_versioned_csv(path, rows)?;
    Ok(())
}

fn sweep_rows(path: &Path) -> Result<Vec<SweepRow>> {
    if path.is_file() {
        read_sweep(path)
    } else {
        Ok(Vec::new())
    }
}

/// Writes `target_sweep.csv`, `strength_sweep.csv`, `rounds.csv` and
/// `pareto.csv` to `out`. Missing inputs give header-only tables.
pub fn export_plots(campaign: &Path, out: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out)?;
    let sweeps = campaign.join("sweeps");
    let cols = ["achieved_y", "predicted_y", "raw_violations", "legal"];
    let header = |first: &str| {
        let mut h = vec![first.to_string(), "sample".to_string()];
        h.extend(cols.iter().map(|c| c.to_string()));
        h
    };

    let targets: Vec<TargetRow> = sweep_rows(&sweeps.join(TARGET_SWEEP_FILE))?
        .into_iter()
        .map(|r| TargetRow {
            target: r.setting,
            sample: r.sample,
            achieved_y: r.achieved_y,
            predicted_y: r.predicted_y,
            raw_violations: r.raw_violations,
            legal: r.legal,
        })
        .collect();
    let h = header("target");
    write_with_header(&out.join("target_sweep.csv"), &h.iter().map(String::as_str).collect::<Vec<_>>(), targets)?;

    let strengths: Vec<StrengthRow> = sweep_rows(&sweeps.join(STRENGTH_SWEEP_FILE))?
        .into_iter()
        .map(|r| StrengthRow {
            strength: r.setting,
            sample: r.sample,
            achieved_y: r.achieved_y,
            predicted_y: r.predicted_y,
            raw_violations: r.raw_violations,
            legal: r.legal,
        })
        .collect();
    let h = header("strength");
    write_with_header(&out.join("strength_sweep.csv"), &h.iter().map(String::as_str).collect::<Vec<_>>(), strengths)?;

    let mut rounds = Vec::new();
    if campaign.join(REPORT_FILE).is_file() {
        let report = CampaignReport::load(campaign)?;
        for (i, phase) in report.phases.iter().enumerate() {
            let name = format!("{}{}", i + 1, match phase.kind {
                acdiff_core::DesignKind::Ct => "_ct",
                acdiff_core::DesignKind::Prefix => "_cpa",
            });
            rounds.push(RoundRow {
                phase: name.clone(),
                round: 0,
                best_of_round: Some(phase.initial_best_y),
                best_so_far: phase.initial_best_y,
            });
            rounds.extend(phase.rounds.iter().map(|r| RoundRow {
                phase: name.clone(),
                round: r.round,
                best_of_round: r.best_of_round,
                best_so_far: r.best_so_far,
            }));
        }
    }
    write_with_header(
        &out.join("rounds.csv"),
        &["phase", "round", "best_of_round", "best_so_far"],
        rounds,
    )?;

    let pareto: Vec<ParetoPoint> = if campaign.join(ARCHIVE_FILE).is_file() {
        ParetoArchive::read_csv(&campaign.join(ARCHIVE_FILE))?
    } else {
        Vec::new()
    };
    write_with_header(&out.join("pareto.csv"), &["id", "delay", "area", "y"], pareto)?;

    Ok(["target_sweep.csv", "strength_sweep.csv", "rounds.csv", "pareto.csv"]
        .iter()
        .map(|f| out.join(f))
        .collect())
}
