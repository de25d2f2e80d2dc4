// SPDX-License-Identifier: Apache-2.0

//! Multi-round explore, evaluate and fine-tune campaigns.
//!
//! Phase 1 searches compressor trees with the serial adder fixed; phase 2
//! freezes the best tree and searches the `2n`-bit prefix adder. Every
//! stage draws its randomness from its own seed, and each finished stage is
//! written to disk, so an interrupted campaign resumes to the same result.
//!
//! Layout of a campaign directory:
//!
//! ```text
//! config.txt                 settings, key = value
//! phase1_ct/dataset/         initial corpus
//! phase1_ct/models/initial/  initial checkpoints and loss curves
//! phase1_ct/round_01/        candidates.json, labeled.json, labels.csv,
//!                            models/, round.json (written last)
//! phase2_cpa/...             same, for prefix adders
//! sweeps/                    optional guidance sweeps
//! archive.csv                non-dominated (delay, area) points
//! report.json
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use acdiff_core::dataset::{generate_dataset, sample_rng, write_versioned_csv, Dataset, DatasetSpec};
use acdiff_core::netlist::{emit_hdl, TimingModel};
use acdiff_core::seeds::SeedKind;
use acdiff_core::{CompressorTree, Design, DesignKind, Evaluator, QorLabel, FORMAT_VERSION};
use rand::seq::index::sample;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::config::{CampaignConfig, LabelSelection};
use crate::error::{Error, Result};
use crate::experiments::{run_sweeps, SweepPlan};
use crate::models::{ModelPair, TrainingReports};
use crate::pareto::{ParetoArchive, ParetoPoint};
use crate::pipeline::{draw, evaluate_all, median, realize, Candidate, CandidateStatus};

pub const CONFIG_FILE: &str = "config.txt";
pub const ARCHIVE_FILE: &str = "archive.csv";
pub const REPORT_FILE: &str = "report.json";
pub const ROUND_FILE: &str = "round.json";

/// Independent randomness for each campaign stage.
#[derive(Clone, Copy, Debug)]
pub enum Stage {
    Dataset = 1,
    Init = 2,
    Train = 3,
    Sample = 4,
    Select = 5,
    FineTune = 6,
    Sweep = 7,
}

pub fn stage_seed(master: u64, phase: usize, round: usize, stage: Stage) -> u64 {
    let stream = ((phase as u64) << 48) | ((round as u64) << 16) | stage as u64;
    sample_rng(master, stream).next_u64()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledPoint {
    pub id: String,
    pub design: Design,
    pub label: QorLabel,
}

impl LabeledPoint {
    pub fn pareto(&self) -> ParetoPoint {
        ParetoPoint {
            id: self.id.clone(),
            delay: self.label.delay.iter().sum::<f64>() / self.label.delay.len() as f64,
            area: self.label.area.iter().sum::<f64>() / self.label.area.len() as f64,
            y: self.label.y,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub sampled: usize,
    pub sampling_failures: usize,
    pub legalization_failures: usize,
    pub verification_failures: usize,
    pub legal: usize,
    pub labeled: usize,
    pub median_raw_violations: Option<f64>,
    /// Lowest cost among this round's labels.
    pub best_of_round: Option<f64>,
    /// Lowest cost among all labels of the phase so far.
    pub best_so_far: f64,
    pub best_id: String,
    pub diffusion_loss: Option<f64>,
    pub predictor_loss: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseReport {
    pub kind: DesignKind,
    pub initial_labels: usize,
    pub initial_best_y: f64,
    pub initial_best_id: String,
    pub predictor_validation_spearman: Option<f64>,
    /// Initial labels plus every round's labels.
    pub evaluator_invocations: usize,
    pub rounds: Vec<RoundRecord>,
    pub best_id: String,
    pub best_y: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CampaignReport {
    pub format_version: u32,
    pub n: usize,
    pub seed: u64,
    pub phases: Vec<PhaseReport>,
    pub evaluator_invocations: usize,
    pub best_id: String,
    pub best_y: f64,
    pub archive_size: usize,
}

impl CampaignReport {
    pub fn load(dir: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(dir.join(REPORT_FILE))?)?)
    }
}

/// Working sets of one phase.
struct PhaseState {
    designs: Vec<Design>,
    labeled: Vec<LabeledPoint>,
    archive: ParetoArchive,
}

impl PhaseState {
    fn best(&self) -> &LabeledPoint {
        self.labeled
            .iter()
            .fold(None, |b: Option<&LabeledPoint>, p| match b {
                Some(b) if b.label.y <= p.label.y => Some(b),
                _ => Some(p),
            })
            .expect("phase has labels")
    }

    fn train_inputs(&self) -> (Vec<&Design>, Vec<f64>) {
        (
            self.labeled.iter().map(|l| &l.design).collect(),
            self.labeled.iter().map(|l| l.label.y).collect(),
        )
    }
}

/// Fixed inputs of one phase.
pub struct Phase<'a> {
    pub index: usize,
    pub kind: DesignKind,
    pub evaluator: Evaluator,
    pub dir: PathBuf,
    pub config: &'a CampaignConfig,
}

impl Phase<'_> {
    fn name(&self) -> String {
        match self.kind {
            DesignKind::Ct => format!("phase{}_ct", self.index),
            DesignKind::Prefix => format!("phase{}_cpa", self.index),
        }
    }

    fn tag(&self) -> &'static str {
        match self.kind {
            DesignKind::Ct => "ct",
            DesignKind::Prefix => "cpa",
        }
    }

    fn seed(&self, round: usize, stage: Stage) -> u64 {
        stage_seed(self.config.seed, self.index, round, stage)
    }

    fn round_dir(&self, round: usize) -> PathBuf {
        self.dir.join(format!("round_{round:02}"))
    }

    fn dataset(&self) -> Result<Dataset> {
        let dir = self.dir.join("dataset");
        if dir.join(acdiff_core::dataset::HEADER_FILE).is_file() {
            return Ok(Dataset::load(&dir)?);
        }
        let cfg = self.config;
        let spec = DatasetSpec {
            kind: self.kind,
            n: cfg.n,
            unlabeled_count: cfg.unlabeled_count,
            labeled_count: cfg.labeled_count,
            seeds: match self.kind {
                DesignKind::Ct => SeedKind::CT.to_vec(),
                DesignKind::Prefix => SeedKind::PREFIX.to_vec(),
            },
            mean_chain_length: cfg.mean_chain_length,
            seed: self.seed(0, Stage::Dataset),
        };
        let ds = generate_dataset(&spec, &self.evaluator)?;
        ds.save(&dir)?;
        Ok(ds)
    }

    fn initial_models(&self, ds: &Dataset) -> Result<(ModelPair, Option<TrainingReports>)> {
        let dir = self.dir.join("models").join("initial");
        if ModelPair::exists(&dir) {
            return Ok((ModelPair::load(&dir)?, None));
        }
        let cfg = self.config;
        let mut models = ModelPair::new(
            &ds.unlabeled[0],
            &cfg.net,
            cfg.schedule,
            cfg.timesteps,
            self.seed(0, Stage::Init),
        )?;
        let labeled: Vec<&Design> = ds.labeled.iter().map(|l| &l.design).collect();
        let labels: Vec<f64> = ds.labeled.iter().map(|l| l.label.y).collect();
        let reports = models.train(
            &ds.unlabeled,
            &labeled,
            &labels,
            &cfg.diffusion_training,
            &cfg.predictor_training,
            self.seed(0, Stage::Train),
        )?;
        reports.save(&dir)?;
        fs::write(dir.join("training.json"), serde_json::to_string_pretty(&reports)?)?;
        models.save(&dir)?;
        Ok((models, Some(reports)))
    }

    /// Runs every round not yet on disk and returns the phase outcome.
    pub fn run(&self) -> Result<(PhaseReport, Vec<LabeledPoint>, ModelPair)> {
        fs::create_dir_all(&self.dir)?;
        let ds = self.dataset()?;
        let (mut models, reports) = self.initial_models(&ds)?;
        let spearman = match reports {
            Some(r) => r.predictor.validation_spearman,
            None => {
                let path = self.dir.join("models").join("initial").join("training.json");
                let r: TrainingReports = serde_json::from_str(&fs::read_to_string(path)?)?;
                r.predictor.validation_spearman
            }
        };
        let tag = self.tag();
        let mut state = PhaseState {
            designs: ds.unlabeled.clone(),
            labeled: ds
                .labeled
                .iter()
                .map(|l| LabeledPoint {
                    id: format!("{tag}-d{:05}", l.id),
                    design: l.design.clone(),
                    label: l.label.clone(),
                })
                .collect(),
            archive: ParetoArchive::new(),
        };
        for p in &state.labeled {
            state.archive.insert(p.pareto())?;
        }
        let initial = state.best().clone();
        let mut report = PhaseReport {
            kind: self.kind,
            initial_labels: state.labeled.len(),
            initial_best_y: initial.label.y,
            initial_best_id: initial.id.clone(),
            predictor_validation_spearman: spearman,
            evaluator_invocations: state.labeled.len(),
            rounds: Vec::new(),
            best_id: initial.id,
            best_y: initial.label.y,
        };

        for round in 1..=self.config.round.rounds {
            let dir = self.round_dir(round);
            let record = if dir.join(ROUND_FILE).is_file() {
                let record: RoundRecord = serde_json::from_str(&fs::read_to_string(dir.join(ROUND_FILE))?)?;
                let candidates: Vec<Candidate> =
                    serde_json::from_str(&fs::read_to_string(dir.join("candidates.json"))?)?;
                let labeled: Vec<LabeledPoint> = serde_json::from_str(&fs::read_to_string(dir.join("labeled.json"))?)?;
                merge(&mut state, &candidates, labeled)?;
                models = ModelPair::load(&dir.join("models"))?;
                record
            } else {
                self.run_round(round, &mut state, &mut models)?
            };
            report.evaluator_invocations += record.labeled;
            report.rounds.push(record);
        }
        let best = state.best();
        report.best_id = best.id.clone();
        report.best_y = best.label.y;
        Ok((report, state.labeled, models))
    }

    /// One explore, evaluate and fine-tune round.
    fn run_round(&self, round: usize, state: &mut PhaseState, models: &mut ModelPair) -> Result<RoundRecord> {
        let cfg = self.config;
        let dir = self.round_dir(round);
        if dir.exists() {
            // Leftovers of an interrupted round.
            fs::remove_dir_all(&dir)?;
        }
        fs::create_dir_all(&dir)?;
        let fail = |reason: String| Error::RoundFailure {
            phase: self.name(),
            round,
            reason,
        };

        let samples = draw(models, &cfg.guidance, cfg.round.samples_per_round, self.seed(round, Stage::Sample))?;
        let candidates = realize(&samples, &self.evaluator, cfg.max_legalize_steps)?;
        let legal: Vec<&Candidate> = candidates.iter().filter(|c| c.is_legal()).collect();
        if legal.is_empty() {
            return Err(fail("no sample survived legalization and verification".into()));
        }

        let take = cfg.round.labels_per_round.min(legal.len());
        let picked: Vec<usize> = match cfg.round.selection {
            LabelSelection::Uniform => {
                let mut rng = sample_rng(self.seed(round, Stage::Select), 0);
                let mut v = sample(&mut rng, legal.len(), take).into_vec();
                v.sort_unstable();
                v
            }
            LabelSelection::LowestPredicted => {
                let designs: Vec<&Design> = legal.iter().map(|c| c.design.as_ref().expect("legal")).collect();
                let pred = models.predict(&designs)?;
                let mut order: Vec<usize> = (0..legal.len()).collect();
                order.sort_by(|&a, &b| pred[a].total_cmp(&pred[b]).then(a.cmp(&b)));
                order.truncate(take);
                order.sort_unstable();
                order
            }
        };
        let to_label: Vec<&Design> = picked.iter().map(|&i| legal[i].design.as_ref().expect("legal")).collect();
        let labels = evaluate_all(&to_label, &self.evaluator)?;
        let tag = self.tag();
        let labeled: Vec<LabeledPoint> = picked
            .iter()
            .zip(labels)
            .map(|(&i, label)| LabeledPoint {
                id: format!("{tag}-r{round:02}-{:04}", legal[i].chain),
                design: legal[i].design.clone().expect("legal"),
                label,
            })
            .collect();
        let best_of_round = labeled.iter().map(|l| l.label.y).reduce(f64::min);
        merge(state, &candidates, labeled.clone())?;

        let (lab_designs, lab_y) = state.train_inputs();
        let mut ft_diff = cfg.diffusion_training.clone();
        ft_diff.epochs = cfg.round.finetune_epochs;
        let mut ft_pred = cfg.predictor_training.clone();
        ft_pred.epochs = cfg.round.finetune_epochs;
        let reports = models.train(
            &state.designs,
            &lab_designs,
            &lab_y,
            &ft_diff,
            &ft_pred,
            self.seed(round, Stage::FineTune),
        )?;
        reports.save(&dir)?;
        models.save(&dir.join("models"))?;

        let count = |s: CandidateStatus| candidates.iter().filter(|c| c.status == s).count();
        let raw: Vec<f64> = candidates
            .iter()
            .filter(|c| c.status != CandidateStatus::SamplingFailed)
            .map(|c| c.raw_violations as f64)
            .collect();
        let best = state.best();
        let record = RoundRecord {
            round,
            sampled: candidates.len(),
            sampling_failures: count(CandidateStatus::SamplingFailed),
            legalization_failures: count(CandidateStatus::LegalizationFailed),
            verification_failures: count(CandidateStatus::VerificationFailed),
            legal: legal.len(),
            labeled: labeled.len(),
            median_raw_violations: median(&raw),
            best_of_round,
            best_so_far: best.label.y,
            best_id: best.id.clone(),
            diffusion_loss: reports.diffusion.epoch_losses.last().copied(),
            predictor_loss: reports.predictor.epoch_losses.last().copied(),
        };
        fs::write(dir.join("candidates.json"), serde_json::to_string(&candidates)?)?;
        fs::write(dir.join("labeled.json"), serde_json::to_string(&labeled)?)?;
        write_label_csv(&dir.join("labels.csv"), &labeled)?;
        fs::write(dir.join(ROUND_FILE), serde_json::to_string_pretty(&record)?)?;
        Ok(record)
    }
}

/// Adds a round's legal designs to the unlabeled pool and its labels to the
/// labeled pool and archive.
fn merge(state: &mut PhaseState, candidates: &[Candidate], labeled: Vec<LabeledPoint>) -> Result<()> {
    state
        .designs
        .extend(candidates.iter().filter(|c| c.is_legal()).filter_map(|c| c.design.clone()));
    for p in &labeled {
        state.archive.insert(p.pareto())?;
    }
    state.labeled.extend(labeled);
    Ok(())
}

#[derive(Serialize)]
struct LabelCsvRow<'a> {
    id: &'a str,
    delay_1: f64,
    area_1: f64,
    delay_2: f64,
    area_2: f64,
    y: f64,
}

fn write_label_csv(path: &Path, points: &[LabeledPoint]) -> Result<()> {
    write_versioned_csv(
        path,
        points.iter().map(|p| LabelCsvRow {
            id: &p.id,
            delay_1: p.label.delay[0],
            area_1: p.label.area[0],
            delay_2: p.label.delay[1],
            area_2: p.label.area[1],
            y: p.label.y,
        }),
    )?;
    Ok(())
}

/// Writes or checks `config.txt`; a campaign directory is bound to one
/// configuration.
fn bind_config(dir: &Path, cfg: &CampaignConfig) -> Result<()> {
    let path = dir.join(CONFIG_FILE);
    let text = cfg.to_text();
    if path.is_file() {
        let stored = CampaignConfig::from_text(&fs::read_to_string(&path)?)?;
        if stored != *cfg {
            return Err(Error::Resume(format!(
                "{} holds a different configuration",
                path.display()
            )));
        }
        return Ok(());
    }
    fs::write(path, text)?;
    Ok(())
}

fn best_tree(points: &[LabeledPoint]) -> Option<CompressorTree> {
    points
        .iter()
        .filter(|p| p.design.as_ct().is_some())
        .fold(None, |b: Option<&LabeledPoint>, p| match b {
            Some(b) if b.label.y <= p.label.y => Some(b),
            _ => Some(p),
        })
        .and_then(|p| p.design.as_ct().cloned())
}

/// Runs (or resumes) a full campaign in `dir`.
pub fn run_campaign(dir: &Path, cfg: &CampaignConfig) -> Result<CampaignReport> {
    cfg.validate()?;
    fs::create_dir_all(dir)?;
    bind_config(dir, cfg)?;

    let evaluator = Evaluator::new(cfg.n, TimingModel::default(), cfg.delay_weight)?;
    let ct_phase = Phase {
        index: 1,
        kind: DesignKind::Ct,
        evaluator: evaluator.clone(),
        dir: dir.join("phase1_ct"),
        config: cfg,
    };
    let (ct_report, ct_points, ct_models) = ct_phase.run()?;

    if cfg.sweep_samples > 0 {
        let ys: Vec<f64> = ct_points.iter().map(|p| p.label.y).take(ct_report.initial_labels).collect();
        let plan = SweepPlan::from_config(cfg, &ys);
        run_sweeps(&dir.join("sweeps"), &ct_models, &evaluator, cfg, &plan, stage_seed(cfg.seed, 1, 0, Stage::Sweep))?;
    }

    let mut reports = vec![ct_report];
    let mut all_points = ct_points;
    let tree = best_tree(&all_points).expect("phase 1 has labels");
    let mut best_design = Design::Ct(tree.clone());
    let mut final_evaluator = evaluator.clone();
    if cfg.optimize_cpa {
        let cpa_eval = evaluator.with_fixed_ct(tree)?;
        let cpa_phase = Phase {
            index: 2,
            kind: DesignKind::Prefix,
            evaluator: cpa_eval.clone(),
            dir: dir.join("phase2_cpa"),
            config: cfg,
        };
        let (r, points, _) = cpa_phase.run()?;
        let best = points.iter().find(|p| p.id == r.best_id).expect("best is labeled");
        best_design = best.design.clone();
        final_evaluator = cpa_eval;
        reports.push(r);
        all_points.extend(points);
    }

    let mut archive = ParetoArchive::new();
    for p in &all_points {
        archive.insert(p.pareto())?;
    }
    archive.write_csv(&dir.join(ARCHIVE_FILE))?;
    let best = archive.best().expect("archive is non-empty").clone();
    fs::write(dir.join("best_design.json"), best_design.to_json())?;
    fs::write(dir.join("best_multiplier.v"), emit_hdl(&final_evaluator.assemble(&best_design)?))?;

    let report = CampaignReport {
        format_version: FORMAT_VERSION,
        n: cfg.n,
        seed: cfg.seed,
        evaluator_invocations: reports.iter().map(|r| r.evaluator_invocations).sum(),
        phases: reports,
        best_id: best.id,
        best_y: best.y,
        archive_size: archive.len(),
    };
    fs::write(dir.join(REPORT_FILE), serde_json::to_string_pretty(&report)?)?;
    Ok(report)
}
