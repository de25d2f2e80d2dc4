// SPDX-License-Identifier: Apache-2.0

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use acdiff_core::dataset::{generate_dataset, write_versioned_csv, Dataset, DatasetSpec};
use acdiff_core::netlist::{parse_hdl, verify_exhaustive, TimingModel, Verification};
use acdiff_core::{legalize_ct, legalize_prefix, Design, DesignKind, Evaluator, LegalizeReport};
use acdiff_neural::sample_unconditional;
use acdiff_optimizer::{draw, export_plots, run_campaign, CampaignConfig, ModelPair, ParetoArchive};
use anyhow::{bail, Context, Result};
use clap::error::ErrorKind;
use clap::CommandFactory;
use serde::Serialize;

use crate::args::{Cli, Command, GlobalArgs, KindArg};
use crate::manifest::write_manifest;

pub enum Outcome {
    Success,
    /// The command ran but its check failed (verification mismatch,
    /// legalization budget exhausted).
    Failure,
}

fn usage_error(msg: &str) -> ! {
    Cli::command().error(ErrorKind::MissingRequiredArgument, msg).exit()
}

fn require_out(g: &GlobalArgs, cmd: &str) -> PathBuf {
    match &g.out {
        Some(p) => p.clone(),
        None => usage_error(&format!("`{cmd}` needs --out")),
    }
}

/// Defaults, then the config file, then `--set` pairs, then `--seed`.
fn load_config(g: &GlobalArgs) -> Result<CampaignConfig> {
    let mut cfg = CampaignConfig::default();
    if let Some(path) = &g.config {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        cfg.apply_text(&text)?;
    }
    for kv in &g.overrides {
        let Some((k, v)) = kv.split_once('=') else {
            usage_error(&format!("--set expects KEY=VALUE, got `{kv}`"))
        };
        cfg.set(k, v)?;
    }
    if let Some(seed) = g.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn evaluator_for(design: &Design, cfg: &CampaignConfig) -> Result<Evaluator> {
    let n = match design.kind() {
        DesignKind::Ct => design.width(),
        DesignKind::Prefix => design.width() / 2,
    };
    Ok(Evaluator::new(n, TimingModel::default(), cfg.delay_weight)?)
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string(value)?);
    Ok(())
}

pub fn dispatch(cli: &Cli) -> Result<Outcome> {
    let g = &cli.global;
    let cfg = load_config(g)?;
    let name = cli.command.name();
    let outcome = match &cli.command {
        Command::GenDataset { kind } => gen_dataset(*kind, &cfg, &require_out(g, name))?,
        Command::Train { dataset, init } => train(dataset, init.as_deref(), &cfg, &require_out(g, name))?,
        Command::Sample {
            models,
            count,
            unguided,
        } => sample(models, *count, *unguided, &cfg, &require_out(g, name))?,
        Command::Legalize { design, max_steps } => legalize(design, *max_steps, &require_out(g, name))?,
        Command::Verify { input } => verify(input, &cfg)?,
        Command::Evaluate { designs } => evaluate(designs, &cfg, g.out.as_deref())?,
        Command::Optimize => optimize(&cfg, &require_out(g, name))?,
        Command::Pareto { inputs } => pareto(inputs, g.out.as_deref())?,
        Command::ExportPlots { campaign } => {
            let out = require_out(g, name);
            for p in export_plots(campaign, &out)? {
                eprintln!("wrote {}", p.display());
            }
            Outcome::Success
        }
    };
    if let Some(out) = &g.out {
        if out.exists() {
            write_manifest(out, name, &cfg.to_text(), cfg.seed)?;
        }
    }
    Ok(outcome)
}

fn gen_dataset(kind: KindArg, cfg: &CampaignConfig, out: &Path) -> Result<Outcome> {
    let kind = match kind {
        KindArg::Ct => DesignKind::Ct,
        KindArg::Prefix => DesignKind::Prefix,
    };
    let mut spec = DatasetSpec::desk(kind, cfg.n, cfg.seed);
    spec.unlabeled_count = cfg.unlabeled_count;
    spec.labeled_count = cfg.labeled_count;
    spec.mean_chain_length = cfg.mean_chain_length;
    let evaluator = Evaluator::new(cfg.n, TimingModel::default(), cfg.delay_weight)?;
    let ds = generate_dataset(&spec, &evaluator)?;
    ds.save(out)?;
    eprintln!(
        "{} designs, {} labeled, in {}",
        ds.unlabeled.len(),
        ds.labeled.len(),
        out.display()
    );
    Ok(Outcome::Success)
}

fn train(dataset: &Path, init: Option<&Path>, cfg: &CampaignConfig, out: &Path) -> Result<Outcome> {
    let ds = Dataset::load(dataset).with_context(|| format!("loading dataset {}", dataset.display()))?;
    let Some(first) = ds.unlabeled.first() else {
        bail!("dataset {} is empty", dataset.display())
    };
    let mut models = match init {
        Some(dir) => ModelPair::load(dir)?,
        None => ModelPair::new(first, &cfg.net, cfg.schedule, cfg.timesteps, cfg.seed)?,
    };
    let labeled: Vec<&Design> = ds.labeled.iter().map(|l| &l.design).collect();
    let labels: Vec<f64> = ds.labeled.iter().map(|l| l.label.y).collect();
    let reports = models.train(
        &ds.unlabeled,
        &labeled,
        &labels,
        &cfg.diffusion_training,
        &cfg.predictor_training,
        cfg.seed.wrapping_add(1),
    )?;
    models.save(out)?;
    reports.save(out)?;
    fs::write(out.join("training.json"), serde_json::to_string_pretty(&reports)? + "\n")?;
    eprintln!(
        "final diffusion loss {:?}, predictor validation rank correlation {:?}",
        reports.diffusion.epoch_losses.last(),
        reports.predictor.validation_spearman
    );
    Ok(Outcome::Success)
}

#[derive(Serialize)]
struct SampleRow {
    chain: usize,
    failed: bool,
    violations: usize,
    predicted: Option<f64>,
}

fn sample(models: &Path, count: usize, unguided: bool, cfg: &CampaignConfig, out: &Path) -> Result<Outcome> {
    let m = ModelPair::load(models).with_context(|| format!("loading models {}", models.display()))?;
    let samples = if unguided {
        sample_unconditional(
            count,
            &m.denoiser,
            &m.schedule,
            &m.layout,
            cfg.guidance.sampling_steps,
            cfg.seed,
        )?
    } else {
        draw(&m, &cfg.guidance, count, cfg.seed)?
    };
    let designs = out.join("designs");
    fs::create_dir_all(&designs)?;
    for (i, s) in samples.iter().enumerate() {
        if let Some(d) = &s.design {
            d.save(&designs.join(format!("{i:04}.json")))?;
        }
    }
    write_versioned_csv(
        &out.join("samples.csv"),
        samples.iter().enumerate().map(|(chain, s)| SampleRow {
            chain,
            failed: s.failed,
            violations: s.violations,
            predicted: s.predicted,
        }),
    )?;
    eprintln!("{} samples in {}", samples.len(), out.display());
    Ok(Outcome::Success)
}

fn legalize(path: &Path, max_steps: usize, out: &Path) -> Result<Outcome> {
    let design = Design::load(path)?;
    let (fixed, report) = match &design {
        Design::Ct(t) => match legalize_ct(t, max_steps) {
            Ok((fixed, report)) => (Some(Design::Ct(fixed)), report),
            Err(acdiff_core::Error::LegalizationFailure(report)) => (None, *report),
            Err(e) => return Err(e.into()),
        },
        Design::Prefix(p) => {
            let fixed = legalize_prefix(p);
            let report = LegalizeReport {
                steps_taken: fixed.node_count() - p.node_count(),
                ..LegalizeReport::default()
            };
            (Some(Design::Prefix(fixed)), report)
        }
    };
    print_json(&report)?;
    match fixed {
        Some(d) => {
            if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            d.save(out)?;
            Ok(Outcome::Success)
        }
        None => {
            eprintln!("step budget of {max_steps} exhausted with {} violations", report.final_violations);
            Ok(Outcome::Failure)
        }
    }
}

fn verify(input: &Path, cfg: &CampaignConfig) -> Result<Outcome> {
    let text = fs::read_to_string(input).with_context(|| format!("reading {}", input.display()))?;
    let netlist = if input.extension().is_some_and(|e| e == "v") {
        parse_hdl(&text)?
    } else {
        let design = Design::from_json(&text)?;
        let errors = design.violations();
        if !errors.is_empty() {
            for e in &errors {
                eprintln!("{e}");
            }
            bail!("design has {} rule violations; legalize it first", errors.len());
        }
        evaluator_for(&design, cfg)?.assemble(&design)?
    };
    let result = verify_exhaustive(&netlist)?;
    print_json(&result)?;
    Ok(match result {
        Verification::Passed { .. } => Outcome::Success,
        Verification::Failed(_) => Outcome::Failure,
    })
}

#[derive(Serialize)]
struct EvaluationRow {
    design: String,
    delay: [f64; 2],
    area: [f64; 2],
    y: f64,
}

fn evaluate(paths: &[PathBuf], cfg: &CampaignConfig, out: Option<&Path>) -> Result<Outcome> {
    let mut evaluators: HashMap<(DesignKind, usize), Evaluator> = HashMap::new();
    let mut rows = Vec::with_capacity(paths.len());
    for path in paths {
        let design = Design::load(path).with_context(|| format!("loading {}", path.display()))?;
        let key = (design.kind(), design.width());
        if let std::collections::hash_map::Entry::Vacant(e) = evaluators.entry(key) {
            e.insert(evaluator_for(&design, cfg)?);
        }
        let label = evaluators[&key]
            .evaluate(&design)
            .with_context(|| format!("evaluating {}", path.display()))?;
        let row = EvaluationRow {
            design: path.display().to_string(),
            delay: label.delay,
            area: label.area,
            y: label.y,
        };
        print_json(&row)?;
        rows.push(row);
    }
    if let Some(out) = out {
        fs::write(out, serde_json::to_string_pretty(&rows)? + "\n")?;
    }
    Ok(Outcome::Success)
}

fn optimize(cfg: &CampaignConfig, out: &Path) -> Result<Outcome> {
    let report = run_campaign(out, cfg)?;
    eprintln!(
        "best y {:.4} ({}) after {} evaluations; {} Pareto points",
        report.best_y, report.best_id, report.evaluator_invocations, report.archive_size
    );
    print_json(&report)?;
    Ok(Outcome::Success)
}

fn pareto(inputs: &[PathBuf], out: Option<&Path>) -> Result<Outcome> {
    let mut archive = ParetoArchive::new();
    for input in inputs {
        let path = if input.is_dir() {
            input.join(acdiff_optimizer::campaign::ARCHIVE_FILE)
        } else {
            input.clone()
        };
        let points =
            ParetoArchive::read_csv(&path).with_context(|| format!("reading archive {}", path.display()))?;
        for p in points {
            archive.insert(p)?;
        }
    }
    match out {
        Some(out) => archive.write_csv(out)?,
        None => {
            let mut points = archive.points().to_vec();
            points.sort_by(|a, b| a.delay.total_cmp(&b.delay).then(a.area.total_cmp(&b.area)));
            println!("id,delay,area,y");
            for p in points {
                println!("{},{},{},{}", p.id, p.delay, p.area, p.y);
            }
        }
    }
    Ok(Outcome::Success)
}
