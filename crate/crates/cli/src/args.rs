// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "acdiff", version, about = "Diffusion-guided multiplier design exploration")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug)]
pub struct GlobalArgs {
    /// Master RNG seed; overrides the config file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Flat `key = value` config file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Extra `key=value` settings applied after the config file.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,
    /// Output directory (or file, for single-design commands).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for sampling, legalization, verification and
    /// evaluation. Defaults to the available parallelism.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Ct,
    Prefix,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate an unlabeled design set with a labeled subset.
    GenDataset {
        #[arg(long, value_enum, default_value = "ct")]
        kind: KindArg,
    },
    /// Train a denoiser and cost predictor on a dataset.
    Train {
        /// Dataset directory written by `gen-dataset`.
        #[arg(long)]
        dataset: PathBuf,
        /// Continue from these models instead of fresh networks.
        #[arg(long)]
        init: Option<PathBuf>,
    },
    /// Draw designs from trained models.
    Sample {
        /// Model directory written by `train`.
        #[arg(long)]
        models: PathBuf,
        #[arg(long, default_value_t = 32)]
        count: usize,
        /// Plain DDIM without guidance or self-reflection.
        #[arg(long)]
        unguided: bool,
    },
    /// Repair the design-rule violations of a design JSON file.
    Legalize {
        design: PathBuf,
        #[arg(long, default_value_t = acdiff_core::legalize::DEFAULT_MAX_STEPS)]
        max_steps: usize,
    },
    /// Exhaustively check a design (JSON) or a structural netlist (`.v`).
    Verify { input: PathBuf },
    /// Delay, area and normalized cost of design JSON files.
    Evaluate {
        #[arg(required = true)]
        designs: Vec<PathBuf>,
    },
    /// Run a full exploration campaign into `--out` (resumable).
    Optimize,
    /// Merge archive CSVs (or campaign directories) into one Pareto front.
    Pareto {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Write plot-ready CSVs for a campaign directory.
    ExportPlots { campaign: PathBuf },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::GenDataset { .. } => "gen-dataset",
            Command::Train { .. } => "train",
            Command::Sample { .. } => "sample",
            Command::Legalize { .. } => "legalize",
            Command::Verify { .. } => "verify",
            Command::Evaluate { .. } => "evaluate",
            Command::Optimize => "optimize",
            Command::Pareto { .. } => "pareto",
            Command::ExportPlots { .. } => "export-plots",
        }
    }
}
