// SPDX-License-Identifier: Apache-2.0

//! Campaign settings and their flat `key = value` text form.

use std::fmt::Write as _;
use std::str::FromStr;

use acdiff_core::qor::DEFAULT_DELAY_WEIGHT;
use acdiff_core::legalize::DEFAULT_MAX_STEPS;
use acdiff_neural::{GuidanceConfig, NetConfig, ScheduleKind, TrainConfig, DEFAULT_TIMESTEPS};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How each round picks the designs sent to the evaluator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelSelection {
    Uniform,
    /// Lowest predictor output first.
    LowestPredicted,
}

impl FromStr for LabelSelection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(LabelSelection::Uniform),
            "lowest_predicted" => Ok(LabelSelection::LowestPredicted),
            _ => Err(Error::Config(format!("unknown label selection `{s}`"))),
        }
    }
}

impl LabelSelection {
    fn as_str(self) -> &'static str {
        match self {
            LabelSelection::Uniform => "uniform",
            LabelSelection::LowestPredicted => "lowest_predicted",
        }
    }
}

/// Round structure of one optimization phase.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundConfig {
    pub rounds: usize,
    pub samples_per_round: usize,
    pub labels_per_round: usize,
    pub finetune_epochs: usize,
    pub selection: LabelSelection,
}

impl RoundConfig {
    pub fn desk() -> Self {
        RoundConfig {
            rounds: 5,
            samples_per_round: 200,
            labels_per_round: 25,
            finetune_epochs: 3,
            selection: LabelSelection::Uniform,
        }
    }

    pub fn paper_scale() -> Self {
        RoundConfig {
            samples_per_round: 1000,
            labels_per_round: 100,
            finetune_epochs: 10,
            ..Self::desk()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CampaignConfig {
    /// Multiplier width.
    pub n: usize,
    pub seed: u64,
    pub round: RoundConfig,
    pub unlabeled_count: usize,
    pub labeled_count: usize,
    pub mean_chain_length: f64,
    pub delay_weight: f64,
    pub net: NetConfig,
    pub schedule: ScheduleKind,
    pub timesteps: usize,
    /// Initial denoiser training.
    pub diffusion_training: TrainConfig,
    /// Initial predictor training.
    pub predictor_training: TrainConfig,
    pub guidance: GuidanceConfig,
    pub max_legalize_steps: usize,
    /// Run the prefix-adder phase after the tree phase.
    pub optimize_cpa: bool,
    /// Number of cost targets in the post-campaign target sweep; 0 skips it.
    pub sweep_targets: usize,
    /// Guidance strengths in the post-campaign strength sweep.
    pub sweep_strengths: Vec<f64>,
    pub sweep_samples: usize,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        Self::desk(8)
    }
}

impl CampaignConfig {
    /// Settings sized for a single CPU core: narrower networks and a short
    /// sampling chain.
    pub fn desk(n: usize) -> Self {
        CampaignConfig {
            n,
            seed: 0,
            round: RoundConfig::desk(),
            unlabeled_count: 1000,
            labeled_count: 200,
            mean_chain_length: 8.0,
            delay_weight: DEFAULT_DELAY_WEIGHT,
            net: NetConfig {
                base_channels: 16,
                time_dim: 32,
            },
            schedule: ScheduleKind::Cosine,
            timesteps: DEFAULT_TIMESTEPS,
            diffusion_training: TrainConfig {
                epochs: 30,
                batch_size: 8,
                ema_decay: 0.995,
                ..TrainConfig::default()
            },
            predictor_training: TrainConfig {
                epochs: 60,
                ..TrainConfig::default()
            },
            guidance: GuidanceConfig {
                reflection_steps: 3,
                sampling_steps: 20,
                ..GuidanceConfig::default()
            },
            max_legalize_steps: DEFAULT_MAX_STEPS,
            optimize_cpa: true,
            sweep_targets: 6,
            sweep_strengths: vec![0.0, 10.0, 1000.0],
            sweep_samples: 50,
        }
    }

    pub fn paper_scale(n: usize) -> Self {
        CampaignConfig {
            round: RoundConfig::paper_scale(),
            unlabeled_count: 15_000,
            labeled_count: 1000,
            net: NetConfig::default(),
            diffusion_training: TrainConfig::default(),
            predictor_training: TrainConfig::default(),
            guidance: GuidanceConfig::default(),
            ..Self::desk(n)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n < 2 {
            return bad(format!("width {} is below 2", self.n));
        }
        if self.round.labels_per_round > self.round.samples_per_round {
            return bad("labels_per_round exceeds samples_per_round".into());
        }
        if self.labeled_count > self.unlabeled_count || self.labeled_count == 0 {
            return bad("labeled_count must be in 1..=unlabeled_count".into());
        }
        if !(0.0..=1.0).contains(&self.delay_weight) {
            return bad(format!("delay_weight {} outside [0, 1]", self.delay_weight));
        }
        if self.guidance.reflection_steps == 0 || self.guidance.sampling_steps == 0 {
            return bad("reflection_steps and sampling_steps must be positive".into());
        }
        if !(0.0..1.0).contains(&self.diffusion_training.ema_decay) {
            return bad(format!("ema_decay {} outside [0, 1)", self.diffusion_training.ema_decay));
        }
        if !(0.0..=1.0).contains(&self.diffusion_training.final_lr_fraction) {
            return bad("final_lr_fraction must be in [0, 1]".into());
        }
        if self.guidance.strength < 0.0 || self.sweep_strengths.iter().any(|s| *s < 0.0) {
            return bad("guidance strength must be non-negative".into());
        }
        Ok(())
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn p<T: FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse().map_err(|_| Error::Config(format!("bad value `{v}` for `{key}`")))
        }
        let v = value.trim();
        match key.trim() {
            "n" => self.n = p(key, v)?,
            "seed" => self.seed = p(key, v)?,
            "rounds" => self.round.rounds = p(key, v)?,
            "samples_per_round" => self.round.samples_per_round = p(key, v)?,
            "labels_per_round" => self.round.labels_per_round = p(key, v)?,
            "finetune_epochs" => self.round.finetune_epochs = p(key, v)?,
            "label_selection" => self.round.selection = v.parse()?,
            "unlabeled_count" => self.unlabeled_count = p(key, v)?,
            "labeled_count" => self.labeled_count = p(key, v)?,
            "mean_chain_length" => self.mean_chain_length = p(key, v)?,
            "delay_weight" => self.delay_weight = p(key, v)?,
            "base_channels" => self.net.base_channels = p(key, v)?,
            "time_dim" => self.net.time_dim = p(key, v)?,
            "schedule" => {
                self.schedule = v.parse().map_err(|_| Error::Config(format!("unknown schedule `{v}`")))?
            }
            "timesteps" => self.timesteps = p(key, v)?,
            "diffusion_epochs" => self.diffusion_training.epochs = p(key, v)?,
            "predictor_epochs" => self.predictor_training.epochs = p(key, v)?,
            "batch_size" => {
                let b = p(key, v)?;
                self.diffusion_training.batch_size = b;
                self.predictor_training.batch_size = b;
            }
            "diffusion_batch_size" => self.diffusion_training.batch_size = p(key, v)?,
            "predictor_batch_size" => self.predictor_training.batch_size = p(key, v)?,
            "ema_decay" => self.diffusion_training.ema_decay = p(key, v)?,
            "final_lr_fraction" => {
                let f = p(key, v)?;
                self.diffusion_training.final_lr_fraction = f;
                self.predictor_training.final_lr_fraction = f;
            }
            "learning_rate" => {
                let lr = p(key, v)?;
                self.diffusion_training.learning_rate = lr;
                self.predictor_training.learning_rate = lr;
            }
            "predictor_input_noise" => self.predictor_training.input_noise = p(key, v)?,
            "target" => self.guidance.target = p(key, v)?,
            "strength" => self.guidance.strength = p(key, v)?,
            "reflection_steps" => self.guidance.reflection_steps = p(key, v)?,
            "sampling_steps" => self.guidance.sampling_steps = p(key, v)?,
            "sample_batch" => self.guidance.batch_size = p(key, v)?,
            "max_legalize_steps" => self.max_legalize_steps = p(key, v)?,
            "optimize_cpa" => self.optimize_cpa = p(key, v)?,
            "sweep_targets" => self.sweep_targets = p(key, v)?,
            "sweep_strengths" => {
                self.sweep_strengths = v
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(|s| p(key, s.trim()))
                    .collect::<Result<_>>()?
            }
            "sweep_samples" => self.sweep_samples = p(key, v)?,
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Parses `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", i + 1)))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut c = CampaignConfig::default();
        c.apply_text(text)?;
        Ok(c)
    }

    /// Every key, one per line, in a fixed order. Training settings shared
    /// through `learning_rate` and `final_lr_fraction` are taken from the
    /// diffusion side.
    pub fn to_text(&self) -> String {
        let strengths: Vec<String> = self.sweep_strengths.iter().map(f64::to_string).collect();
        let pairs: Vec<(&str, String)> = vec![
            ("n", self.n.to_string()),
            ("seed", self.seed.to_string()),
            ("rounds", self.round.rounds.to_string()),
            ("samples_per_round", self.round.samples_per_round.to_string()),
            ("labels_per_round", self.round.labels_per_round.to_string()),
            ("finetune_epochs", self.round.finetune_epochs.to_string()),
            ("label_selection", self.round.selection.as_str().into()),
            ("unlabeled_count", self.unlabeled_count.to_string()),
            ("labeled_count", self.labeled_count.to_string()),
            ("mean_chain_length", self.mean_chain_length.to_string()),
            ("delay_weight", self.delay_weight.to_string()),
            ("base_channels", self.net.base_channels.to_string()),
            ("time_dim", self.net.time_dim.to_string()),
            ("schedule", self.schedule.to_string()),
            ("timesteps", self.timesteps.to_string()),
            ("diffusion_epochs", self.diffusion_training.epochs.to_string()),
            ("predictor_epochs", self.predictor_training.epochs.to_string()),
            ("diffusion_batch_size", self.diffusion_training.batch_size.to_string()),
            ("predictor_batch_size", self.predictor_training.batch_size.to_string()),
            ("learning_rate", self.diffusion_training.learning_rate.to_string()),
            ("final_lr_fraction", self.diffusion_training.final_lr_fraction.to_string()),
            ("ema_decay", self.diffusion_training.ema_decay.to_string()),
            ("predictor_input_noise", self.predictor_training.input_noise.to_string()),
            ("target", self.guidance.target.to_string()),
            ("strength", self.guidance.strength.to_string()),
            ("reflection_steps", self.guidance.reflection_steps.to_string()),
            ("sampling_steps", self.guidance.sampling_steps.to_string()),
            ("sample_batch", self.guidance.batch_size.to_string()),
            ("max_legalize_steps", self.max_legalize_steps.to_string()),
            ("optimize_cpa", self.optimize_cpa.to_string()),
            ("sweep_targets", self.sweep_targets.to_string()),
            ("sweep_strengths", strengths.join(",")),
            ("sweep_samples", self.sweep_samples.to_string()),
        ];
        let mut out = String::from("# format_version: 1\n");
        for (k, v) in pairs {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}
