// SPDX-License-Identifier: Apache-2.0

//! A denoiser and cost predictor trained on one design layout.

use std::fs;
use std::path::Path;

use acdiff_core::{Design, FORMAT_VERSION};
use acdiff_neural::{
    encode_designs, train_diffusion, train_predictor, DenoiserNet, DesignLayout, NetConfig, NoiseSchedule,
    PredictorNet, ScheduleKind, TrainConfig, TrainReport,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DENOISER_FILE: &str = "denoiser.json";
pub const PREDICTOR_FILE: &str = "predictor.json";
pub const LAYOUT_FILE: &str = "layout.json";

#[derive(Serialize, Deserialize)]
struct LayoutFile {
    format_version: u32,
    layout: DesignLayout,
    schedule: ScheduleKind,
    timesteps: usize,
}

#[derive(Clone, Debug)]
pub struct ModelPair {
    pub layout: DesignLayout,
    pub schedule: NoiseSchedule,
    pub denoiser: DenoiserNet,
    pub predictor: PredictorNet,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingReports {
    pub diffusion: TrainReport,
    pub predictor: TrainReport,
}

impl TrainingReports {
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        self.diffusion.write_loss_csv(&dir.join("diffusion_loss.csv"))?;
        self.predictor.write_loss_csv(&dir.join("predictor_loss.csv"))?;
        Ok(())
    }
}

impl ModelPair {
    /// Fresh networks for the layout of `example`.
    pub fn new(
        example: &Design,
        net: &NetConfig,
        schedule: ScheduleKind,
        timesteps: usize,
        seed: u64,
    ) -> Result<Self> {
        let layout = DesignLayout::of(example)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(ModelPair {
            layout,
            schedule: NoiseSchedule::new(timesteps, schedule)?,
            denoiser: DenoiserNet::new(layout.shape, net.clone(), &mut rng)?,
            predictor: PredictorNet::new(layout.shape, net.clone(), &mut rng)?,
        })
    }

    /// Trains (or continues training) both networks. The denoiser sees all
    /// designs, the predictor only the labeled ones.
    pub fn train(
        &mut self,
        designs: &[Design],
        labeled: &[&Design],
        labels: &[f64],
        diffusion: &TrainConfig,
        predictor: &TrainConfig,
        seed: u64,
    ) -> Result<TrainingReports> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (layout, rows) = encode_designs(&designs.iter().collect::<Vec<_>>())?;
        self.check_layout(&layout)?;
        let d = train_diffusion(&mut self.denoiser, &rows, &self.schedule, diffusion, &mut rng)?;
        let (layout, rows) = encode_designs(labeled)?;
        self.check_layout(&layout)?;
        let p = train_predictor(&mut self.predictor, &rows, labels, predictor, &mut rng)?;
        Ok(TrainingReports { diffusion: d, predictor: p })
    }

    fn check_layout(&self, layout: &DesignLayout) -> Result<()> {
        if *layout != self.layout {
            return Err(Error::Config(format!(
                "design layout {layout:?} differs from the model layout {:?}",
                self.layout
            )));
        }
        Ok(())
    }

    /// Predictor outputs for clean designs.
    pub fn predict(&self, designs: &[&Design]) -> Result<Vec<f64>> {
        if designs.is_empty() {
            return Ok(Vec::new());
        }
        let (layout, rows) = encode_designs(designs)?;
        self.check_layout(&layout)?;
        let rows: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        Ok(self.predictor.predict(&acdiff_neural::batch_rows(&rows, &layout.shape)?)?)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let header = LayoutFile {
            format_version: FORMAT_VERSION,
            layout: self.layout,
            schedule: self.schedule.kind,
            timesteps: self.schedule.timesteps(),
        };
        fs::write(dir.join(LAYOUT_FILE), serde_json::to_string_pretty(&header)?)?;
        self.denoiser.save(&dir.join(DENOISER_FILE))?;
        self.predictor.save(&dir.join(PREDICTOR_FILE))?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let header: LayoutFile = serde_json::from_str(&fs::read_to_string(dir.join(LAYOUT_FILE))?)?;
        if header.format_version != FORMAT_VERSION {
            return Err(Error::Resume(format!("unsupported format_version {}", header.format_version)));
        }
        let denoiser = DenoiserNet::load(&dir.join(DENOISER_FILE))?;
        let predictor = PredictorNet::load(&dir.join(PREDICTOR_FILE))?;
        if denoiser.shape != header.layout.shape || predictor.shape != header.layout.shape {
            return Err(Error::Resume(format!("checkpoint shapes disagree with layout in {}", dir.display())));
        }
        Ok(ModelPair {
            layout: header.layout,
            schedule: NoiseSchedule::new(header.timesteps, header.schedule)?,
            denoiser,
            predictor,
        })
    }

    pub fn exists(dir: &Path) -> bool {
        [LAYOUT_FILE, DENOISER_FILE, PREDICTOR_FILE].iter().all(|f| dir.join(f).is_file())
    }
}
