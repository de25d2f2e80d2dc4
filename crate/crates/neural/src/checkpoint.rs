// SPDX-License-Identifier: Apache-2.0

//! JSON checkpoints for both networks.

use std::fs;
use std::path::Path;

use acdiff_core::FORMAT_VERSION;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nets::{DenoiserNet, ItemShape, NetConfig, ParamSet, PredictorNet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetKind {
    Denoiser,
    Predictor,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format_version: u32,
    kind: NetKind,
    config: NetConfig,
    shape: ItemShape,
    #[serde(default)]
    label_mean: f64,
    #[serde(default = "one")]
    label_std: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    inactive: Option<Vec<bool>>,
    params: ParamSet,
}

fn one() -> f64 {
    1.0
}

fn write(path: &Path, ck: &Checkpoint) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, serde_json::to_string(ck)?)?;
    Ok(())
}

fn read(path: &Path, kind: NetKind) -> Result<Checkpoint> {
    let ck: Checkpoint = serde_json::from_str(&fs::read_to_string(path)?)?;
    if ck.format_version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported format_version {}", ck.format_version)));
    }
    if ck.kind != kind {
        return Err(Error::Checkpoint(format!("expected a {kind:?} checkpoint, found {:?}", ck.kind)));
    }
    Ok(ck)
}

impl DenoiserNet {
    pub fn save(&self, path: &Path) -> Result<()> {
        write(
            path,
            &Checkpoint {
                format_version: FORMAT_VERSION,
                kind: NetKind::Denoiser,
                config: self.config.clone(),
                shape: self.shape,
                label_mean: 0.0,
                label_std: 1.0,
                inactive: self.inactive.clone(),
                params: self.params.clone(),
            },
        )
    }

    pub fn load(path: &Path) -> Result<Self> {
        let ck = read(path, NetKind::Denoiser)?;
        let mut net = DenoiserNet::new(ck.shape, ck.config, &mut ChaCha8Rng::seed_from_u64(0))?;
        net.params.load(&ck.params)?;
        if let Some(m) = &ck.inactive {
            if m.len() != net.shape.iter().product::<usize>() {
                return Err(Error::Checkpoint(format!("inactive mask has {} entries", m.len())));
            }
        }
        net.inactive = ck.inactive;
        Ok(net)
    }
}

impl PredictorNet {
    pub fn save(&self, path: &Path) -> Result<()> {
        write(
            path,
            &Checkpoint {
                format_version: FORMAT_VERSION,
                kind: NetKind::Predictor,
                config: self.config.clone(),
                shape: self.shape,
                label_mean: self.label_mean,
                label_std: self.label_std,
                inactive: None,
                params: self.params.clone(),
            },
        )
    }

    pub fn load(path: &Path) -> Result<Self> {
        let ck = read(path, NetKind::Predictor)?;
        let mut net = PredictorNet::new(ck.shape, ck.config, &mut ChaCha8Rng::seed_from_u64(0))?;
        net.params.load(&ck.params)?;
        net.label_mean = ck.label_mean;
        net.label_std = ck.label_std;
        Ok(net)
    }
}
