// SPDX-License-Identifier: Apache-2.0

//! Noise schedules, forward diffusion and deterministic DDIM stepping.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;

use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_TIMESTEPS: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    /// Squared-cosine cumulative signal level with offset 0.008 and
    /// per-step noise clipped at 0.999.
    Cosine,
    /// Cumulative signal level falling linearly from 1 to 1e-3.
    LinearAlphaBar,
}

impl fmt::Display for ScheduleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScheduleKind::Cosine => "cosine",
            ScheduleKind::LinearAlphaBar => "linear",
        })
    }
}

impl FromStr for ScheduleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cosine" => Ok(ScheduleKind::Cosine),
            "linear" | "linear-alpha-bar" => Ok(ScheduleKind::LinearAlphaBar),
            _ => Err(Error::InvalidArgument(format!("unknown schedule `{s}`"))),
        }
    }
}

/// Cumulative signal levels `alpha[t]` for `t = 0..=T`, with `alpha[0] = 1`
/// strictly decreasing to `alpha[T] > 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSchedule {
    pub kind: ScheduleKind,
    alpha: Vec<f64>,
}

impl NoiseSchedule {
    pub fn new(timesteps: usize, kind: ScheduleKind) -> Result<Self> {
        if timesteps < 2 {
            return Err(Error::InvalidArgument(format!("need at least 2 timesteps, got {timesteps}")));
        }
        let t_max = timesteps as f64;
        let alpha: Vec<f64> = match kind {
            ScheduleKind::Cosine => {
                let s = 0.008;
                let f = |t: f64| ((t / t_max + s) / (1.0 + s) * FRAC_PI_2).cos().powi(2);
                let mut alpha = vec![1.0];
                for t in 1..=timesteps {
                    let beta = (1.0 - f(t as f64) / f((t - 1) as f64)).clamp(0.0, 0.999);
                    alpha.push(alpha[t - 1] * (1.0 - beta));
                }
                alpha
            }
            ScheduleKind::LinearAlphaBar => (0..=timesteps)
                .map(|t| 1.0 - (1.0 - 1e-3) * t as f64 / t_max)
                .collect(),
        };
        if alpha.windows(2).any(|w| w[1] >= w[0]) || alpha[timesteps] <= 0.0 {
            return Err(Error::InvalidArgument(format!("{kind} schedule is not strictly decreasing")));
        }
        Ok(NoiseSchedule { kind, alpha })
    }

    pub fn timesteps(&self) -> usize {
        self.alpha.len() - 1
    }

    /// Cumulative signal level at step `t`.
    pub fn alpha(&self, t: usize) -> f64 {
        self.alpha[t]
    }

    /// Descending timesteps `T = τ_m > … > τ_1 > τ_0 = 0` with `m = steps`,
    /// evenly spread.
    pub fn strided(&self, steps: usize) -> Result<Vec<usize>> {
        let t = self.timesteps();
        if steps == 0 || steps > t {
            return Err(Error::InvalidArgument(format!("{steps} sampling steps for {t} timesteps")));
        }
        let mut out: Vec<usize> = (0..=steps).map(|i| (i * t + steps / 2) / steps).collect();
        out.dedup();
        out.reverse();
        Ok(out)
    }
}

/// `sqrt(a_t) x0 + sqrt(1 - a_t) eps`.
pub fn forward_diffuse(x0: &[f64], eps: &[f64], alpha: f64) -> Vec<f64> {
    let (a, b) = (alpha.sqrt(), (1.0 - alpha).sqrt());
    x0.iter().zip(eps).map(|(x, e)| a * x + b * e).collect()
}

/// Clean-data estimate `(x_t - sqrt(1 - a_t) eps) / sqrt(a_t)`.
pub fn predict_x0(xt: &[f64], eps: &[f64], alpha: f64) -> Vec<f64> {
    let (a, b) = (alpha.sqrt(), (1.0 - alpha).sqrt());
    xt.iter().zip(eps).map(|(x, e)| (x - b * e) / a).collect()
}

/// Deterministic DDIM update from level `alpha` to `alpha_prev`.
pub fn ddim_step(xt: &[f64], eps: &[f64], alpha: f64, alpha_prev: f64) -> Vec<f64> {
    let x0 = predict_x0(xt, eps, alpha);
    let (a, b) = (alpha_prev.sqrt(), (1.0 - alpha_prev).sqrt());
    x0.iter().zip(eps).map(|(x, e)| a * x + b * e).collect()
}

/// Re-noises `x_prev` from level `alpha_prev` back to `alpha` with fresh
/// noise.
pub fn reflect(x_prev: &[f64], alpha: f64, alpha_prev: f64, rng: &mut dyn RngCore) -> Vec<f64> {
    let noise: Vec<f64> = (0..x_prev.len()).map(|_| StandardNormal.sample(rng)).collect();
    reflect_with(x_prev, alpha, alpha_prev, &noise)
}

/// [`reflect`] with caller-supplied noise.
pub fn reflect_with(x_prev: &[f64], alpha: f64, alpha_prev: f64, noise: &[f64]) -> Vec<f64> {
    let ratio = alpha / alpha_prev;
    let (a, b) = (ratio.sqrt(), (1.0 - ratio).max(0.0).sqrt());
    x_prev.iter().zip(noise).map(|(x, e)| a * x + b * e).collect()
}
