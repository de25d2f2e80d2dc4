// SPDX-License-Identifier: Apache-2.0

//! Predictor-guided DDIM sampling with per-step reflection.
//!
//! Each reverse step from level `a_t` to `a_prev` runs the guided update
//! `k` times; every pass but the last re-noises its result back to `a_t`,
//! so the chain spends extra iterations pulling toward the target cost.

use std::ops::Range;

use acdiff_core::Design;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::encode::{batch_rows, DesignLayout};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::nets::{DenoiserNet, PredictorNet};
use crate::schedule::{ddim_step, forward_diffuse, reflect, NoiseSchedule};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GuidanceConfig {
    /// Cost the predictor is steered toward.
    pub target: f64,
    /// Gradient scale; zero gives plain DDIM.
    pub strength: f64,
    /// Guided passes per reverse step.
    pub reflection_steps: usize,
    pub sampling_steps: usize,
    /// Chains advanced together through the networks.
    pub batch_size: usize,
    /// Clip the clean-data estimate to the `[-1, 1]` data range before
    /// stepping and before the predictor sees it.
    #[serde(default = "yes")]
    pub clip_x0: bool,
}

fn yes() -> bool {
    true
}

impl Default for GuidanceConfig {
    fn default() -> Self {
        GuidanceConfig {
            target: 0.7,
            strength: 10.0,
            reflection_steps: 25,
            sampling_steps: 50,
            batch_size: 32,
            clip_x0: true,
        }
    }
}

impl GuidanceConfig {
    pub fn unguided(sampling_steps: usize) -> Self {
        GuidanceConfig {
            strength: 0.0,
            reflection_steps: 1,
            sampling_steps,
            ..GuidanceConfig::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.reflection_steps == 0 || self.sampling_steps == 0 || self.batch_size == 0 {
            return Err(Error::InvalidArgument(format!("degenerate sampler settings {self:?}")));
        }
        if !self.target.is_finite() || !self.strength.is_finite() || self.strength < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "target {} / strength {}",
                self.target, self.strength
            )));
        }
        Ok(())
    }
}

/// One finished chain.
#[derive(Clone, Debug)]
pub struct Sample {
    /// Sign-decoded design before any legalization; `None` on failure.
    pub design: Option<Design>,
    /// Final continuous state.
    pub raw: Vec<f64>,
    /// Predictor output on the final state, when a predictor was given.
    pub predicted: Option<f64>,
    /// Rule violations of the decoded design.
    pub violations: usize,
    /// The chain went non-finite.
    pub failed: bool,
}

/// Result of one guided pass for a batch of states at level `alpha`.
pub struct GuidedStep {
    pub next: Vec<Vec<f64>>,
    pub noise: Vec<Vec<f64>>,
    /// Gradient of the summed squared cost error with respect to the input.
    pub grad: Option<Vec<Vec<f64>>>,
    pub predicted: Option<Vec<f64>>,
}

/// Guided DDIM update from timestep `t` (level `alpha`) to level
/// `alpha_prev`. The cost gradient flows through the predictor and through
/// the denoiser's noise estimate. With clipping on, the noise estimate is
/// re-derived from the clipped clean-data estimate and the predictor is
/// evaluated there. Clipping also pins the denoiser's inactive elements.
pub fn guided_step(
    denoiser: &DenoiserNet,
    predictor: Option<&PredictorNet>,
    xs: &[Vec<f64>],
    t: usize,
    alpha: f64,
    alpha_prev: f64,
    cfg: &GuidanceConfig,
) -> Result<GuidedStep> {
    let rows: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
    let len: usize = denoiser.shape.iter().product();
    let guided = predictor.filter(|_| cfg.strength != 0.0);
    let mut g = Graph::new();
    let pd = denoiser.params.bind(&mut g, false);
    let x = g.leaf(batch_rows(&rows, &denoiser.shape)?, guided.is_some());
    let ts = vec![t as f64; xs.len()];
    let eps = denoiser.forward(&mut g, &pd, x, &ts)?;
    let (sa, sb) = (alpha.sqrt(), (1.0 - alpha).sqrt());
    let x0 = g.lincomb(x, 1.0 / sa, eps, -sb / sa)?;
    // The clip only moves the evaluation point; the gradient is that of the
    // unclipped composition, otherwise saturated entries get no guidance.
    let x0 = match (cfg.clip_x0, &denoiser.inactive) {
        (false, _) => x0,
        (true, None) => g.clamp_straight_through(x0, -1.0, 1.0),
        (true, Some(mask)) => {
            let x0 = g.clamp_straight_through(x0, -1.0, 1.0);
            g.pin_straight_through(x0, mask, -1.0)?
        }
    };

    let eps_data = &g.value(eps).data;
    let x0_data = &g.value(x0).data;
    let mut noise = Vec::with_capacity(xs.len());
    let mut next = Vec::with_capacity(xs.len());
    for (i, xi) in xs.iter().enumerate() {
        let e = &eps_data[i * len..(i + 1) * len];
        if cfg.clip_x0 {
            let x0i = &x0_data[i * len..(i + 1) * len];
            let e: Vec<f64> = xi.iter().zip(x0i).map(|(x, x0)| (x - sa * x0) / sb).collect();
            next.push(forward_diffuse(x0i, &e, alpha_prev));
            noise.push(e);
        } else {
            next.push(ddim_step(xi, e, alpha, alpha_prev));
            noise.push(e.to_vec());
        }
    }

    let (mut grad, mut predicted) = (None, None);
    if let Some(pred) = guided {
        let pp = pred.params.bind(&mut g, false);
        let y = pred.forward(&mut g, &pp, x0)?;
        predicted = Some(g.value(y).data.clone());
        let loss = g.squared_error(y, &vec![cfg.target; xs.len()], false)?;
        let mut grads = g.backward(loss)?;
        let gx = grads.take(x).ok_or(Error::SamplingFailure)?;
        let scale = cfg.strength * sb;
        let gx: Vec<Vec<f64>> = gx.chunks(len).map(<[f64]>::to_vec).collect();
        for (n, gr) in next.iter_mut().zip(&gx) {
            for (v, d) in n.iter_mut().zip(gr) {
                *v -= scale * d;
            }
        }
        grad = Some(gx);
    }
    Ok(GuidedStep {
        next,
        noise,
        grad,
        predicted,
    })
}

/// Draws `count` designs. Chain `i` uses its own ChaCha8 stream `i` under
/// `seed`, so results do not depend on `batch_size`.
pub fn sample_guided(
    count: usize,
    denoiser: &DenoiserNet,
    predictor: Option<&PredictorNet>,
    schedule: &NoiseSchedule,
    layout: &DesignLayout,
    cfg: &GuidanceConfig,
    seed: u64,
) -> Result<Vec<Sample>> {
    sample_chains(0..count, denoiser, predictor, schedule, layout, cfg, seed)
}

/// Runs chains `chains.start..chains.end` of a [`sample_guided`] call, so
/// callers can split one draw across workers.
#[allow(clippy::too_many_arguments)]
pub fn sample_chains(
    chains: Range<usize>,
    denoiser: &DenoiserNet,
    predictor: Option<&PredictorNet>,
    schedule: &NoiseSchedule,
    layout: &DesignLayout,
    cfg: &GuidanceConfig,
    seed: u64,
) -> Result<Vec<Sample>> {
    cfg.validate()?;
    if layout.shape != denoiser.shape {
        return Err(Error::Shape(format!("layout {:?} vs denoiser {:?}", layout.shape, denoiser.shape)));
    }
    if let Some(p) = predictor {
        if p.shape != denoiser.shape {
            return Err(Error::Shape(format!("predictor {:?} vs denoiser {:?}", p.shape, denoiser.shape)));
        }
    }
    let tau = schedule.strided(cfg.sampling_steps)?;
    let len = layout.row_len();
    let mut out = Vec::with_capacity(chains.len());
    let mut start = chains.start;
    while start < chains.end {
        let end = (start + cfg.batch_size).min(chains.end);
        let mut rngs: Vec<ChaCha8Rng> = (start..end)
            .map(|i| {
                let mut r = ChaCha8Rng::seed_from_u64(seed);
                r.set_stream(i as u64);
                r
            })
            .collect();
        let mut xs: Vec<Vec<f64>> = rngs
            .iter_mut()
            .map(|r| (0..len).map(|_| StandardNormal.sample(r)).collect())
            .collect();
        for w in tau.windows(2) {
            let (t, t_prev) = (w[0], w[1]);
            let (alpha, alpha_prev) = (schedule.alpha(t), schedule.alpha(t_prev));
            for pass in 0..cfg.reflection_steps {
                let step = guided_step(denoiser, predictor, &xs, t, alpha, alpha_prev, cfg)?;
                xs = step.next;
                if pass + 1 < cfg.reflection_steps {
                    xs = xs
                        .iter()
                        .zip(rngs.iter_mut())
                        .map(|(x, r)| reflect(x, alpha, alpha_prev, r))
                        .collect();
                }
            }
        }
        let predicted = match predictor {
            Some(p) => {
                let rows: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
                Some(p.predict(&batch_rows(&rows, &p.shape)?)?)
            }
            None => None,
        };
        for (i, raw) in xs.into_iter().enumerate() {
            let failed = raw.iter().any(|v| !v.is_finite());
            let design = if failed { None } else { Some(layout.decode(&raw)?) };
            out.push(Sample {
                violations: design.as_ref().map_or(0, |d| d.violations().len()),
                design,
                predicted: predicted.as_ref().map(|p| p[i]),
                failed,
                raw,
            });
        }
        start = end;
    }
    Ok(out)
}

/// Plain DDIM sampling.
pub fn sample_unconditional(
    count: usize,
    denoiser: &DenoiserNet,
    schedule: &NoiseSchedule,
    layout: &DesignLayout,
    sampling_steps: usize,
    seed: u64,
) -> Result<Vec<Sample>> {
    sample_guided(
        count,
        denoiser,
        None,
        schedule,
        layout,
        &GuidanceConfig::unguided(sampling_steps),
        seed,
    )
}
