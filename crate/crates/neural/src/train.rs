// SPDX-License-Identifier: Apache-2.0

use std::path::Path;

use acdiff_core::dataset::write_versioned_csv;
use rand::seq::SliceRandom;
use rand::{Rng, RngCore};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::encode::batch_rows;
use crate::nets::{DenoiserNet, ParamSet, PredictorNet};
use crate::schedule::{forward_diffuse, NoiseSchedule};
use crate::stats::spearman;

/// Adam with the usual moment decay rates.
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: i32,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(params: &ParamSet, lr: f64) -> Self {
        let zeros = || params.tensors.iter().map(|t| vec![0.0; t.len()]).collect();
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: zeros(),
            v: zeros(),
        }
    }

    pub fn set_learning_rate(&mut self, lr: f64) {
        self.lr = lr;
    }

    pub fn update(&mut self, params: &mut ParamSet, grads: &[Option<Vec<f64>>]) {
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        for (i, t) in params.tensors.iter_mut().enumerate() {
            let Some(g) = &grads[i] else { continue };
            for (k, p) in t.data.iter_mut().enumerate() {
                let m = &mut self.m[i][k];
                let v = &mut self.v[i][k];
                *m = self.beta1 * *m + (1.0 - self.beta1) * g[k];
                *v = self.beta2 * *v + (1.0 - self.beta2) * g[k] * g[k];
                *p -= self.lr * (*m / c1) / ((*v / c2).sqrt() + self.eps);
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Predictor only: each example gets Gaussian noise with a standard
    /// deviation drawn from `[0, input_noise]`, mimicking the error of
    /// clean-data estimates seen during guidance. Zero disables it.
    #[serde(default)]
    pub input_noise: f64,
    /// Denoiser only: decay of an exponential moving average of the
    /// weights, which replaces the raw weights after the last epoch. Zero
    /// keeps the raw weights.
    #[serde(default)]
    pub ema_decay: f64,
    /// Cosine learning-rate decay from `learning_rate` down to this fraction
    /// of it at the last step; 1 keeps the rate constant.
    #[serde(default = "one")]
    pub final_lr_fraction: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 50,
            batch_size: 32,
            learning_rate: 1e-3,
            input_noise: 0.0,
            ema_decay: 0.0,
            final_lr_fraction: 1.0,
        }
    }
}

impl TrainConfig {
    fn learning_rate_at(&self, step: usize, total: usize) -> f64 {
        if total <= 1 {
            return self.learning_rate;
        }
        let progress = step as f64 / (total - 1) as f64;
        let floor = self.final_lr_fraction;
        self.learning_rate * (floor + (1.0 - floor) * 0.5 * (1.0 + (std::f64::consts::PI * progress).cos()))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean training loss per epoch.
    pub epoch_losses: Vec<f64>,
    /// Held-out mean squared error in label units (predictor only).
    pub validation_mse: Option<f64>,
    /// Held-out rank correlation between predictions and labels.
    pub validation_spearman: Option<f64>,
}

impl TrainReport {
    /// `# format_version` line, then `epoch,loss` rows.
    pub fn write_loss_csv(&self, path: &Path) -> Result<()> {
        #[derive(Serialize)]
        struct Row {
            epoch: usize,
            loss: f64,
        }
        write_versioned_csv(
            path,
            self.epoch_losses.iter().enumerate().map(|(epoch, &loss)| Row { epoch, loss }),
        )?;
        Ok(())
    }
}

fn check_finite(epoch: usize, loss: f64) -> Result<()> {
    if loss.is_finite() {
        Ok(())
    } else {
        Err(Error::Divergence { epoch, loss })
    }
}

/// Noise-prediction training: uniform timesteps, fresh Gaussian noise per
/// example, mean squared error. Optimizer state starts fresh on each call.
pub fn train_diffusion(
    net: &mut DenoiserNet,
    data: &[Vec<f64>],
    schedule: &NoiseSchedule,
    cfg: &TrainConfig,
    rng: &mut dyn RngCore,
) -> Result<TrainReport> {
    if data.is_empty() {
        return Err(Error::InvalidArgument("empty training set".into()));
    }
    let mut adam = Adam::new(&net.params, cfg.learning_rate);
    let mut ema = (cfg.ema_decay > 0.0).then(|| net.params.clone());
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut report = TrainReport::default();
    let batch = cfg.batch_size.max(1);
    let total_steps = cfg.epochs * data.len().div_ceil(batch);
    let mut step = 0;
    for epoch in 0..cfg.epochs {
        order.shuffle(rng);
        let mut total = 0.0;
        for chunk in order.chunks(batch) {
            let mut xt = Vec::with_capacity(chunk.len());
            let mut eps_all = Vec::new();
            let mut ts = Vec::with_capacity(chunk.len());
            for &i in chunk {
                let t = rng.random_range(1..=schedule.timesteps());
                let eps: Vec<f64> = (0..data[i].len()).map(|_| StandardNormal.sample(rng)).collect();
                xt.push(forward_diffuse(&data[i], &eps, schedule.alpha(t)));
                eps_all.extend(eps);
                ts.push(t as f64);
            }
            let rows: Vec<&[f64]> = xt.iter().map(Vec::as_slice).collect();
            let mut g = Graph::new();
            let p = net.params.bind(&mut g, true);
            let x = g.leaf(batch_rows(&rows, &net.shape)?, false);
            let out = net.forward(&mut g, &p, x, &ts)?;
            let loss = g.squared_error(out, &eps_all, true)?;
            let lv = g.value(loss).data[0];
            check_finite(epoch, lv)?;
            total += lv * chunk.len() as f64;
            let mut grads = g.backward(loss)?;
            let grads: Vec<Option<Vec<f64>>> = p.iter().map(|&v| grads.take(v)).collect();
            adam.set_learning_rate(cfg.learning_rate_at(step, total_steps));
            adam.update(&mut net.params, &grads);
            step += 1;
            if let Some(avg) = &mut ema {
                for (a, w) in avg.tensors.iter_mut().zip(&net.params.tensors) {
                    for (x, y) in a.data.iter_mut().zip(&w.data) {
                        *x = cfg.ema_decay * *x + (1.0 - cfg.ema_decay) * y;
                    }
                }
            }
        }
        report.epoch_losses.push(total / data.len() as f64);
    }
    if let Some(avg) = ema {
        net.params = avg;
    }
    net.inactive = Some(
        (0..data[0].len())
            .map(|j| data.iter().all(|row| row[j] < 0.0))
            .collect(),
    );
    Ok(report)
}

/// Regression on standardized labels with a held-out 10% split (when the
/// set has at least ten entries). Label statistics come from the training
/// part.
pub fn train_predictor(
    net: &mut PredictorNet,
    data: &[Vec<f64>],
    labels: &[f64],
    cfg: &TrainConfig,
    rng: &mut dyn RngCore,
) -> Result<TrainReport> {
    if data.is_empty() || data.len() != labels.len() {
        return Err(Error::InvalidArgument(format!(
            "{} inputs with {} labels",
            data.len(),
            labels.len()
        )));
    }
    if labels.iter().any(|y| !y.is_finite()) {
        return Err(Error::InvalidArgument("non-finite label".into()));
    }
    let mut idx: Vec<usize> = (0..data.len()).collect();
    idx.shuffle(rng);
    let n_val = if data.len() >= 10 { data.len() / 10 } else { 0 };
    let (val, train) = idx.split_at(n_val);
    let mut train = train.to_vec();

    let ys: Vec<f64> = train.iter().map(|&i| labels[i]).collect();
    let mean = ys.iter().sum::<f64>() / ys.len() as f64;
    let var = ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / ys.len() as f64;
    net.label_mean = mean;
    net.label_std = if var.sqrt() > 1e-12 { var.sqrt() } else { 1.0 };

    let mut adam = Adam::new(&net.params, cfg.learning_rate);
    let mut report = TrainReport::default();
    let batch = cfg.batch_size.max(1);
    let total_steps = cfg.epochs * train.len().div_ceil(batch);
    let mut step = 0;
    for epoch in 0..cfg.epochs {
        train.shuffle(rng);
        let mut total = 0.0;
        for chunk in train.chunks(batch) {
            let noisy: Vec<Vec<f64>> = if cfg.input_noise > 0.0 {
                chunk
                    .iter()
                    .map(|&i| {
                        let sd = rng.random_range(0.0..=cfg.input_noise);
                        data[i]
                            .iter()
                            .map(|v| v + sd * Distribution::<f64>::sample(&StandardNormal, &mut *rng))
                            .collect()
                    })
                    .collect()
            } else {
                chunk.iter().map(|&i| data[i].clone()).collect()
            };
            let rows: Vec<&[f64]> = noisy.iter().map(Vec::as_slice).collect();
            let target: Vec<f64> = chunk
                .iter()
                .map(|&i| (labels[i] - net.label_mean) / net.label_std)
                .collect();
            let mut g = Graph::new();
            let p = net.params.bind(&mut g, true);
            let x = g.leaf(batch_rows(&rows, &net.shape)?, false);
            let out = net.forward_standardized(&mut g, &p, x)?;
            let loss = g.squared_error(out, &target, true)?;
            let lv = g.value(loss).data[0];
            check_finite(epoch, lv)?;
            total += lv * chunk.len() as f64;
            let mut grads = g.backward(loss)?;
            let grads: Vec<Option<Vec<f64>>> = p.iter().map(|&v| grads.take(v)).collect();
            adam.set_learning_rate(cfg.learning_rate_at(step, total_steps));
            adam.update(&mut net.params, &grads);
            step += 1;
        }
        report.epoch_losses.push(total / train.len() as f64);
    }
    if !val.is_empty() {
        let rows: Vec<&[f64]> = val.iter().map(|&i| data[i].as_slice()).collect();
        let pred = net.predict(&batch_rows(&rows, &net.shape)?)?;
        let truth: Vec<f64> = val.iter().map(|&i| labels[i]).collect();
        let mse = pred.iter().zip(&truth).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / pred.len() as f64;
        report.validation_mse = Some(mse);
        report.validation_spearman = spearman(&pred, &truth);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nets::NetConfig;
    use crate::tensor::Tensor;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn adam_minimizes_a_quadratic() {
        let mut ps = ParamSet {
            names: vec!["x".into()],
            tensors: vec![Tensor::scalar(3.0)],
        };
        let mut adam = Adam::new(&ps, 0.1);
        for _ in 0..500 {
            let x = ps.tensors[0].data[0];
            adam.update(&mut ps, &[Some(vec![2.0 * (x - 1.0)])]);
        }
        assert!((ps.tensors[0].data[0] - 1.0).abs() < 1e-3);
    }

    #[test]
    fn constant_labels_fit_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cfg = NetConfig { base_channels: 4, time_dim: 8 };
        let mut net = PredictorNet::new([1, 4, 4], cfg, &mut rng).unwrap();
        let data: Vec<Vec<f64>> = (0..20)
            .map(|i| (0..16).map(|k| if (i + k) % 3 == 0 { 1.0 } else { -1.0 }).collect())
            .collect();
        let labels = vec![0.8; 20];
        let tc = TrainConfig { epochs: 200, batch_size: 8, ..TrainConfig::default() };
        let report = train_predictor(&mut net, &data, &labels, &tc, &mut rng).unwrap();
        assert!(report.validation_mse.unwrap() < 1e-3, "{report:?}");
    }

    #[test]
    fn cosine_decay_endpoints() {
        let tc = TrainConfig { learning_rate: 2e-3, final_lr_fraction: 0.1, ..TrainConfig::default() };
        assert!((tc.learning_rate_at(0, 11) - 2e-3).abs() < 1e-15);
        assert!((tc.learning_rate_at(5, 11) - 1.1e-3).abs() < 1e-15);
        assert!((tc.learning_rate_at(10, 11) - 2e-4).abs() < 1e-15);
        assert_eq!(TrainConfig::default().learning_rate_at(7, 11), 1e-3);
    }
}
