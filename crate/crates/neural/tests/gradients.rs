// SPDX-License-Identifier: Apache-2.0

//! Tape gradients against central finite differences.

use acdiff_neural::graph::Graph;
use acdiff_neural::schedule::predict_x0;
use acdiff_neural::{batch_rows, guided_step, DenoiserNet, GuidanceConfig, NetConfig, ParamSet, PredictorNet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

const STEP: f64 = 1e-3;
const TOL: f64 = 1e-4;
// Odd width exercises the upsample crop after the stride-2 stage.
const SHAPE: [usize; 3] = [2, 4, 5];

fn cfg() -> NetConfig {
    NetConfig { base_channels: 3, time_dim: 4 }
}

fn jitter(ps: &mut ParamSet, rng: &mut ChaCha8Rng) {
    for t in &mut ps.tensors {
        for v in &mut t.data {
            let e: f64 = StandardNormal.sample(rng);
            *v += 0.05 * e;
        }
    }
}

fn inputs(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec<f64>> {
    let len: usize = SHAPE.iter().product();
    (0..n).map(|_| (0..len).map(|_| StandardNormal.sample(rng)).collect()).collect()
}

fn assert_close(analytic: f64, numeric: f64, what: &str) {
    let scale = analytic.abs().max(numeric.abs());
    assert!(
        (analytic - numeric).abs() <= TOL * scale + 1e-8,
        "{what}: tape {analytic} vs finite difference {numeric}"
    );
}

/// Checks a handful of random coordinates of `x` against `f`.
fn check_coords(rng: &mut ChaCha8Rng, x: &[Vec<f64>], grad: &[Vec<f64>], f: &dyn Fn(&[Vec<f64>]) -> f64, what: &str) {
    for _ in 0..12 {
        let i = rng.random_range(0..x.len());
        let k = rng.random_range(0..x[i].len());
        let mut plus = x.to_vec();
        plus[i][k] += STEP;
        let mut minus = x.to_vec();
        minus[i][k] -= STEP;
        let numeric = (f(&plus) - f(&minus)) / (2.0 * STEP);
        assert_close(grad[i][k], numeric, &format!("{what} input ({i},{k})"));
    }
}

fn predictor_loss(net: &PredictorNet, x: &[Vec<f64>], target: f64) -> f64 {
    let rows: Vec<&[f64]> = x.iter().map(Vec::as_slice).collect();
    let y = net.predict(&batch_rows(&rows, &SHAPE).unwrap()).unwrap();
    y.iter().map(|v| (v - target).powi(2)).sum()
}

#[test]
fn predictor_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut net = PredictorNet::new(SHAPE, cfg(), &mut rng).unwrap();
    net.label_mean = 0.4;
    net.label_std = 1.7;
    let x = inputs(&mut rng, 2);
    let rows: Vec<&[f64]> = x.iter().map(Vec::as_slice).collect();

    let mut g = Graph::new();
    let p = net.params.bind(&mut g, true);
    let xv = g.leaf(batch_rows(&rows, &SHAPE).unwrap(), true);
    let y = net.forward(&mut g, &p, xv).unwrap();
    let loss = g.squared_error(y, &[0.3, 0.3], false).unwrap();
    let grads = g.backward(loss).unwrap();
    let gx: Vec<Vec<f64>> = grads.get(xv).unwrap().chunks(x[0].len()).map(<[f64]>::to_vec).collect();
    check_coords(&mut rng, &x, &gx, &|x| predictor_loss(&net, x, 0.3), "predictor");

    for (pi, &pv) in p.iter().enumerate() {
        let analytic = grads.get(pv).unwrap().to_vec();
        let k = rng.random_range(0..analytic.len());
        let mut shifted = net.clone();
        shifted.params.tensors[pi].data[k] += STEP;
        let up = predictor_loss(&shifted, &x, 0.3);
        shifted.params.tensors[pi].data[k] -= 2.0 * STEP;
        let down = predictor_loss(&shifted, &x, 0.3);
        assert_close(analytic[k], (up - down) / (2.0 * STEP), &net.params.names[pi]);
    }
}

#[test]
fn denoiser_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut net = DenoiserNet::new(SHAPE, cfg(), &mut rng).unwrap();
    jitter(&mut net.params, &mut rng);
    let x = inputs(&mut rng, 2);
    let t = [17.0, 640.0];
    let target: Vec<f64> = (0..2 * x[0].len()).map(|_| StandardNormal.sample(&mut rng)).collect();
    let rows: Vec<&[f64]> = x.iter().map(Vec::as_slice).collect();

    let mut g = Graph::new();
    let p = net.params.bind(&mut g, true);
    let xv = g.leaf(batch_rows(&rows, &SHAPE).unwrap(), true);
    let out = net.forward(&mut g, &p, xv, &t).unwrap();
    let loss = g.squared_error(out, &target, false).unwrap();
    let grads = g.backward(loss).unwrap();
    let f = |x: &[Vec<f64>], net: &DenoiserNet| {
        let rows: Vec<&[f64]> = x.iter().map(Vec::as_slice).collect();
        let mut g = Graph::new();
        let p = net.params.bind(&mut g, false);
        let xv = g.leaf(batch_rows(&rows, &SHAPE).unwrap(), false);
        let o = net.forward(&mut g, &p, xv, &t).unwrap();
        g.value(o).data.iter().zip(&target).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
    };
    let gx: Vec<Vec<f64>> = grads.get(xv).unwrap().chunks(x[0].len()).map(<[f64]>::to_vec).collect();
    check_coords(&mut rng, &x, &gx, &|x| f(x, &net), "denoiser");

    for (pi, &pv) in p.iter().enumerate() {
        let analytic = grads.get(pv).unwrap().to_vec();
        let k = rng.random_range(0..analytic.len());
        let mut moved = net.clone();
        moved.params.tensors[pi].data[k] += STEP;
        let up = f(&x, &moved);
        moved.params.tensors[pi].data[k] -= 2.0 * STEP;
        let down = f(&x, &moved);
        assert_close(analytic[k], (up - down) / (2.0 * STEP), &net.params.names[pi]);
    }
}

#[test]
fn guidance_gradient_flows_through_both_networks() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut den = DenoiserNet::new(SHAPE, cfg(), &mut rng).unwrap();
    jitter(&mut den.params, &mut rng);
    let pred = PredictorNet::new(SHAPE, cfg(), &mut rng).unwrap();
    let x = inputs(&mut rng, 3);
    let (t, alpha, alpha_prev, target) = (300, 0.6, 0.7, 0.5);

    let cost = |x: &[Vec<f64>]| {
        let rows: Vec<&[f64]> = x.iter().map(Vec::as_slice).collect();
        let mut g = Graph::new();
        let p = den.params.bind(&mut g, false);
        let xv = g.leaf(batch_rows(&rows, &SHAPE).unwrap(), false);
        let eps = den.forward(&mut g, &p, xv, &vec![t as f64; x.len()]).unwrap();
        let x0: Vec<Vec<f64>> = g
            .value(eps)
            .data
            .chunks(x[0].len())
            .zip(x)
            .map(|(e, xi)| predict_x0(xi, e, alpha))
            .collect();
        predictor_loss(&pred, &x0, target)
    };
    // Clipping puts kinks into the cost; the smooth path is checked here.
    let gcfg = GuidanceConfig { target, strength: 1.0, clip_x0: false, ..GuidanceConfig::default() };
    let step = guided_step(&den, Some(&pred), &x, t, alpha, alpha_prev, &gcfg).unwrap();
    let grad = step.grad.unwrap();
    check_coords(&mut rng, &x, &grad, &cost, "guidance");

    // The denoiser path contributes: freezing its noise estimate changes
    // the gradient.
    let eps = step.noise;
    let naive = |x: &[Vec<f64>]| {
        let x0: Vec<Vec<f64>> = x.iter().zip(&eps).map(|(xi, e)| predict_x0(xi, e, alpha)).collect();
        predictor_loss(&pred, &x0, target)
    };
    let (i, k) = (0, 0);
    let mut plus = x.clone();
    plus[i][k] += STEP;
    let mut minus = x.clone();
    minus[i][k] -= STEP;
    let frozen = (naive(&plus) - naive(&minus)) / (2.0 * STEP);
    assert!((frozen - grad[i][k]).abs() > 1e-6);
}

#[test]
fn small_guided_move_reduces_the_cost() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut den = DenoiserNet::new(SHAPE, cfg(), &mut rng).unwrap();
    jitter(&mut den.params, &mut rng);
    let pred = PredictorNet::new(SHAPE, cfg(), &mut rng).unwrap();
    let x = inputs(&mut rng, 2);
    let (t, alpha, alpha_prev) = (500, 0.4, 0.5);
    for clip_x0 in [false, true] {
        let gcfg = GuidanceConfig { target: -3.0, strength: 1e-3, clip_x0, ..GuidanceConfig::default() };
        let cost = |x: &[Vec<f64>]| {
            let s = guided_step(&den, Some(&pred), x, t, alpha, alpha_prev, &gcfg).unwrap();
            s.predicted.unwrap().iter().map(|y| (y - gcfg.target).powi(2)).sum::<f64>()
        };
        let step = guided_step(&den, Some(&pred), &x, t, alpha, alpha_prev, &gcfg).unwrap();
        let scale = gcfg.strength * (1.0 - alpha).sqrt();
        let moved: Vec<Vec<f64>> = x
            .iter()
            .zip(step.grad.as_ref().unwrap())
            .map(|(xi, gi)| xi.iter().zip(gi).map(|(a, b)| a - scale * b).collect())
            .collect();
        assert!(cost(&moved) < cost(&x), "clip {clip_x0}");
    }
}
