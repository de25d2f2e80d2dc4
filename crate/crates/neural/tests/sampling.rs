// SPDX-License-Identifier: Apache-2.0

use acdiff_core::seeds::{dadda, sklansky, wallace};
use acdiff_core::Design;
use acdiff_neural::schedule::{ddim_step, forward_diffuse, predict_x0, reflect};
use acdiff_neural::{
    encode_designs, guided_step, sample_guided, sample_unconditional, train_diffusion, train_predictor, DenoiserNet, GuidanceConfig,
    NetConfig, NoiseSchedule, PredictorNet, ScheduleKind, TrainConfig,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn small() -> NetConfig {
    NetConfig { base_channels: 4, time_dim: 8 }
}

fn normal(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

#[test]
fn diffuse_and_recover_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let s = NoiseSchedule::new(1000, ScheduleKind::Cosine).unwrap();
    for t in [1, 10, 500, 990] {
        let x0 = normal(&mut rng, 64);
        let eps = normal(&mut rng, 64);
        let back = predict_x0(&forward_diffuse(&x0, &eps, s.alpha(t)), &eps, s.alpha(t));
        let err = x0.iter().zip(&back).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err <= 1e-6, "t={t}: {err}");
    }
}

#[test]
fn exact_noise_ddim_follows_the_forward_trajectory() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let s = NoiseSchedule::new(1000, ScheduleKind::LinearAlphaBar).unwrap();
    let x0 = normal(&mut rng, 16);
    let eps = normal(&mut rng, 16);
    let tau = s.strided(20).unwrap();
    let mut x = forward_diffuse(&x0, &eps, s.alpha(tau[0]));
    for w in tau.windows(2) {
        x = ddim_step(&x, &eps, s.alpha(w[0]), s.alpha(w[1]));
        let expect = forward_diffuse(&x0, &eps, s.alpha(w[1]));
        assert!(x.iter().zip(&expect).all(|(a, b)| (a - b).abs() < 1e-9));
    }
    assert!(x.iter().zip(&x0).all(|(a, b)| (a - b).abs() < 1e-9));
}

#[test]
fn reflection_has_the_forward_moments() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (alpha, alpha_prev, x) = (0.45, 0.6, 0.8);
    let trials = 10_000;
    let draws: Vec<f64> = (0..trials).map(|_| reflect(&[x], alpha, alpha_prev, &mut rng)[0]).collect();
    let mean = draws.iter().sum::<f64>() / trials as f64;
    let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (trials - 1) as f64;
    let want_var = 1.0 - alpha / alpha_prev;
    assert!((var - want_var).abs() <= 0.05 * want_var, "variance {var} vs {want_var}");
    assert!((mean - (alpha / alpha_prev).sqrt() * x).abs() < 0.02);
}

fn ct_data() -> (Vec<Design>, acdiff_neural::DesignLayout, Vec<Vec<f64>>) {
    let designs = vec![Design::Ct(wallace(4).unwrap()), Design::Ct(dadda(4).unwrap())];
    let refs: Vec<&Design> = designs.iter().collect();
    let (layout, rows) = encode_designs(&refs).unwrap();
    (designs, layout, rows)
}

#[test]
fn unguided_single_pass_is_plain_ddim() {
    let (_, layout, _) = ct_data();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut den = DenoiserNet::new(layout.shape, small(), &mut rng).unwrap();
    for t in &mut den.params.tensors {
        for v in &mut t.data {
            let e: f64 = StandardNormal.sample(&mut rng);
            *v += 0.05 * e;
        }
    }
    let pred = PredictorNet::new(layout.shape, small(), &mut rng).unwrap();
    let s = NoiseSchedule::new(1000, ScheduleKind::Cosine).unwrap();
    let cfg = GuidanceConfig {
        strength: 0.0,
        reflection_steps: 1,
        sampling_steps: 5,
        clip_x0: false,
        ..GuidanceConfig::default()
    };
    let got = sample_guided(2, &den, Some(&pred), &s, &layout, &cfg, 9).unwrap();
    let clipped = GuidanceConfig { clip_x0: true, ..cfg.clone() };
    let a = sample_guided(3, &den, Some(&pred), &s, &layout, &clipped, 9).unwrap();
    let b = sample_unconditional(3, &den, &s, &layout, 5, 9).unwrap();
    for (a, b) in a.iter().zip(&b) {
        assert_eq!(a.raw, b.raw);
    }

    // Same chains by hand.
    let tau = s.strided(5).unwrap();
    for (i, sample) in got.iter().enumerate() {
        let mut r = ChaCha8Rng::seed_from_u64(9);
        r.set_stream(i as u64);
        let mut x = vec![normal(&mut r, layout.row_len())];
        for w in tau.windows(2) {
            let step = guided_step(&den, None, &x, w[0], s.alpha(w[0]), s.alpha(w[1]), &cfg).unwrap();
            let manual = ddim_step(&x[0], &step.noise[0], s.alpha(w[0]), s.alpha(w[1]));
            assert_eq!(step.next[0], manual);
            x = step.next;
        }
        assert_eq!(sample.raw, x[0]);
        assert!(sample.predicted.is_some());
    }
}

#[test]
fn sampling_is_reproducible_and_batch_independent() {
    let (_, layout, _) = ct_data();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let den = DenoiserNet::new(layout.shape, small(), &mut rng).unwrap();
    let pred = PredictorNet::new(layout.shape, small(), &mut rng).unwrap();
    let s = NoiseSchedule::new(200, ScheduleKind::Cosine).unwrap();
    let mut cfg = GuidanceConfig {
        reflection_steps: 3,
        sampling_steps: 4,
        batch_size: 4,
        ..GuidanceConfig::default()
    };
    let a = sample_guided(5, &den, Some(&pred), &s, &layout, &cfg, 21).unwrap();
    cfg.batch_size = 2;
    let b = sample_guided(5, &den, Some(&pred), &s, &layout, &cfg, 21).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert!(x.raw.iter().zip(&y.raw).all(|(p, q)| (p - q).abs() < 1e-12));
        assert_eq!(x.design, y.design);
        assert!(!x.failed);
        assert_eq!(x.violations, x.design.as_ref().unwrap().violations().len());
    }
    let c = sample_guided(5, &den, Some(&pred), &s, &layout, &cfg, 22).unwrap();
    assert_ne!(a[0].raw, c[0].raw);
}

#[test]
fn guidance_moves_predictions_toward_the_target() {
    let (_, layout, rows) = ct_data();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let den = DenoiserNet::new(layout.shape, small(), &mut rng).unwrap();
    let mut pred = PredictorNet::new(layout.shape, small(), &mut rng).unwrap();
    let tc = TrainConfig { epochs: 100, batch_size: 2, learning_rate: 1e-2, ..TrainConfig::default() };
    train_predictor(&mut pred, &rows, &[1.0, 0.0], &tc, &mut rng).unwrap();
    let s = NoiseSchedule::new(1000, ScheduleKind::Cosine).unwrap();
    let base = GuidanceConfig {
        target: -1.0,
        strength: 0.0,
        reflection_steps: 2,
        sampling_steps: 10,
        batch_size: 16,
        clip_x0: true,
    };
    let plain = sample_guided(16, &den, Some(&pred), &s, &layout, &base, 3).unwrap();
    let guided_cfg = GuidanceConfig { strength: 10.0, ..base };
    let guided = sample_guided(16, &den, Some(&pred), &s, &layout, &guided_cfg, 3).unwrap();
    let mean = |xs: &[acdiff_neural::Sample]| xs.iter().map(|s| s.predicted.unwrap()).sum::<f64>() / xs.len() as f64;
    assert!(mean(&guided) < mean(&plain), "guided {} vs plain {}", mean(&guided), mean(&plain));
}

#[test]
fn diffusion_training_reduces_loss_and_checkpoints_round_trip() {
    let designs = [Design::Prefix(sklansky(8).unwrap())];
    let (layout, rows) = encode_designs(&designs.iter().collect::<Vec<_>>()).unwrap();
    let data: Vec<Vec<f64>> = (0..16).map(|_| rows[0].clone()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut den = DenoiserNet::new(layout.shape, small(), &mut rng).unwrap();
    let s = NoiseSchedule::new(1000, ScheduleKind::Cosine).unwrap();
    let tc = TrainConfig { epochs: 40, batch_size: 8, learning_rate: 3e-3, ..TrainConfig::default() };
    let report = train_diffusion(&mut den, &data, &s, &tc, &mut rng).unwrap();
    let head: f64 = report.epoch_losses[..5].iter().sum::<f64>() / 5.0;
    let tail: f64 = report.epoch_losses[35..].iter().sum::<f64>() / 5.0;
    assert!(tail < head, "{:?}", report.epoch_losses);

    let dir = tempfile::tempdir().unwrap();
    den.save(&dir.path().join("den.json")).unwrap();
    let back = DenoiserNet::load(&dir.path().join("den.json")).unwrap();
    assert_eq!(back.params, den.params);
    assert!(PredictorNet::load(&dir.path().join("den.json")).is_err());

    let mut pred = PredictorNet::new(layout.shape, small(), &mut rng).unwrap();
    pred.label_mean = 0.25;
    pred.save(&dir.path().join("pred.json")).unwrap();
    let back = PredictorNet::load(&dir.path().join("pred.json")).unwrap();
    assert_eq!((back.params, back.label_mean), (pred.params, 0.25));
    report.write_loss_csv(&dir.path().join("loss.csv")).unwrap();
    let text = std::fs::read_to_string(dir.path().join("loss.csv")).unwrap();
    assert!(text.starts_with("# format_version: 1\nepoch,loss\n"));
}

#[test]
fn training_is_deterministic_under_a_seed() {
    let (_, layout, rows) = ct_data();
    let run = || {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut den = DenoiserNet::new(layout.shape, small(), &mut rng).unwrap();
        let mut pred = PredictorNet::new(layout.shape, small(), &mut rng).unwrap();
        let s = NoiseSchedule::new(100, ScheduleKind::Cosine).unwrap();
        let tc = TrainConfig { epochs: 3, batch_size: 1, learning_rate: 1e-3, input_noise: 0.3, ..TrainConfig::default() };
        let a = train_diffusion(&mut den, &rows, &s, &tc, &mut rng).unwrap();
        let b = train_predictor(&mut pred, &rows, &[0.9, 1.1], &tc, &mut rng).unwrap();
        (a, b, den.params, pred.params)
    };
    assert_eq!(run(), run());
}
