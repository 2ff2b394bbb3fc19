#![allow(dead_code)]

use rand::Rng;
use tot_core::dataset::ComponentTimes;
use tot_core::model::{batch_loss, default_loss, gradients, Model, ModelConfig, Target, Variant};

pub const FD_STEP: f64 = 1e-5;

/// Tiny random configuration for gradient checks.
pub fn tiny_config(variant: Variant, rng: &mut impl Rng) -> ModelConfig {
    ModelConfig {
        variant,
        input_dim: rng.gen_range(2..=4),
        hidden_dim: rng.gen_range(2..=4),
        num_modes: rng.gen_range(2..=3),
        window_frames: rng.gen_range(3..=6),
        seed: rng.gen(),
    }
}

pub fn random_batch(
    model: &Model,
    readiness: bool,
    n: usize,
    rng: &mut impl Rng,
) -> Vec<(Vec<f64>, Target)> {
    let cfg = model.config();
    (0..n)
        .map(|_| {
            let w: Vec<f64> = (0..cfg.window_frames * cfg.input_dim)
                .map(|_| rng.gen_range(-1.0..1.0))
                .collect();
            let t = if readiness {
                Target::Readiness(rng.gen_range(0.05..0.95))
            } else {
                Target::Times(ComponentTimes::new(
                    rng.gen_range(0.0..3.0),
                    rng.gen_range(0.0..3.0),
                    rng.gen_range(0.0..3.0),
                ))
            };
            (w, t)
        })
        .collect()
}

pub fn as_examples(batch: &[(Vec<f64>, Target)]) -> Vec<(&[f64], Target)> {
    batch.iter().map(|(w, t)| (w.as_slice(), *t)).collect()
}

/// Largest elementwise relative error between the analytic gradient and
/// central differences, `|a - n| / max(|a|, |n|, 1e-6)`.
pub fn max_relative_error(model: &Model, batch: &[(Vec<f64>, Target)]) -> f64 {
    let kind = default_loss(model);
    let ex = as_examples(batch);
    let (_, grad) = gradients(model, ex.as_slice(), kind).unwrap();
    let analytic: Vec<Vec<f64>> = grad.tensors().iter().map(|t| t.to_vec()).collect();
    let mut probe = model.clone();
    let mut worst: f64 = 0.0;
    for (ti, g) in analytic.iter().enumerate() {
        for j in 0..g.len() {
            let orig = probe.tensors_mut()[ti][j];
            probe.tensors_mut()[ti][j] = orig + FD_STEP;
            let up = batch_loss(&probe, ex.as_slice(), kind).unwrap();
            probe.tensors_mut()[ti][j] = orig - FD_STEP;
            let down = batch_loss(&probe, ex.as_slice(), kind).unwrap();
            probe.tensors_mut()[ti][j] = orig;
            let numeric = (up - down) / (2.0 * FD_STEP);
            let rel = (g[j] - numeric).abs() / g[j].abs().max(numeric.abs()).max(1e-6);
            worst = worst.max(rel);
        }
    }
    worst
}
