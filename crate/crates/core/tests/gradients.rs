mod common;

use common::{as_examples, max_relative_error, random_batch, tiny_config};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tot_core::model::{default_loss, gradients, LossKind, Model, Variant};

fn check(variant: Variant, readiness: bool, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for round in 0..3 {
        let cfg = tiny_config(variant, &mut rng);
        let model = if readiness {
            Model::new_readiness(cfg).unwrap()
        } else {
            Model::new(cfg).unwrap()
        };
        let batch = random_batch(&model, readiness, 3, &mut rng);
        let err = max_relative_error(&model, &batch);
        assert!(
            err < 1e-4,
            "{variant} round {round} ({cfg:?}): relative error {err:e}"
        );
    }
}

#[test]
fn baseline_l1() {
    check(Variant::BaselineLstm, false, 1);
}

#[test]
fn independent_l1() {
    check(Variant::IndependentLstms, false, 2);
}

#[test]
fn baseline_mm_min_of_k() {
    check(Variant::BaselineLstmMm, false, 3);
}

#[test]
fn independent_mm_min_of_k() {
    check(Variant::IndependentLstmsMm, false, 4);
}

#[test]
fn readiness_heads() {
    check(Variant::BaselineLstm, true, 5);
    check(Variant::IndependentLstms, true, 6);
}

#[test]
fn duplicated_batch_has_same_mean_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for variant in Variant::ALL {
        let model = Model::new(tiny_config(variant, &mut rng)).unwrap();
        let batch = random_batch(&model, false, 4, &mut rng);
        let twice: Vec<_> = batch.iter().chain(batch.iter()).cloned().collect();
        let kind = default_loss(&model);
        let (l1, g1) = gradients(&model, as_examples(&batch).as_slice(), kind).unwrap();
        let (l2, g2) = gradients(&model, as_examples(&twice).as_slice(), kind).unwrap();
        assert!((l1 - l2).abs() < 1e-12);
        for (a, b) in g1.tensors().iter().zip(g2.tensors()) {
            for (x, y) in a.iter().zip(b.iter()) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn wrong_loss_is_rejected() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let model = Model::new(tiny_config(Variant::BaselineLstm, &mut rng)).unwrap();
    let batch = random_batch(&model, false, 1, &mut rng);
    assert!(gradients(&model, as_examples(&batch).as_slice(), LossKind::MinOfK).is_err());
}
