mod common;

use common::{random_mask, random_prob_map, random_tensor, rng};
use proptest::prelude::*;
use rand::Rng;
use stc::losses::{
    build_simple_target, multilabel_ce, multilabel_ce_grad, singlelabel_ce, singlelabel_ce_grad,
    ProbMap, TargetProbMap,
};
use stc::saliency::SaliencyMap;
use stc::tensor_grad::{channel_softmax, max_relative_error, numeric_grad, Tensor};

fn random_target(k: usize, h: usize, w: usize, r: &mut rand_chacha::ChaCha8Rng) -> TargetProbMap {
    let p = random_prob_map(k, h, w, r);
    TargetProbMap::new(p.tensor().clone()).unwrap()
}

fn loss_of_logits(logits: &Tensor, target: &TargetProbMap) -> f64 {
    multilabel_ce(&ProbMap::from_logits(logits).unwrap(), target).unwrap()
}

#[test]
fn multilabel_gradient_matches_finite_differences() {
    let mut r = rng(5);
    for _ in 0..5 {
        let (k, h, w) = (
            r.random_range(2..6),
            r.random_range(1..5),
            r.random_range(1..5),
        );
        let logits = random_tensor(&[1, k, h, w], &mut r).scale(2.0);
        let target = random_target(k, h, w, &mut r);
        let (loss, grad) = multilabel_ce_grad(&logits, &target).unwrap();
        assert!((loss - loss_of_logits(&logits, &target)).abs() < 1e-14);
        let numeric = numeric_grad(|l| loss_of_logits(l, &target), &logits, 1e-5);
        assert!(max_relative_error(&grad, &numeric) < 1e-6);
    }
}

#[test]
fn singlelabel_gradient_matches_finite_differences() {
    let mut r = rng(6);
    let logits = random_tensor(&[1, 4, 3, 5], &mut r);
    let mask = random_mask(3, 5, 4, &mut r);
    let (_, grad) = singlelabel_ce_grad(&logits, &mask).unwrap();
    let numeric = numeric_grad(
        |l| singlelabel_ce(&ProbMap::from_logits(l).unwrap(), &mask).unwrap(),
        &logits,
        1e-5,
    );
    assert!(max_relative_error(&grad, &numeric) < 1e-6);
}

#[test]
fn hand_values() {
    let half = ProbMap::new(Tensor::full(&[2, 2, 2], 0.5)).unwrap();
    let one_hot =
        TargetProbMap::new(Tensor::from_fn(&[2, 2, 2], |i| (i >= 4) as u8 as f64)).unwrap();
    assert!((multilabel_ce(&half, &one_hot).unwrap() - 0.5f64.ln().abs()).abs() < 1e-15);
    let uniform_target = TargetProbMap::new(Tensor::full(&[2, 2, 2], 0.5)).unwrap();
    assert!((multilabel_ce(&half, &uniform_target).unwrap() - 2f64.ln()).abs() < 1e-15);

    let mut data = vec![0.0025; 5 * 2 * 2];
    data[..4].fill(0.99);
    let confident = ProbMap::new(Tensor::new(vec![5, 2, 2], data).unwrap()).unwrap();
    let zeros = stc::data::LabelMap::filled(2, 2, 0);
    let loss = singlelabel_ce(&confident, &zeros).unwrap();
    assert!((loss + 0.99f64.ln()).abs() < 1e-15);
}

#[test]
fn simple_target_from_saliency() {
    let sal = SaliencyMap::new(1, 2, vec![0.8, 0.0]).unwrap();
    let t = build_simple_target(&sal, 2, 3, 1, 2).unwrap();
    let d = t.tensor().data();
    // Channels 0..=3, each one row of two pixels.
    assert!((d[0] - 0.2).abs() < 1e-15 && d[1] == 1.0);
    assert!(d[2] == 0.0 && d[3] == 0.0);
    assert!((d[4] - 0.8).abs() < 1e-15 && d[5] == 0.0);
    assert!(d[6] == 0.0 && d[7] == 0.0);
    assert!(build_simple_target(&sal, 0, 3, 1, 2).is_err());
    assert!(build_simple_target(&sal, 4, 3, 1, 2).is_err());
}

proptest! {
    #[test]
    fn one_hot_multilabel_equals_singlelabel(seed in any::<u64>(), k in 2usize..7, h in 1usize..6, w in 1usize..6) {
        let mut r = rng(seed);
        let pred = random_prob_map(k, h, w, &mut r);
        let mask = random_mask(h, w, k as u8, &mut r);
        let a = multilabel_ce(&pred, &TargetProbMap::one_hot(&mask, k).unwrap()).unwrap();
        let b = singlelabel_ce(&pred, &mask).unwrap();
        prop_assert!((a - b).abs() <= 1e-12);
    }

    #[test]
    fn gradient_channel_sums_vanish(seed in any::<u64>(), k in 2usize..7) {
        let mut r = rng(seed);
        let logits = random_tensor(&[1, k, 3, 4], &mut r).scale(5.0);
        let (_, g) = multilabel_ce_grad(&logits, &random_target(k, 3, 4, &mut r)).unwrap();
        for px in 0..12 {
            let s: f64 = (0..k).map(|c| g.data()[c * 12 + px]).sum();
            prop_assert!(s.abs() <= 1e-12);
        }
    }

    #[test]
    fn losses_are_non_negative_and_shift_invariant(seed in any::<u64>(), shift in -20.0f64..20.0) {
        let mut r = rng(seed);
        let logits = random_tensor(&[1, 3, 2, 3], &mut r);
        let target = random_target(3, 2, 3, &mut r);
        let a = loss_of_logits(&logits, &target);
        let b = loss_of_logits(&logits.map(|v| v + shift), &target);
        prop_assert!(a >= 0.0);
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn uniform_prediction_costs_log_k(seed in any::<u64>(), k in 2usize..8) {
        let mut r = rng(seed);
        let p = channel_softmax(&Tensor::zeros(&[1, k, 3, 3])).unwrap();
        let pred = ProbMap::new(p.reshape(vec![k, 3, 3]).unwrap()).unwrap();
        let loss = singlelabel_ce(&pred, &random_mask(3, 3, k as u8, &mut r)).unwrap();
        prop_assert!((loss - (k as f64).ln()).abs() <= 1e-9);
    }

    #[test]
    fn simple_targets_are_distributions(seed in any::<u64>(), c in 1u8..5) {
        let mut r = rng(seed);
        let vals: Vec<f64> = (0..64).map(|_| r.random_range(0.0..=1.0)).collect();
        let sal = SaliencyMap::new(8, 8, vals).unwrap();
        let t = build_simple_target(&sal, c, 4, 3, 5).unwrap();
        for px in 0..15 {
            let s: f64 = (0..5).map(|ch| t.tensor().data()[ch * 15 + px]).sum();
            prop_assert!((s - 1.0).abs() < 1e-15);
        }
    }
}
