use ndarray::Array2;
use proptest::prelude::*;

use super::train::{listener_loss_and_grad, ListenerBatch};
use super::*;
use crate::data::Vocabulary;
use crate::nn::gradient_check;
use crate::synth::rng_for;

fn tiny_vocab() -> Vocabulary {
    Vocabulary::from_words(["red", "blue", "nose"])
}

fn tiny(kind: ListenerKind, seed: u64) -> ListenerModel {
    ListenerModel::new(kind, Regime::Contrastive, tiny_vocab(), 5, 4, 6, &mut rng_for(seed, 1))
}

fn toks(s: &str) -> Vec<String> {
    s.split_whitespace().map(String::from).collect()
}

#[test]
fn gradient_matches_finite_differences() {
    let m = tiny(ListenerKind::Simple, 3);
    let mut rng = rng_for(3, 2);
    let batch = ListenerBatch {
        ids: vec![vec![0, 4, 6, 1], vec![0, 5, 2, 1], vec![0, 4, 4, 1]],
        left: crate::nn::uniform(&mut rng, 3, 5, 1.0),
        right: crate::nn::uniform(&mut rng, 3, 5, 1.0),
        target_left: vec![true, false, true],
    };
    let report = gradient_check(&m.params, |p| listener_loss_and_grad(p, &batch), 64);
    assert!(report.max_relative_error < 1e-4, "{:?}", report.per_tensor);
}

#[test]
fn identical_images_are_a_coin_flip() {
    let m = tiny(ListenerKind::Simple, 1);
    let f = [0.3, -1.0, 2.0, 0.5, 0.1];
    let s = m.score(&f, &f, &toks("red nose")).unwrap();
    assert_eq!(s.p_left, 0.5);
    assert_eq!(s.p_right, 0.5);
}

#[test]
fn logit_fixture() {
    let s = ListenerScore::from_logits(3f64.ln(), 0.0);
    assert!((s.p_left - 0.75).abs() < 1e-12);
    assert!((s.p_right - 0.25).abs() < 1e-12);
}

#[test]
fn averaging_fixture() {
    let a = ListenerScore {
        p_left: 0.9,
        p_right: 0.1,
    };
    let b = ListenerScore {
        p_left: 0.7,
        p_right: 0.3,
    };
    assert_eq!(ListenerScore::average(a, b).p_left, 0.8);
}

#[test]
fn two_simple_equals_hand_average() {
    let m = tiny(ListenerKind::Simple, 2);
    let (f1, f2) = ([1.0, 0.0, 0.5, -0.2, 0.3], [0.0, 1.0, -0.5, 0.2, 0.9]);
    let (p1, p2) = (toks("red nose"), toks("blue"));
    let got = m.discerning_score(&f1, &f2, &p1, &p2).unwrap();
    let a = m.score(&f1, &f2, &p1).unwrap().p_left;
    let b = m.score(&f1, &f2, &p2).unwrap().p_right;
    assert_eq!(got.p_left, (a + b) / 2.0);
    // identical halves cancel
    let same = m.discerning_score(&f1, &f2, &p1, &p1).unwrap();
    assert!((same.p_left - 0.5).abs() < 1e-15);
    // empty second half degrades to the first phrase alone
    let solo = m.discerning_score(&f1, &f2, &p1, &[]).unwrap();
    assert_eq!(solo, m.score(&f1, &f2, &p1).unwrap());
}

#[test]
fn discerning_reads_serialized_pair() {
    let m = tiny(ListenerKind::Discerning, 4);
    let (f1, f2) = ([1.0, 0.0, 0.5, -0.2, 0.3], [0.0, 1.0, -0.5, 0.2, 0.9]);
    let got = m.discerning_score(&f1, &f2, &toks("red"), &toks("blue")).unwrap();
    let want = m.score(&f1, &f2, &toks("red vs blue")).unwrap();
    assert_eq!(got, want);
}

#[test]
fn checkpoint_round_trip() {
    let mut m = tiny(ListenerKind::Simple, 5);
    m.params.round_to_f32();
    let dir = tempfile::tempdir().unwrap();
    m.save(dir.path(), Default::default()).unwrap();
    let (back, _) = ListenerModel::load(dir.path(), Some(&m.arch())).unwrap();
    assert_eq!(back.params, m.params);
    let other = ListenerModel::new(
        ListenerKind::Simple,
        Regime::Contrastive,
        tiny_vocab(),
        5,
        4,
        7,
        &mut rng_for(0, 0),
    );
    assert!(matches!(
        ListenerModel::load(dir.path(), Some(&other.arch())),
        Err(Error::ManifestMismatch(_))
    ));
}

#[test]
fn wrong_feature_dim_is_rejected() {
    let m = tiny(ListenerKind::Simple, 1);
    assert!(matches!(
        m.score(&[1.0; 4], &[1.0; 4], &toks("red")),
        Err(Error::ShapeMismatch(_))
    ));
}

fn feature() -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-3.0f64..3.0, 5)
}

fn phrase() -> impl Strategy<Value = Vec<String>> {
    proptest::collection::vec(
        prop_oneof![Just("red"), Just("blue"), Just("nose"), Just("zebra")],
        1..5,
    )
    .prop_map(|v| v.into_iter().map(String::from).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn pair_probabilities_normalise_and_swap(seed in 0u64..50, f1 in feature(), f2 in feature(), p in phrase()) {
        let m = tiny(ListenerKind::Simple, seed);
        let s = m.score(&f1, &f2, &p).unwrap();
        prop_assert!((s.p_left + s.p_right - 1.0).abs() < 1e-6);
        prop_assert!((0.0..=1.0).contains(&s.p_left));
        let t = m.score(&f2, &f1, &p).unwrap();
        prop_assert_eq!(s.p_left, t.p_right);
        prop_assert_eq!(s.p_right, t.p_left);
    }
}

proptest! {
    #[test]
    fn softmax_is_monotone_in_left_logit(a in -50.0f64..50.0, b in -50.0f64..50.0, delta in 0.01f64..5.0) {
        let lo = ListenerScore::from_logits(a, b).p_left;
        let hi = ListenerScore::from_logits(a + delta, b).p_left;
        prop_assert!(hi > lo || lo == 1.0);
    }
}

#[test]
fn score_batch_agrees_with_single_calls() {
    let m = tiny(ListenerKind::Simple, 7);
    let mut rng = rng_for(7, 3);
    let left: Array2<f64> = crate::nn::uniform(&mut rng, 3, 5, 1.0);
    let right: Array2<f64> = crate::nn::uniform(&mut rng, 3, 5, 1.0);
    let phrases = vec![toks("red"), toks("blue nose"), toks("red red red")];
    let batch = m.score_batch(&left.view(), &right.view(), &phrases).unwrap();
    for i in 0..3 {
        let one = m
            .score(&left.row(i).to_vec(), &right.row(i).to_vec(), &phrases[i])
            .unwrap();
        assert!((one.p_left - batch[i].p_left).abs() < 1e-12);
    }
}
