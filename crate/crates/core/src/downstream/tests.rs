use std::collections::HashSet;

use ndarray::{array, Array2};

use super::*;
use crate::data::{tokenize_phrase, AnnotationRecord, FeatureStore, PhrasePair, Vocabulary};
use crate::listener::{ListenerKind, ListenerModel, Regime};
use crate::speaker::{SpeakerDims, SpeakerKind, SpeakerModel};
use crate::synth::rng_for;
use crate::Error;

fn toks(s: &str) -> Vec<String> {
    s.split_whitespace().map(String::from).collect()
}

fn record(id: &str, pairs: &[(&str, &str)]) -> AnnotationRecord {
    let pp = pairs
        .iter()
        .enumerate()
        .map(|(i, (l, r))| {
            PhrasePair::new(tokenize_phrase(l).unwrap(), tokenize_phrase(r).unwrap(), i as u8 + 1).unwrap()
        })
        .collect();
    AnnotationRecord::new(id, format!("{id}-a"), format!("{id}-b"), pp).unwrap()
}

fn corpus() -> Vec<AnnotationRecord> {
    vec![
        record("p1", &[("red body", "blue body"), ("pointy nose", "round nose")]),
        record("p2", &[("red body", "green body"), ("pointy nose", "round nose")]),
        record("p3", &[("blue body", "red body")]),
    ]
}

fn listener(kind: ListenerKind) -> ListenerModel {
    let vocab = Vocabulary::from_words(toks("red blue green body pointy round nose"));
    ListenerModel::new(kind, Regime::Contrastive, vocab, 5, 4, 6, &mut rng_for(4, 1))
}

fn store(n: usize, seed: u64) -> FeatureStore {
    let mut rng = rng_for(seed, 2);
    let m = crate::nn::uniform(&mut rng, n, 5, 1.0);
    let mut fs = FeatureStore::new(5);
    for (i, row) in m.rows().into_iter().enumerate() {
        let v: Vec<f32> = row.iter().map(|&x| x as f32).collect();
        fs.push(format!("img{i}"), &v).unwrap();
    }
    fs
}

#[test]
fn lexicon_orders_by_count_then_text() {
    let lex = build_lexicon(&corpus(), 5, false).unwrap();
    assert_eq!(lex.texts(), ["red body", "blue body", "pointy nose", "round nose", "green body"]);
    assert_eq!(build_lexicon(&corpus(), 2, false).unwrap().texts(), ["red body", "blue body"]);
    assert!(matches!(
        build_lexicon(&corpus(), 6, false),
        Err(Error::KTooLarge { requested: 6, available: 5 })
    ));
    assert!(build_lexicon(&corpus(), 0, false).is_err());
    assert_eq!(lex, build_lexicon(&corpus(), 5, false).unwrap());
    assert_ne!(lex.source_hash, build_lexicon(&corpus()[..2], 4, false).unwrap().source_hash);
}

#[test]
fn opponent_lexicon_keeps_direction() {
    let lex = build_lexicon(&corpus(), 4, true).unwrap();
    assert_eq!(
        lex.texts(),
        ["pointy nose vs round nose", "blue body vs red body", "red body vs blue body", "red body vs green body"]
    );
    assert!(lex.opponent);
    let sl = listener(ListenerKind::Simple);
    let fs = store(2, 1);
    assert!(matches!(embed_images(&sl, &lex, &fs, &["img0"]), Err(Error::ConfigError(_))));
    let dl = listener(ListenerKind::Discerning);
    assert_eq!(embed_images(&dl, &lex, &fs, &["img0"]).unwrap()[0].vector.len(), 4);
}

#[test]
fn embedding_entries_are_single_dot_products() {
    let sl = listener(ListenerKind::Simple);
    let lex = build_lexicon(&corpus(), 5, false).unwrap();
    let fs = store(4, 2);
    let embs = embed_images(&sl, &lex, &fs, &["img0", "img1", "img2", "img3"]).unwrap();
    for e in &embs {
        let x = fs.get_f64(&e.image_id).unwrap();
        let phi = sl.image_embedding(&Array2::from_shape_vec((1, 5), x.clone()).unwrap().view()).unwrap();
        for (i, p) in lex.phrases.iter().enumerate() {
            let theta = sl.phrase_embedding(p);
            let direct: f64 = phi.row(0).iter().zip(theta.iter()).map(|(a, b)| a * b).sum();
            assert!((direct - e.vector[i]).abs() < 1e-6);
        }
        let single = embed_image(&sl, &lex, &e.image_id, &x).unwrap();
        assert_eq!(&single, e);
    }
    // the same feature under two names embeds identically
    let x = fs.get_f64("img0").unwrap();
    assert_eq!(embed_image(&sl, &lex, "z", &x).unwrap().vector, embs[0].vector);
    assert!(matches!(embed_image(&sl, &lex, "z", &x[..3]), Err(Error::ShapeMismatch(_))));
}

#[test]
fn embedding_is_linear_in_the_image_head() {
    let mut sl = listener(ListenerKind::Simple);
    let lex = build_lexicon(&corpus(), 5, false).unwrap();
    let fs = store(1, 3);
    let before = embed_images(&sl, &lex, &fs, &["img0"]).unwrap()[0].vector.clone();
    sl.params.get_mut("img.w").mapv_inplace(|v| v * 2.5);
    sl.params.get_mut("img.b").mapv_inplace(|v| v * 2.5);
    let after = embed_images(&sl, &lex, &fs, &["img0"]).unwrap()[0].vector.clone();
    for (a, b) in before.iter().zip(&after) {
        assert!((a * 2.5 - b).abs() < 1e-9);
    }
}

#[test]
fn classifier_separates_blobs() {
    let mut rng = rng_for(5, 3);
    let noise = crate::nn::uniform(&mut rng, 120, 3, 0.3);
    let centers = array![[2.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 2.0]];
    let mut x = Array2::zeros((120, 3));
    let mut y = Vec::new();
    for i in 0..120 {
        let c = i % 3;
        x.row_mut(i).assign(&(&centers.row(c) + &noise.row(i)));
        y.push(c * 10);
    }
    let (train, test) = (x.slice(ndarray::s![..60, ..]), x.slice(ndarray::s![60.., ..]));
    let (model, acc) = classify(&train, &y[..60], &test, &y[60..], &ClassifierConfig::default()).unwrap();
    assert_eq!(acc, 1.0);
    assert_eq!(model.classes, vec![0, 10, 20]);
    assert_eq!(model.predict(&centers.view()).unwrap(), vec![0, 10, 20]);
}

#[test]
fn classifier_rejects_degenerate_labels() {
    let x = Array2::<f64>::zeros((4, 2));
    let cfg = ClassifierConfig::default();
    assert!(matches!(
        classify(&x.view(), &[1, 1, 1, 1], &x.view(), &[1, 1, 1, 1], &cfg),
        Err(Error::DegenerateLabels(_))
    ));
    assert!(matches!(
        classify(&x.view(), &[1, 1, 1, 2], &x.view(), &[1, 1, 1, 1], &cfg),
        Err(Error::DegenerateLabels(_))
    ));
}

#[test]
fn retrieval_sorts_by_score_and_keeps_ties_stable() {
    let sl = listener(ListenerKind::Simple);
    let fs = store(6, 4);
    let ids: Vec<String> = (0..6).map(|i| format!("img{i}")).collect();
    let q = vec![toks("red body")];
    let hits = retrieve(&sl, &q, &fs, &ids, 6, QueryStrategy::Concatenate).unwrap();
    assert_eq!(hits.len(), 6);
    for w in hits.windows(2) {
        assert!(w[0].score >= w[1].score);
    }
    let theta = sl.phrase_embedding(&q[0]);
    for h in &hits {
        let phi = sl.image_embedding(&fs.matrix(&[&h.image_id]).unwrap().view()).unwrap();
        let s: f64 = phi.row(0).iter().zip(theta.iter()).map(|(a, b)| a * b).sum();
        assert!((s - h.score).abs() < 1e-9);
    }
    // duplicated features tie; the earlier id stays first
    let dup = vec!["img2".to_string(), "img2".to_string()];
    let hits = retrieve(&sl, &q, &fs, &dup, 1, QueryStrategy::Concatenate).unwrap();
    assert_eq!(hits.len(), 1);
}

#[test]
fn multi_phrase_queries() {
    let sl = listener(ListenerKind::Simple);
    let fs = store(3, 6);
    let ids = ["img0", "img1", "img2"];
    let q = vec![toks("red body"), toks("pointy nose")];
    let joined = retrieve(&sl, &[toks("red body pointy nose")], &fs, &ids, 3, QueryStrategy::Concatenate).unwrap();
    assert_eq!(retrieve(&sl, &q, &fs, &ids, 3, QueryStrategy::Concatenate).unwrap(), joined);
    let fused = retrieve(&sl, &q, &fs, &ids, 3, QueryStrategy::Fusion).unwrap();
    for h in &fused {
        let one = |p: &str| {
            retrieve(&sl, &[toks(p)], &fs, &[h.image_id.as_str()], 1, QueryStrategy::Concatenate).unwrap()[0].score
        };
        assert!((one("red body") + one("pointy nose") - h.score).abs() < 1e-9);
    }
    assert!(matches!(
        retrieve(&sl, &[], &fs, &ids, 3, QueryStrategy::Concatenate),
        Err(Error::EmptyQuery)
    ));
    assert!(matches!(
        retrieve(&sl, &[vec![]], &fs, &ids, 3, QueryStrategy::Concatenate),
        Err(Error::EmptyQuery)
    ));
}

#[test]
fn average_precision_fixtures() {
    let rel: HashSet<String> = ["a", "c"].iter().map(|s| s.to_string()).collect();
    assert_eq!(average_precision(&["a", "c", "b"], &rel), 1.0);
    assert!((average_precision(&["a", "b", "c"], &rel) - (1.0 + 2.0 / 3.0) / 2.0).abs() < 1e-12);
    assert_eq!(average_precision(&["b", "d"], &rel), 0.0);
    assert_eq!(average_precision(&["a"], &HashSet::new()), 0.0);
}

fn speaker(seed: u64) -> SpeakerModel {
    let vocab = Vocabulary::from_words(toks("red blue body nose"));
    let dims = SpeakerDims {
        feature: 5,
        image_hidden: 6,
        embed: 4,
        hidden: 7,
    };
    SpeakerModel::new(SpeakerKind::Discerning, vocab, dims, false, 0.0, &mut rng_for(seed, 1))
}

fn cfg() -> ExplainConfig {
    ExplainConfig {
        beam_width: 5,
        max_len: 5,
        top_n: 50,
    }
}

#[test]
fn swapping_categories_swaps_lists() {
    let ds = speaker(7);
    let fs = store(5, 7);
    let a = ["img0", "img1"];
    let b = ["img2", "img3", "img4"];
    let ab = explain_categories(&ds, &fs, &a, &b, &cfg()).unwrap();
    let ba = explain_categories(&ds, &fs, &b, &a, &cfg()).unwrap();
    assert_eq!(ab.a, ba.b);
    assert_eq!(ab.b, ba.a);
    assert!(!ab.a.is_empty());
    for side in [&ab.a, &ab.b] {
        let uniq: HashSet<&String> = side.iter().map(|e| &e.phrase).collect();
        assert_eq!(uniq.len(), side.len());
        for w in side.windows(2) {
            let k = |e: &ExplanationEntry| (-e.image_frequency, -e.phrase_frequency, e.phrase.clone());
            assert!(k(&w[0]) < k(&w[1]));
        }
    }
}

#[test]
fn identical_categories_cancel() {
    let ds = speaker(8);
    let fs = store(3, 8);
    let a = ["img0", "img1", "img2"];
    let r = explain_categories(&ds, &fs, &a, &a, &cfg()).unwrap();
    assert_eq!(r.a, r.b);
    for e in &r.a {
        assert_eq!((e.image_frequency, e.phrase_frequency), (0, 0));
    }
    let mut sorted = r.a.clone();
    sorted.sort_by(|x, y| x.phrase.cmp(&y.phrase));
    assert_eq!(sorted, r.a);
}

#[test]
fn explanation_preconditions() {
    let fs = store(2, 9);
    let empty: [&str; 0] = [];
    assert!(matches!(
        explain_categories(&speaker(1), &fs, &empty, &["img0"], &cfg()),
        Err(Error::EmptyCategory)
    ));
    let vocab = Vocabulary::from_words(toks("red"));
    let dims = SpeakerDims {
        feature: 5,
        image_hidden: 6,
        embed: 4,
        hidden: 7,
    };
    let ss = SpeakerModel::new(SpeakerKind::Simple, vocab, dims, false, 0.0, &mut rng_for(1, 1));
    assert!(matches!(
        explain_categories(&ss, &fs, &["img0"], &["img1"], &cfg()),
        Err(Error::ConfigError(_))
    ));
}

#[test]
fn export_round_trips_bit_exact() {
    let sl = listener(ListenerKind::Simple);
    let lex = build_lexicon(&corpus(), 5, false).unwrap();
    let phrases = export_phrase_embeddings(&sl, &lex.phrases).unwrap();
    assert_eq!(phrases.len(), 5);
    assert_eq!(phrases.dim(), sl.hidden());
    let fs = store(3, 10);
    let images = export_image_embeddings(&sl, &fs, &["img0", "img1", "img2"]).unwrap();
    let dir = tempfile::tempdir().unwrap();
    for (name, s) in [("p.bin", &phrases), ("i.bin", &images)] {
        let path = dir.path().join(name);
        s.write(&path).unwrap();
        let back = FeatureStore::read(&path).unwrap();
        assert_eq!(back.ids(), s.ids());
        for i in 0..s.len() {
            let a: Vec<u32> = s.row(i).iter().map(|v| v.to_bits()).collect();
            let b: Vec<u32> = back.row(i).iter().map(|v| v.to_bits()).collect();
            assert_eq!(a, b);
        }
    }
}
