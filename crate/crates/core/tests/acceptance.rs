//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so results print as they are measured.
//! Failing criteria are reported, not fatal; set
//! `PHRASEGAME_ACCEPTANCE_STRICT=1` to exit non-zero on any failure.

use std::collections::HashSet;
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use ndarray::s;
use rand::Rng;

use phrasegame::data::{build_vocabulary, FeatureStore, Vocabulary, END_ID, START_ID};
use phrasegame::downstream::{
    average_precision, build_lexicon, classify, embed_images, explain_categories, retrieve, ClassifierConfig,
    ExplainConfig, ExplanationEntry, QueryStrategy,
};
use phrasegame::eval::{annotation_tasks, position_accuracy, rg_accuracy, EvalReport, HumanSummary, ModelJudge};
use phrasegame::harness::{run_pipeline, ExperimentConfig, PipelineOutput, REPORT_FILE, REPORT_TABLE_FILE};
use phrasegame::listener::{
    listener_loss_and_grad, train_listener, ListenerBatch, ListenerKind, ListenerModel, ListenerScore, Regime,
};
use phrasegame::nn::{gradient_check, uniform};
use phrasegame::pragmatics::{combine, rerank, RerankConfig};
use phrasegame::speaker::{
    beam_decode, speaker_loss_and_grad, DecodedRecord, SpeakerBatch, SpeakerDims, SpeakerKind, SpeakerModel, Target,
};
use phrasegame::synth::{generate_category_pair, generate_dataset, rng_for, GenConfig, SlotValue, SynthObject};

const GRAD_TOLERANCE: f64 = 1e-4;
const GRAD_TIME_LIMIT: Duration = Duration::from_secs(60);
const BEAM_LOGPROB_TOLERANCE: f64 = 1e-9;
const NORMALIZATION_TOLERANCE: f64 = 1e-6;
const RERANK_TOLERANCE: f64 = 1e-12;
const SL_ACCURACY_MIN: f64 = 0.90;
const SL_HELD_OUT_TASKS: usize = 500;
const PIPELINE_TIME_LIMIT: Duration = Duration::from_secs(15 * 60);
const SPEAKER_GAP_MIN: f64 = 0.05;
const RERANK_GAIN_MIN: f64 = 0.05;
const CLASSIFY_MIN: f64 = 0.90;
const CLASSIFY_SLACK: f64 = 0.02;
const RETRIEVAL_MAP_MIN: f64 = 0.9;
const RETRIEVAL_QUERIES: usize = 10;
const EXPLAIN_PAIRS: usize = 20;
const EXPLAIN_PER_SIDE: usize = 10;
const EXPLAIN_PASS_SHARE: f64 = 0.9;
/// Stream for the category pairs drawn by the explanation check.
const EXPLAIN_STREAM: u64 = 500;

type Check = Result<(bool, String), String>;

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

struct Suite {
    passed: usize,
    failed: usize,
}

impl Suite {
    fn record(&mut self, id: usize, name: &str, started: Instant, outcome: Check) {
        let (ok, detail) = outcome.unwrap_or_else(|e| (false, format!("error: {e}")));
        if ok {
            self.passed += 1;
        } else {
            self.failed += 1;
        }
        println!(
            "criterion {id:>2} {} {name}: {detail} [{:.1}s]",
            if ok { "PASS" } else { "FAIL" },
            started.elapsed().as_secs_f64()
        );
    }
}

fn tiny_vocab() -> Vocabulary {
    Vocabulary::from_words(["red", "blue", "nose", "pointy"])
}

fn gradients() -> Check {
    let started = Instant::now();
    let mut worst = 0.0f64;
    let mut probes = 0;
    let dims = SpeakerDims {
        feature: 5,
        image_hidden: 6,
        embed: 4,
        hidden: 7,
    };
    for seed in 0..3 {
        for (kind, bn) in [
            (SpeakerKind::Simple, false),
            (SpeakerKind::Discerning, false),
            (SpeakerKind::Discerning, true),
        ] {
            let m = SpeakerModel::new(kind, tiny_vocab(), dims, bn, 0.0, &mut rng_for(seed, 1));
            let mut rng = rng_for(seed, 2);
            let batch = SpeakerBatch {
                ids: vec![vec![START_ID, 4, 6, END_ID], vec![START_ID, 5, 7, END_ID], vec![START_ID, 4, 3, END_ID]],
                target: uniform(&mut rng, 3, 5, 1.0),
                other: (kind == SpeakerKind::Discerning).then(|| uniform(&mut rng, 3, 5, 1.0)),
            };
            let r = gradient_check(
                &m.params,
                |p| {
                    let st = speaker_loss_and_grad(p, &batch, None);
                    (st.loss, st.grads)
                },
                64,
            );
            worst = worst.max(r.max_relative_error);
            probes += r.probes;
        }
        for kind in [ListenerKind::Simple, ListenerKind::Discerning] {
            let m = ListenerModel::new(kind, Regime::Contrastive, tiny_vocab(), 5, 4, 6, &mut rng_for(seed, 3));
            let mut rng = rng_for(seed, 4);
            let batch = ListenerBatch {
                ids: vec![vec![0, 4, 6, 1], vec![0, 5, 2, 1], vec![0, 4, 4, 1]],
                left: uniform(&mut rng, 3, 5, 1.0),
                right: uniform(&mut rng, 3, 5, 1.0),
                target_left: vec![true, false, true],
            };
            let r = gradient_check(&m.params, |p| listener_loss_and_grad(p, &batch), 64);
            worst = worst.max(r.max_relative_error);
            probes += r.probes;
        }
    }
    let elapsed = started.elapsed();
    Ok((
        worst < GRAD_TOLERANCE && elapsed < GRAD_TIME_LIMIT,
        format!("max relative error {worst:.2e} over {probes} probes (< {GRAD_TOLERANCE:e}), {elapsed:.1?}"),
    ))
}

/// All sequences the decoder can emit within `max_len` steps, best first.
fn exhaustive(m: &SpeakerModel, ctx: &ndarray::Array2<f64>, max_len: usize) -> Result<Vec<(Vec<usize>, f64)>, String> {
    let words: Vec<usize> = (0..m.vocab.len()).filter(|&v| v != START_ID && v != END_ID).collect();
    let mut out = Vec::new();
    let mut prefixes: Vec<Vec<usize>> = vec![vec![]];
    for len in 0..=max_len {
        for p in &prefixes {
            out.push((p.clone(), m.sequence_log_prob(ctx, p, len < max_len).map_err(err)?));
        }
        prefixes = prefixes
            .iter()
            .flat_map(|p| words.iter().map(move |&w| [p.clone(), vec![w]].concat()))
            .collect();
    }
    out.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Ok(out)
}

fn beam_oracle() -> Check {
    let dims = SpeakerDims {
        feature: 5,
        image_hidden: 6,
        embed: 4,
        hidden: 7,
    };
    let mut mismatches = 0;
    let mut worst = 0.0f64;
    for seed in 0..100u64 {
        let vocab = Vocabulary::from_words(["red", "blue"]);
        let mut m = SpeakerModel::new(SpeakerKind::Simple, vocab, dims, false, 0.0, &mut rng_for(seed, 1));
        let mut rng = rng_for(seed, 3);
        let scale = rng.random_range(0.5..4.0);
        let max_len = 1 + (seed % 3) as usize;
        let (h, v) = (dims.hidden, m.vocab.len());
        *m.params.get_mut("out.w") = uniform(&mut rng, h, v, scale);
        *m.params.get_mut("out.b") = uniform(&mut rng, 1, v, scale);
        let f = uniform(&mut rng, 1, dims.feature, 1.0);
        let ctx = m.context(&f.slice(s![0..1, ..]), None).map_err(err)?;
        let beam = beam_decode(&m, &ctx, 20, max_len).map_err(err)?;
        let want: Vec<_> = exhaustive(&m, &ctx, max_len)?.into_iter().take(20).collect();
        if beam.len() != want.len() || beam.iter().zip(&want).any(|(g, (ids, _))| &g.ids != ids) {
            mismatches += 1;
        }
        for (g, (_, lp)) in beam.iter().zip(&want) {
            worst = worst.max((g.log_prob - lp).abs());
        }
    }
    Ok((
        mismatches == 0 && worst < BEAM_LOGPROB_TOLERANCE,
        format!("100 models, {mismatches} sequence mismatches, max log-prob error {worst:.1e}"),
    ))
}

fn listener_fixtures() -> Check {
    let vocab = tiny_vocab();
    let mut worst = 0.0f64;
    for (i, kind) in [ListenerKind::Simple, ListenerKind::Discerning].into_iter().enumerate() {
        let m = ListenerModel::new(kind, Regime::Contrastive, vocab.clone(), 5, 4, 6, &mut rng_for(i as u64, 1));
        let mut rng = rng_for(i as u64, 2);
        let words = ["red", "blue", "nose", "pointy", "unknown"];
        for _ in 0..500 {
            let l: Vec<f64> = (0..5).map(|_| rng.random_range(-3.0..3.0)).collect();
            let r: Vec<f64> = (0..5).map(|_| rng.random_range(-3.0..3.0)).collect();
            let len = rng.random_range(1..=4);
            let phrase: Vec<String> = (0..len).map(|_| words[rng.random_range(0..words.len())].to_string()).collect();
            let sc = m.score(&l, &r, &phrase).map_err(err)?;
            let swapped = m.score(&r, &l, &phrase).map_err(err)?;
            worst = worst
                .max((sc.p_left + sc.p_right - 1.0).abs())
                .max((sc.p_left - swapped.p_right).abs());
        }
    }
    let logit = ListenerScore::from_logits(3f64.ln(), 0.0).p_left;
    let avg = ListenerScore::average(
        ListenerScore {
            p_left: 0.9,
            p_right: 0.1,
        },
        ListenerScore {
            p_left: 0.7,
            p_right: 0.3,
        },
    )
    .p_left;
    Ok((
        worst < NORMALIZATION_TOLERANCE && (logit - 0.75).abs() < NORMALIZATION_TOLERANCE && avg == 0.8,
        format!("1000 inputs max normalization/swap error {worst:.1e}; (ln 3, 0) -> {logit}; average -> {avg}"),
    ))
}

fn rerank_fixtures() -> Check {
    let mut rng = rng_for(4, 1);
    let mut order_errors = 0;
    for trial in 0..200 {
        let n = rng.random_range(2..=10);
        let mut lps: Vec<f64> = (0..n).map(|_| rng.random_range(-12.0..-0.01)).collect();
        lps.sort_by(|a, b| b.total_cmp(a));
        let beam: Vec<DecodedRecord> = lps
            .iter()
            .enumerate()
            .map(|(k, &lp)| DecodedRecord {
                pair_id: format!("p{trial}"),
                target: Target::A,
                rank: k + 1,
                phrase: format!("phrase {k}"),
                log_prob: lp,
            })
            .collect();
        let probs: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let keep = rerank(&beam, &probs, RerankConfig::new(1.0).map_err(err)?).map_err(err)?;
        if keep.iter().enumerate().any(|(k, r)| r.original_rank != k + 1) {
            order_errors += 1;
        }
        let by_listener = rerank(&beam, &probs, RerankConfig::new(0.0).map_err(err)?).map_err(err)?;
        let mut want: Vec<usize> = (0..n).collect();
        want.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]));
        if by_listener.iter().zip(&want).any(|(r, &w)| r.original_rank != w + 1) {
            order_errors += 1;
        }
    }
    let p = combine(0.64, 0.25, 0.5);
    Ok((
        order_errors == 0 && (p - 0.4).abs() < RERANK_TOLERANCE,
        format!("200 beams, {order_errors} ordering errors at lambda 0/1; (0.64, 0.25, 0.5) -> {p}"),
    ))
}

fn human_fixture() -> Check {
    let s = HumanSummary::from_counts(68, 14, 18);
    Ok((
        s.majority_accuracy == 68.0 && s.accuracy_with_guessing == 77.0,
        format!("majority {:.1}% -> with guessing {:.1}%", s.majority_accuracy, s.accuracy_with_guessing),
    ))
}

fn row(report: &EvalReport, speaker: &str, k: usize, listener: &str) -> Result<f64, String> {
    report
        .rows
        .iter()
        .find(|r| r.speaker == speaker && r.top_k == k && r.listener == listener)
        .map(|r| r.accuracy)
        .ok_or_else(|| format!("report has no row {speaker}/top-{k}/{listener}"))
}

fn listener_accuracy(run: &PipelineOutput, elapsed: Duration) -> Check {
    let tasks = annotation_tasks(run.dataset.split("test"));
    let tasks = &tasks[..SL_HELD_OUT_TASKS.min(tasks.len())];
    let judge = ModelJudge {
        listener: run.listener("SL"),
        features: &run.features,
    };
    let acc = rg_accuracy(tasks, &judge).map_err(err)?;
    Ok((
        acc.value() >= SL_ACCURACY_MIN && tasks.len() == SL_HELD_OUT_TASKS && elapsed < PIPELINE_TIME_LIMIT,
        format!(
            "SL {:.3} on {} held-out tasks (>= {SL_ACCURACY_MIN}); pipeline {:.0}s",
            acc.value(),
            acc.total,
            elapsed.as_secs_f64()
        ),
    ))
}

fn speaker_gap(run: &PipelineOutput) -> Check {
    let ds = row(&run.report, "DS", 1, "oracle")?;
    let ss = row(&run.report, "SS", 1, "oracle")?;
    Ok((
        ds - ss >= SPEAKER_GAP_MIN,
        format!("DS top-1 {ds:.3} vs SS top-1 {ss:.3} on {} pairs", run.dataset.split("test").len()),
    ))
}

fn rerank_gain(run: &PipelineOutput) -> Check {
    let plain = row(&run.report, "SS", 5, "oracle")?;
    let reranked = row(&run.report, "SS+SL_r", 5, "oracle")?;
    let lambda = run.lambdas.iter().find(|(l, _)| l == "SS+SL_r").map_or(f64::NAN, |(_, l)| *l);
    Ok((
        reranked - plain >= RERANK_GAIN_MIN,
        format!("SS top-5 {plain:.3} -> SS+SL_r top-5 {reranked:.3} (lambda {lambda:.1})"),
    ))
}

fn position_saliency(config: &ExperimentConfig) -> Check {
    let mut world = config.seeded_world();
    world.saliency_difficulty = true;
    let ds = generate_dataset(world, &GenConfig::new(2000, 0, 200)).map_err(err)?;
    let train = ds.split("train");
    let features = ds.features();
    let profile = config.resolved_profile().map_err(err)?;
    let vocab = build_vocabulary(train, config.min_freq).map_err(err)?;
    let (sl, _) = train_listener(
        train,
        &features,
        &vocab,
        ListenerKind::Simple,
        Regime::Contrastive,
        &profile,
        config.seed,
    )
    .map_err(err)?;
    let judge = ModelJudge {
        listener: &sl,
        features: &features,
    };
    let acc = position_accuracy(&annotation_tasks(ds.split("test")), &judge).map_err(err)?;
    let (a1, a5) = (&acc[0], &acc[4]);
    let (p1, p5) = (a1.value(), a5.value());
    let width = 2.0 * 1.96 * (p1 * (1.0 - p1) / a1.total as f64 + p5 * (1.0 - p5) / a5.total as f64).sqrt();
    let all: Vec<String> = acc.iter().map(|a| format!("{:.3}", a.value())).collect();
    Ok((
        p1 >= p5 && p1 - p5 > width,
        format!(
            "positions 1..5 [{}] over {} tasks each; gap {:.3} vs CI width {width:.3}",
            all.join(", "),
            a1.total,
            p1 - p5
        ),
    ))
}

fn classification(run: &PipelineOutput) -> Check {
    let labels = &run.dataset.category_labels;
    if labels.is_empty() {
        return Err("dataset has no category objects".into());
    }
    let n_classes = labels.iter().map(|(_, c)| c + 1).max().unwrap_or(0);
    // alternate objects of each class between train and test
    let mut seen = vec![0usize; n_classes];
    let (mut train_ids, mut train_y, mut test_ids, mut test_y) = (vec![], vec![], vec![], vec![]);
    for (id, c) in labels {
        if seen[*c] % 2 == 0 {
            train_ids.push(id.as_str());
            train_y.push(*c);
        } else {
            test_ids.push(id.as_str());
            test_y.push(*c);
        }
        seen[*c] += 1;
    }
    let train = run.dataset.split("train");
    let sl = run.listener("SL");
    let mut accs = Vec::new();
    for k in [10, 50] {
        let lexicon = build_lexicon(train, k, false).map_err(err)?;
        let matrix = |ids: &[&str]| -> Result<ndarray::Array2<f64>, String> {
            let emb = embed_images(sl, &lexicon, &run.features, ids).map_err(err)?;
            let rows: Vec<f64> = emb.iter().flat_map(|e| e.vector.iter().copied()).collect();
            ndarray::Array2::from_shape_vec((emb.len(), lexicon.len()), rows).map_err(err)
        };
        let (xtr, xte) = (matrix(&train_ids)?, matrix(&test_ids)?);
        let (_, acc) =
            classify(&xtr.view(), &train_y, &xte.view(), &test_y, &ClassifierConfig::default()).map_err(err)?;
        accs.push(acc);
    }
    let (a10, a50) = (accs[0], accs[1]);
    Ok((
        a50 >= CLASSIFY_MIN && a50 >= a10 - CLASSIFY_SLACK,
        format!(
            "{n_classes} categories, {} test images: K=10 {a10:.3}, K=50 {a50:.3}",
            test_ids.len()
        ),
    ))
}

/// Distinct slot values visited round-robin across slots in saliency order.
fn query_values(run: &PipelineOutput, n: usize) -> Vec<SlotValue> {
    let spec = &run.dataset.world.spec;
    let mut out = Vec::new();
    for j in 0.. {
        let mut any = false;
        for slot in &spec.saliency_order {
            let values = &spec.slot(slot).expect("slot in order").values;
            if let Some(v) = values.get(j) {
                any = true;
                if out.len() < n {
                    out.push(SlotValue::new(slot.clone(), v.clone()));
                }
            }
        }
        if !any || out.len() >= n {
            break;
        }
    }
    out
}

fn retrieval(run: &PipelineOutput) -> Check {
    let images: Vec<&SynthObject> = run.dataset.objects_in("test");
    let ids: Vec<&str> = images.iter().map(|o| o.object_id.as_str()).collect();
    let grammar = &run.dataset.world.grammar;
    let values = query_values(run, RETRIEVAL_QUERIES);
    let mut aps = Vec::new();
    for sv in &values {
        let surface = grammar.surfaces(sv).first().ok_or("slot value without surface")?;
        let query: Vec<String> = surface.split_whitespace().map(String::from).collect();
        let hits = retrieve(
            run.listener("SL"),
            &[query],
            &run.features,
            &ids,
            ids.len(),
            QueryStrategy::Concatenate,
        )
        .map_err(err)?;
        let ranking: Vec<&str> = hits.iter().map(|h| h.image_id.as_str()).collect();
        let relevant: HashSet<String> = images.iter().filter(|o| o.has(sv)).map(|o| o.object_id.clone()).collect();
        aps.push(average_precision(&ranking, &relevant));
    }
    let map = aps.iter().sum::<f64>() / aps.len().max(1) as f64;
    let worst = aps.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok((
        aps.len() == RETRIEVAL_QUERIES && map >= RETRIEVAL_MAP_MIN,
        format!("mAP {map:.3} over {} queries and {} images (worst AP {worst:.3})", aps.len(), ids.len()),
    ))
}

fn explanations(run: &PipelineOutput) -> Check {
    let world = &run.dataset.world;
    let speaker = run.speaker("DS");
    let mut rng = rng_for(run.config.seed, EXPLAIN_STREAM);
    let mut ok = 0;
    let mut misses = Vec::new();
    for i in 0..EXPLAIN_PAIRS {
        let m = 1 + i % 3;
        let pair = generate_category_pair(world, m, EXPLAIN_PER_SIDE, &format!("explain{i:02}"), &mut rng).map_err(err)?;
        let mut fs = FeatureStore::new(run.features.dim());
        for o in pair.a.iter().chain(&pair.b) {
            fs.push(o.object_id.clone(), &o.feature).map_err(err)?;
        }
        let a: Vec<&str> = pair.a.iter().map(|o| o.object_id.as_str()).collect();
        let b: Vec<&str> = pair.b.iter().map(|o| o.object_id.as_str()).collect();
        let rep = explain_categories(speaker, &fs, &a, &b, &ExplainConfig::default()).map_err(err)?;
        let covered = |side: &[ExplanationEntry], proto: &SynthObject| {
            let found: HashSet<&SlotValue> = side
                .iter()
                .take(2 * m)
                .filter_map(|e| world.grammar.parse_text(&e.phrase))
                .collect();
            pair.differing.iter().all(|s| {
                proto
                    .value(s)
                    .is_some_and(|v| found.contains(&SlotValue::new(s.clone(), v)))
            })
        };
        if covered(&rep.a, &pair.a[0]) && covered(&rep.b, &pair.b[0]) {
            ok += 1;
        } else {
            misses.push(format!("#{i} m={m}"));
        }
    }
    let share = ok as f64 / EXPLAIN_PAIRS as f64;
    Ok((
        share >= EXPLAIN_PASS_SHARE,
        format!(
            "{ok}/{EXPLAIN_PAIRS} pairs fully covered (>= {:.0}%); missed {}",
            100.0 * EXPLAIN_PASS_SHARE,
            if misses.is_empty() { "none".to_string() } else { misses.join(", ") }
        ),
    ))
}

fn same_bytes(a: &Path, b: &Path, files: &[&str]) -> Result<Vec<String>, String> {
    let mut differing = Vec::new();
    for f in files {
        let x = fs::read(a.join(f)).map_err(|e| format!("{f}: {e}"))?;
        let y = fs::read(b.join(f)).map_err(|e| format!("{f}: {e}"))?;
        if x != y {
            differing.push(f.to_string());
        }
    }
    Ok(differing)
}

fn determinism(config: &ExperimentConfig, first: &Path, scratch: &Path) -> Check {
    let again = ExperimentConfig {
        out: scratch.to_path_buf(),
        ..config.clone()
    };
    run_pipeline(&again).map_err(err)?;
    let files = [REPORT_FILE, REPORT_TABLE_FILE, "lambdas.json", "config.json"];
    let differing = same_bytes(first, scratch, &files)?;
    Ok((
        differing.is_empty(),
        if differing.is_empty() {
            format!("second run identical in {}", files.join(", "))
        } else {
            format!("differs in {}", differing.join(", "))
        },
    ))
}

fn main() {
    let strict = std::env::var("PHRASEGAME_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let total = Instant::now();
    let mut suite = Suite { passed: 0, failed: 0 };

    let t = Instant::now();
    suite.record(1, "gradient correctness", t, gradients());
    let t = Instant::now();
    suite.record(2, "beam search matches exhaustive top-20", t, beam_oracle());
    let t = Instant::now();
    suite.record(3, "listener formula fixtures", t, listener_fixtures());
    let t = Instant::now();
    suite.record(4, "pragmatic rerank fixtures", t, rerank_fixtures());
    let t = Instant::now();
    suite.record(5, "human aggregation bracket fixture", t, human_fixture());

    let first = tempfile::tempdir().expect("temp dir");
    let second = tempfile::tempdir().expect("temp dir");
    let config = ExperimentConfig {
        out: first.path().to_path_buf(),
        ..Default::default()
    };
    let t = Instant::now();
    match run_pipeline(&config) {
        Ok(run) => {
            let elapsed = t.elapsed();
            println!("desk pipeline finished in {:.0}s", elapsed.as_secs_f64());
            suite.record(6, "simple listener on held-out phrases", t, listener_accuracy(&run, elapsed));
            let t = Instant::now();
            suite.record(7, "discerning speaker beats simple speaker", t, speaker_gap(&run));
            let t = Instant::now();
            suite.record(8, "listener reranking improves top-5", t, rerank_gain(&run));
            let t = Instant::now();
            suite.record(9, "position saliency", t, position_saliency(&config));
            let t = Instant::now();
            suite.record(10, "category classification", t, classification(&run));
            let t = Instant::now();
            suite.record(11, "single-slot retrieval", t, retrieval(&run));
            let t = Instant::now();
            suite.record(12, "category explanations", t, explanations(&run));
            let t = Instant::now();
            suite.record(13, "pipeline determinism", t, determinism(&config, first.path(), second.path()));
        }
        Err(e) => {
            for (id, name) in [
                (6, "simple listener on held-out phrases"),
                (7, "discerning speaker beats simple speaker"),
                (8, "listener reranking improves top-5"),
                (10, "category classification"),
                (11, "single-slot retrieval"),
                (12, "category explanations"),
                (13, "pipeline determinism"),
            ] {
                suite.record(id, name, t, Err(format!("pipeline failed: {e}")));
            }
            let t = Instant::now();
            suite.record(9, "position saliency", t, position_saliency(&config));
        }
    }
    println!(
        "acceptance: {} passed, {} failed in {:.0}s",
        suite.passed,
        suite.failed,
        total.elapsed().as_secs_f64()
    );
    if strict && suite.failed > 0 {
        std::process::exit(1);
    }
}
