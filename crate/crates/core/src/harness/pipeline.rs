use std::fs;
use std::path::Path;

use crate::data::{build_vocabulary, join_pair, records_hash, AnnotationRecord, FeatureStore, Vocabulary};
use crate::error::{Error, Result};
use crate::eval::{
    annotation_tasks, pair_index, position_accuracy, rg_accuracy, rg_accuracy_top_k, EvalReport, GameTask, Judge,
    ModelJudge, OracleJudge, TwoSimpleJudge,
};
use crate::listener::{train_listener, ListenerKind, ListenerModel, Regime};
use crate::nn::{Profile, TrainingMetadata};
use crate::pragmatics::{rerank_decoded, select_lambda, write_reranked, RerankConfig};
use crate::speaker::{decode_records, train_speaker, write_decoded, DecodedRecord, SpeakerKind, SpeakerModel, Target};
use crate::synth::{generate_dataset, DatasetDir, SynthDataset};

use super::config::ExperimentConfig;

pub const REPORT_FILE: &str = "report.jsonl";
pub const REPORT_TABLE_FILE: &str = "report.txt";

/// Top-k used to pick the reranking weight on the validation split.
const LAMBDA_SELECTION_K: usize = 5;

/// Models, decodes and the report from one pipeline run, kept in memory for
/// callers that want more than the files.
pub struct PipelineOutput {
    pub config: ExperimentConfig,
    pub profile: Profile,
    pub dataset: SynthDataset,
    pub features: FeatureStore,
    pub vocab: Vocabulary,
    /// `SL`, `SL_r`, `DL`.
    pub listeners: Vec<(String, ListenerModel)>,
    /// `SS`, `DS`.
    pub speakers: Vec<(String, SpeakerModel)>,
    /// Keyed `SS/val`, `DS/test`, ...
    pub decoded: Vec<(String, Vec<DecodedRecord>)>,
    /// `(speaker+reranker, chosen lambda)`.
    pub lambdas: Vec<(String, f64)>,
    pub report: EvalReport,
}

impl PipelineOutput {
    pub fn listener(&self, name: &str) -> &ListenerModel {
        &self.listeners.iter().find(|(n, _)| n == name).expect("known listener").1
    }

    pub fn speaker(&self, name: &str) -> &SpeakerModel {
        &self.speakers.iter().find(|(n, _)| n == name).expect("known speaker").1
    }

    pub fn decoded(&self, speaker: &str, split: &str) -> &[DecodedRecord] {
        let key = format!("{speaker}/{split}");
        &self.decoded.iter().find(|(k, _)| *k == key).expect("known decode").1
    }
}

fn metadata(profile: &Profile, seed: u64, step: usize, losses: &[f64], train: &[AnnotationRecord]) -> TrainingMetadata {
    TrainingMetadata {
        step: step as u64,
        seed,
        profile: profile.name.clone(),
        split_hashes: [("train".to_string(), records_hash(train))].into(),
        losses: losses.to_vec(),
    }
}

/// Each phrase pair as two tasks whose phrase is the serialized pair with
/// the target's phrase first.
fn pair_tasks(records: &[AnnotationRecord]) -> Vec<GameTask> {
    let mut out = Vec::new();
    for r in records {
        for pp in &r.phrase_pairs {
            for (target, own, other) in [
                (Target::A, &pp.left.tokens, &pp.right.tokens),
                (Target::B, &pp.right.tokens, &pp.left.tokens),
            ] {
                out.push(GameTask {
                    task_id: format!("{}-{}-{:?}", r.pair_id, pp.position, target),
                    pair_id: r.pair_id.clone(),
                    image_a: r.image_a.clone(),
                    image_b: r.image_b.clone(),
                    phrase: join_pair(own, other),
                    target,
                    presentation_swap: false,
                    rank: None,
                    position: Some(pp.position),
                });
            }
        }
    }
    out
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Generates (or loads) the data, trains every listener and speaker, decodes
/// the validation and test splits and evaluates everything against the
/// grammar oracle and the trained listeners. All artifacts land in
/// `config.out`.
pub fn run_pipeline(config: &ExperimentConfig) -> Result<PipelineOutput> {
    config.validate()?;
    let profile = config.resolved_profile()?;
    let out = &config.out;
    config.write_snapshot(out)?;
    let seed = config.seed;

    let dataset = match &config.dataset {
        Some(dir) => DatasetDir::new(dir).load()?,
        None => {
            let mut ds = generate_dataset(config.seeded_world(), &config.generation)?;
            DatasetDir::new(out.join("dataset")).write(&mut ds, None)?;
            ds
        }
    };
    let features = dataset.features();
    let train = dataset.split("train").to_vec();
    let val = dataset.split("val").to_vec();
    let test = dataset.split("test").to_vec();
    if train.is_empty() || val.is_empty() || test.is_empty() {
        return Err(Error::ConfigError("train, val and test splits must be non-empty".into()));
    }
    let vocab = build_vocabulary(&train, config.min_freq)?;
    vocab.save(&out.join("vocab.json"))?;

    let models = out.join("models");
    let mut listeners = Vec::new();
    for (name, kind, regime) in [
        ("SL", ListenerKind::Simple, Regime::Contrastive),
        ("SL_r", ListenerKind::Simple, Regime::RandomNegative),
        ("DL", ListenerKind::Discerning, Regime::Contrastive),
    ] {
        let (model, rep) = train_listener(&train, &features, &vocab, kind, regime, &profile, seed)?;
        model.save(&models.join(name), metadata(&profile, seed, rep.steps, &rep.losses, &train))?;
        listeners.push((name.to_string(), model));
    }
    let mut speakers = Vec::new();
    for (name, kind) in [("SS", SpeakerKind::Simple), ("DS", SpeakerKind::Discerning)] {
        let (model, rep) = train_speaker(&train, &features, &vocab, kind, &profile, seed)?;
        model.save(&models.join(name), metadata(&profile, seed, rep.steps, &rep.losses, &train))?;
        speakers.push((name.to_string(), model));
    }

    let decoded_dir = out.join("decoded");
    fs::create_dir_all(&decoded_dir).map_err(|e| Error::io(&decoded_dir, e))?;
    let mut decoded = Vec::new();
    for (name, model) in &speakers {
        let max_len = match model.kind {
            SpeakerKind::Simple => profile.max_phrase_len,
            SpeakerKind::Discerning => 2 * profile.max_phrase_len + 1,
        };
        for (split, records) in [("val", &val), ("test", &test)] {
            let d = decode_records(model, &features, records, config.beam_width, max_len)?;
            write_decoded(&decoded_dir.join(format!("{}_{split}.jsonl", name.to_lowercase())), &d)?;
            decoded.push((format!("{name}/{split}"), d));
        }
    }

    let objects = dataset.object_index();
    let oracle = OracleJudge {
        grammar: &dataset.world.grammar,
        objects: &objects,
    };
    let judge_of = |name: &str| -> ModelJudge<'_> {
        ModelJudge {
            listener: &listeners.iter().find(|(n, _)| n == name).expect("trained").1,
            features: &features,
        }
    };
    let mut report = EvalReport::default();

    // listeners on held-out human-style phrases
    let single = annotation_tasks(&test);
    let pairs_as_tasks = pair_tasks(&test);
    report.push("annotation", 1, "oracle", rg_accuracy(&single, &oracle)?);
    for name in ["SL", "SL_r"] {
        report.push("annotation", 1, name, rg_accuracy(&single, &judge_of(name))?);
    }
    report.push("annotation-pair", 1, "DL", rg_accuracy(&pairs_as_tasks, &judge_of("DL"))?);
    let two_sl = TwoSimpleJudge {
        listener: &listeners[0].1,
        features: &features,
    };
    report.push("annotation-pair", 1, "2xSL", rg_accuracy(&pairs_as_tasks, &two_sl)?);
    for name in ["SL", "SL_r"] {
        report.positions.push((name.to_string(), position_accuracy(&single, &judge_of(name))?));
    }

    // speakers, plain and reranked
    let val_pairs = pair_index(&val);
    let test_pairs = pair_index(&test);
    let find = |key: &str| -> &Vec<DecodedRecord> { &decoded.iter().find(|(k, _)| k == key).expect("decoded").1 };
    let judges: [(&str, &dyn Judge); 3] = [("oracle", &oracle), ("SL", &judge_of("SL")), ("SL_r", &judge_of("SL_r"))];
    let mut lambdas = Vec::new();
    let reranked_dir = out.join("reranked");
    fs::create_dir_all(&reranked_dir).map_err(|e| Error::io(&reranked_dir, e))?;
    for (name, _) in &speakers {
        let test_dec = find(&format!("{name}/test"));
        for &k in &config.top_k {
            for (jname, judge) in &judges {
                report.push(name, k, jname, rg_accuracy_top_k(test_dec, &test_pairs, *judge, k)?);
            }
        }
        let select_k = LAMBDA_SELECTION_K.min(config.beam_width);
        for reranker in ["SL_r", "SL"] {
            let rj = judge_of(reranker);
            let (lambda, _) = select_lambda(
                find(&format!("{name}/val")),
                &val_pairs,
                &rj,
                &oracle,
                &config.lambda_grid,
                select_k,
            )?;
            let label = format!("{name}+{reranker}");
            lambdas.push((label.clone(), lambda));
            let reranked = rerank_decoded(test_dec, &test_pairs, &rj, RerankConfig::new(lambda)?)?;
            write_reranked(&reranked_dir.join(format!("{}.jsonl", label.to_lowercase())), &reranked)?;
            let as_decoded: Vec<DecodedRecord> = reranked.iter().map(|r| r.to_decoded()).collect();
            for &k in &config.top_k {
                for (jname, judge) in &judges {
                    report.push(&label, k, jname, rg_accuracy_top_k(&as_decoded, &test_pairs, *judge, k)?);
                }
            }
        }
    }

    write_text(&out.join(REPORT_FILE), &report.to_jsonl())?;
    let mut table = report.to_table();
    table.push('\n');
    for (label, l) in &lambdas {
        table += &format!("lambda {label}: {l:.1}\n");
    }
    write_text(&out.join(REPORT_TABLE_FILE), &table)?;
    write_text(&out.join("lambdas.json"), &(serde_json::to_string_pretty(&lambdas)? + "\n"))?;

    Ok(PipelineOutput {
        config: config.clone(),
        profile,
        dataset,
        features,
        vocab,
        listeners,
        speakers,
        decoded,
        lambdas,
        report,
    })
}
