use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use phrasegame::data::{build_vocabulary, normalize_tokens, records_hash, FeatureStore};
use phrasegame::downstream::{
    average_precision, build_lexicon, classify, embed_images, explain_categories, export_image_embeddings,
    export_phrase_embeddings, retrieve, ClassifierConfig, ExplainConfig, QueryStrategy,
};
use phrasegame::eval::{
    annotation_tasks, pair_index, rg_accuracy, rg_accuracy_top_k, EvalReport, Judge, ModelJudge, OracleJudge,
};
use phrasegame::harness::{summarize_log, ExperimentConfig};
use phrasegame::listener::{train_listener, ListenerKind, ListenerModel, Regime};
use phrasegame::nn::TrainingMetadata;
use phrasegame::pragmatics::{rerank_decoded, select_lambda, write_reranked, RerankConfig};
use phrasegame::speaker::{
    decode_records, load_decoded, train_speaker, write_decoded, SpeakerKind, SpeakerModel,
};
use phrasegame::synth::{generate_dataset, DatasetDir, SynthDataset};

#[derive(Parser, Debug)]
#[command(name = "phrasegame", version, about = "Attribute-phrase reference games: data, training, evaluation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Experiment config (JSON). Flags take precedence over its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

impl Common {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        cfg.out = self.out.clone();
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Copy, Clone, Debug, ValueEnum)]
pub enum KindArg {
    Simple,
    Discerning,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
pub enum RegimeArg {
    Contrastive,
    RandomNegative,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic dataset directory.
    SynthGen {
        #[command(flatten)]
        common: Common,
        /// Rendered PNG size in pixels; 0 skips rendering.
        #[arg(long, default_value_t = 128)]
        image_size: u32,
    },
    TrainSpeaker {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, value_enum)]
        kind: KindArg,
        #[arg(long, default_value = "desk")]
        profile: String,
    },
    TrainListener {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, value_enum, default_value = "simple")]
        kind: KindArg,
        #[arg(long, value_enum, default_value = "contrastive")]
        regime: RegimeArg,
        #[arg(long, default_value = "desk")]
        profile: String,
    },
    /// Reference-game accuracy of a listener (or the grammar oracle) on
    /// annotation phrases, decoded phrases, or a speaker decoded on the fly.
    /// With `--session`, recomputes a human session summary from its log.
    EvalRg {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long, default_value = "test")]
        split: String,
        #[arg(long)]
        listener: Option<PathBuf>,
        /// Also judge with the grammar oracle.
        #[arg(long)]
        oracle: bool,
        #[arg(long)]
        decoded: Option<PathBuf>,
        #[arg(long)]
        speaker: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "1,5,7,10")]
        top_k: Vec<usize>,
        #[arg(long)]
        session: Option<PathBuf>,
    },
    /// Rerank decoded beams by a listener.
    Rerank {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value = "test")]
        split: String,
        #[arg(long)]
        decoded: PathBuf,
        #[arg(long)]
        listener: PathBuf,
        /// Fixed speaker weight; without it, chosen on `--val-decoded`.
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        val_decoded: Option<PathBuf>,
    },
    /// Phrase-score embeddings of dataset images.
    Embed {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        listener: PathBuf,
        #[arg(long, default_value_t = 50)]
        k: usize,
        #[arg(long)]
        opponent: bool,
        /// `categories` or a split name.
        #[arg(long, default_value = "categories")]
        images: String,
    },
    /// Linear classifier over embeddings of category images.
    Classify {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long, default_value_t = 1e-4)]
        l2: f64,
    },
    Retrieve {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        listener: PathBuf,
        #[arg(long = "query", required = true)]
        queries: Vec<String>,
        #[arg(long, default_value = "test")]
        split: String,
        #[arg(long, default_value_t = 18)]
        top_n: usize,
        /// Sum per-phrase scores instead of scoring the concatenation.
        #[arg(long)]
        fusion: bool,
    },
    /// Phrases that tell two categories apart.
    Explain {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        speaker: PathBuf,
        #[arg(long)]
        category_a: usize,
        #[arg(long)]
        category_b: usize,
        #[arg(long, default_value_t = 10)]
        per_category: usize,
        #[arg(long, default_value_t = 10)]
        top_n: usize,
    },
    /// Raw phrase and image vectors in the feature-store format.
    ExportEmb {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        listener: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        /// Text file with one phrase per line; defaults to the most frequent
        /// training phrases.
        #[arg(long)]
        phrases: Option<PathBuf>,
        #[arg(long, default_value_t = 500)]
        top: usize,
        #[arg(long, default_value = "test")]
        split: String,
    },
    /// HTTP service for human-listener sessions.
    Serve {
        #[command(flatten)]
        common: Common,
        /// Directory that dataset and run references resolve against.
        #[arg(long, default_value = ".")]
        root: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
        #[arg(long, default_value_t = 3)]
        panel_size: usize,
    },
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::SynthGen { common, image_size } => synth_gen(&common, image_size),
        Command::TrainSpeaker {
            common,
            dataset,
            kind,
            profile,
        } => train_speaker_cmd(&common, &dataset, kind, &profile),
        Command::TrainListener {
            common,
            dataset,
            kind,
            regime,
            profile,
        } => train_listener_cmd(&common, &dataset, kind, regime, &profile),
        Command::EvalRg {
            common,
            dataset,
            split,
            listener,
            oracle,
            decoded,
            speaker,
            top_k,
            session,
        } => eval_rg(&common, dataset, &split, listener, oracle, decoded, speaker, &top_k, session),
        Command::Rerank {
            common,
            dataset,
            split,
            decoded,
            listener,
            lambda,
            val_decoded,
        } => rerank_cmd(&common, &dataset, &split, &decoded, &listener, lambda, val_decoded),
        Command::Embed {
            common,
            dataset,
            listener,
            k,
            opponent,
            images,
        } => embed_cmd(&common, &dataset, &listener, k, opponent, &images),
        Command::Classify {
            common,
            dataset,
            embeddings,
            l2,
        } => classify_cmd(&common, &dataset, &embeddings, l2),
        Command::Retrieve {
            common,
            dataset,
            listener,
            queries,
            split,
            top_n,
            fusion,
        } => retrieve_cmd(&common, &dataset, &listener, &queries, &split, top_n, fusion),
        Command::Explain {
            common,
            dataset,
            speaker,
            category_a,
            category_b,
            per_category,
            top_n,
        } => explain_cmd(&common, &dataset, &speaker, category_a, category_b, per_category, top_n),
        Command::ExportEmb {
            common,
            listener,
            dataset,
            phrases,
            top,
            split,
        } => export_cmd(&common, &listener, &dataset, phrases, top, &split),
        Command::Serve {
            common,
            root,
            addr,
            panel_size,
        } => {
            let cfg = common.resolve()?;
            crate::server::serve(&root, &cfg.out, &addr, panel_size)
        }
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn load_dataset(dir: &Path) -> Result<SynthDataset> {
    DatasetDir::new(dir)
        .load()
        .with_context(|| format!("loading dataset {}", dir.display()))
}

fn load_listener(dir: &Path) -> Result<ListenerModel> {
    Ok(ListenerModel::load(dir, None)
        .with_context(|| format!("loading listener {}", dir.display()))?
        .0)
}

fn load_speaker(dir: &Path) -> Result<SpeakerModel> {
    Ok(SpeakerModel::load(dir, None)
        .with_context(|| format!("loading speaker {}", dir.display()))?
        .0)
}

fn split_of<'a>(ds: &'a SynthDataset, split: &str) -> Result<&'a [phrasegame::data::AnnotationRecord]> {
    let r = ds.split(split);
    if r.is_empty() {
        bail!("split {split:?} is empty or missing");
    }
    Ok(r)
}

fn synth_gen(common: &Common, image_size: u32) -> Result<()> {
    let cfg = common.resolve()?;
    let mut ds = generate_dataset(cfg.seeded_world(), &cfg.generation)?;
    let size = (image_size > 0).then_some(image_size);
    DatasetDir::new(&cfg.out).write(&mut ds, size)?;
    cfg.write_snapshot(&cfg.out)?;
    for (name, records) in &ds.splits {
        println!("{name}: {} pairs", records.len());
    }
    Ok(())
}

fn training_metadata(cfg: &ExperimentConfig, profile: &str, step: usize, losses: &[f64], train_hash: String) -> TrainingMetadata {
    TrainingMetadata {
        step: step as u64,
        seed: cfg.seed,
        profile: profile.to_string(),
        split_hashes: [("train".to_string(), train_hash)].into(),
        losses: losses.to_vec(),
    }
}

fn train_speaker_cmd(common: &Common, dataset: &Path, kind: KindArg, profile: &str) -> Result<()> {
    let mut cfg = common.resolve()?;
    cfg.profile = profile.to_string();
    cfg.dataset = Some(dataset.to_path_buf());
    let prof = cfg.resolved_profile()?;
    let ds = load_dataset(dataset)?;
    let train = split_of(&ds, "train")?;
    let vocab = build_vocabulary(train, cfg.min_freq)?;
    let kind = match kind {
        KindArg::Simple => SpeakerKind::Simple,
        KindArg::Discerning => SpeakerKind::Discerning,
    };
    let (model, rep) = train_speaker(train, &ds.features(), &vocab, kind, &prof, cfg.seed)?;
    model.save(&cfg.out, training_metadata(&cfg, &prof.name, rep.steps, &rep.losses, records_hash(train)))?;
    cfg.write_snapshot(&cfg.out)?;
    println!(
        "{} speaker: {} steps, loss {:.4} -> {:.4}",
        kind.as_str(),
        rep.steps,
        rep.initial_loss,
        rep.final_loss
    );
    Ok(())
}

fn train_listener_cmd(common: &Common, dataset: &Path, kind: KindArg, regime: RegimeArg, profile: &str) -> Result<()> {
    let mut cfg = common.resolve()?;
    cfg.profile = profile.to_string();
    cfg.dataset = Some(dataset.to_path_buf());
    let prof = cfg.resolved_profile()?;
    let ds = load_dataset(dataset)?;
    let train = split_of(&ds, "train")?;
    let vocab = build_vocabulary(train, cfg.min_freq)?;
    let kind = match kind {
        KindArg::Simple => ListenerKind::Simple,
        KindArg::Discerning => ListenerKind::Discerning,
    };
    let regime = match regime {
        RegimeArg::Contrastive => Regime::Contrastive,
        RegimeArg::RandomNegative => Regime::RandomNegative,
    };
    let (model, rep) = train_listener(train, &ds.features(), &vocab, kind, regime, &prof, cfg.seed)?;
    model.save(&cfg.out, training_metadata(&cfg, &prof.name, rep.steps, &rep.losses, records_hash(train)))?;
    cfg.write_snapshot(&cfg.out)?;
    println!(
        "listener ({}): {} steps, loss {:.4} -> {:.4}",
        regime.as_str(),
        rep.steps,
        rep.initial_loss,
        rep.final_loss
    );
    Ok(())
}

fn finish_report(cfg: &ExperimentConfig, report: &EvalReport) -> Result<()> {
    write(&cfg.out.join("report.jsonl"), &report.to_jsonl())?;
    let table = report.to_table();
    write(&cfg.out.join("report.txt"), &table)?;
    cfg.write_snapshot(&cfg.out)?;
    print!("{table}");
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn eval_rg(
    common: &Common,
    dataset: Option<PathBuf>,
    split: &str,
    listener: Option<PathBuf>,
    oracle: bool,
    decoded: Option<PathBuf>,
    speaker: Option<PathBuf>,
    top_k: &[usize],
    session: Option<PathBuf>,
) -> Result<()> {
    let mut cfg = common.resolve()?;
    if let Some(dir) = session {
        let report = EvalReport {
            human: Some(summarize_log(&dir)?),
            ..Default::default()
        };
        return finish_report(&cfg, &report);
    }
    let Some(dataset) = dataset else {
        bail!("--dataset is required unless --session is given");
    };
    if listener.is_none() && !oracle {
        bail!("give --listener, --oracle, or both");
    }
    cfg.dataset = Some(dataset.clone());
    let ds = load_dataset(&dataset)?;
    let records = split_of(&ds, split)?;
    let features = ds.features();
    let objects = ds.object_index();
    let oracle_judge = OracleJudge {
        grammar: &ds.world.grammar,
        objects: &objects,
    };
    let model = listener.as_deref().map(load_listener).transpose()?;
    let model_judge = model.as_ref().map(|m| ModelJudge {
        listener: m,
        features: &features,
    });
    let mut judges: Vec<(&str, &dyn Judge)> = Vec::new();
    if oracle {
        judges.push(("oracle", &oracle_judge));
    }
    if let Some(j) = &model_judge {
        judges.push(("listener", j));
    }

    let decoded = match (decoded, speaker) {
        (Some(_), Some(_)) => bail!("give --decoded or --speaker, not both"),
        (Some(path), None) => Some(load_decoded(&path)?),
        (None, Some(dir)) => {
            let sp = load_speaker(&dir)?;
            let max_len = match sp.kind {
                SpeakerKind::Simple => cfg.resolved_profile()?.max_phrase_len,
                SpeakerKind::Discerning => 2 * cfg.resolved_profile()?.max_phrase_len + 1,
            };
            let d = decode_records(&sp, &features, records, cfg.beam_width, max_len)?;
            fs::create_dir_all(&cfg.out)?;
            write_decoded(&cfg.out.join("decoded.jsonl"), &d)?;
            Some(d)
        }
        (None, None) => None,
    };

    let mut report = EvalReport::default();
    match decoded {
        None => {
            let tasks = annotation_tasks(records);
            for (name, j) in &judges {
                report.push("annotation", 1, name, rg_accuracy(&tasks, *j)?);
            }
        }
        Some(d) => {
            let pairs = pair_index(records);
            for &k in top_k {
                for (name, j) in &judges {
                    report.push("speaker", k, name, rg_accuracy_top_k(&d, &pairs, *j, k)?);
                }
            }
        }
    }
    finish_report(&cfg, &report)
}

fn rerank_cmd(
    common: &Common,
    dataset: &Path,
    split: &str,
    decoded: &Path,
    listener: &Path,
    lambda: Option<f64>,
    val_decoded: Option<PathBuf>,
) -> Result<()> {
    let cfg = common.resolve()?;
    let ds = load_dataset(dataset)?;
    let features = ds.features();
    let model = load_listener(listener)?;
    let judge = ModelJudge {
        listener: &model,
        features: &features,
    };
    let lambda = match (lambda, val_decoded) {
        (Some(l), _) => l,
        (None, Some(path)) => {
            let objects = ds.object_index();
            let oracle = OracleJudge {
                grammar: &ds.world.grammar,
                objects: &objects,
            };
            let val = load_decoded(&path)?;
            let (l, curve) = select_lambda(&val, &pair_index(split_of(&ds, "val")?), &judge, &oracle, &cfg.lambda_grid, 5)?;
            for (l, acc) in curve {
                println!("lambda {l:.1}: val top-5 {:.1}", 100.0 * acc);
            }
            l
        }
        (None, None) => 0.0,
    };
    let d = load_decoded(decoded)?;
    let reranked = rerank_decoded(&d, &pair_index(split_of(&ds, split)?), &judge, RerankConfig::new(lambda)?)?;
    fs::create_dir_all(&cfg.out)?;
    write_reranked(&cfg.out.join("reranked.jsonl"), &reranked)?;
    // the new order in the decoded format, for eval-rg
    let as_decoded: Vec<_> = reranked.iter().map(|r| r.to_decoded()).collect();
    write_decoded(&cfg.out.join("decoded.jsonl"), &as_decoded)?;
    write(&cfg.out.join("lambda.json"), &format!("{lambda}\n"))?;
    cfg.write_snapshot(&cfg.out)?;
    println!("reranked {} beams with lambda {lambda}", reranked.len());
    Ok(())
}

fn image_set(ds: &SynthDataset, which: &str) -> Result<Vec<String>> {
    let ids: Vec<String> = if which == "categories" {
        ds.category_labels.iter().map(|(id, _)| id.clone()).collect()
    } else {
        ds.objects_in(which).iter().map(|o| o.object_id.clone()).collect()
    };
    if ids.is_empty() {
        bail!("no images in {which:?}");
    }
    Ok(ids)
}

fn embed_cmd(common: &Common, dataset: &Path, listener: &Path, k: usize, opponent: bool, images: &str) -> Result<()> {
    let cfg = common.resolve()?;
    let ds = load_dataset(dataset)?;
    let model = load_listener(listener)?;
    let lexicon = build_lexicon(split_of(&ds, "train")?, k, opponent)?;
    let ids = image_set(&ds, images)?;
    let embs = embed_images(&model, &lexicon, &ds.features(), &ids)?;
    let mut store = FeatureStore::new(k);
    for e in &embs {
        let v: Vec<f32> = e.vector.iter().map(|&x| x as f32).collect();
        store.push(e.image_id.clone(), &v)?;
    }
    fs::create_dir_all(&cfg.out)?;
    store.write(&cfg.out.join("embeddings.bin"))?;
    write(&cfg.out.join("lexicon.json"), &(serde_json::to_string_pretty(&lexicon)? + "\n"))?;
    cfg.write_snapshot(&cfg.out)?;
    println!("embedded {} images over {k} phrases", embs.len());
    Ok(())
}

fn classify_cmd(common: &Common, dataset: &Path, embeddings: &Path, l2: f64) -> Result<()> {
    let cfg = common.resolve()?;
    let ds = load_dataset(dataset)?;
    let store = FeatureStore::read(embeddings)?;
    // alternate objects of each category between train and test
    let mut seen: BTreeMap<usize, usize> = BTreeMap::new();
    let (mut tr, mut te, mut ytr, mut yte) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (id, c) in &ds.category_labels {
        if !store.contains(id) {
            continue;
        }
        let n = seen.entry(*c).or_default();
        if n.is_multiple_of(2) {
            tr.push(id.clone());
            ytr.push(*c);
        } else {
            te.push(id.clone());
            yte.push(*c);
        }
        *n += 1;
    }
    let config = ClassifierConfig {
        l2,
        ..Default::default()
    };
    let (_, acc) = classify(&store.matrix(&tr)?.view(), &ytr, &store.matrix(&te)?.view(), &yte, &config)?;
    let out = serde_json::json!({
        "dimensions": store.dim(),
        "train": tr.len(),
        "test": te.len(),
        "accuracy": acc,
    });
    write(&cfg.out.join("classify.json"), &(serde_json::to_string_pretty(&out)? + "\n"))?;
    cfg.write_snapshot(&cfg.out)?;
    println!("held-out accuracy {:.1}% over {} images", 100.0 * acc, te.len());
    Ok(())
}

fn retrieve_cmd(
    common: &Common,
    dataset: &Path,
    listener: &Path,
    queries: &[String],
    split: &str,
    top_n: usize,
    fusion: bool,
) -> Result<()> {
    let cfg = common.resolve()?;
    let ds = load_dataset(dataset)?;
    let model = load_listener(listener)?;
    let ids = image_set(&ds, split)?;
    let q: Vec<Vec<String>> = queries.iter().map(|s| normalize_tokens(s)).collect();
    let strategy = if fusion {
        QueryStrategy::Fusion
    } else {
        QueryStrategy::Concatenate
    };
    let hits = retrieve(&model, &q, &ds.features(), &ids, top_n, strategy)?;
    let mut lines = String::new();
    for h in &hits {
        lines += &(serde_json::to_string(h)? + "\n");
        println!("{:>10.4}  {}", h.score, h.image_id);
    }
    // when every query parses as a single grammar phrase, report AP against
    // objects carrying all the queried values
    let values: Option<Vec<_>> = q.iter().map(|t| ds.world.grammar.parse(t).cloned()).collect();
    if let Some(values) = values {
        let objects = ds.object_index();
        let relevant: HashSet<String> = ids
            .iter()
            .filter(|id| values.iter().all(|v| objects[*id].has(v)))
            .cloned()
            .collect();
        let full = retrieve(&model, &q, &ds.features(), &ids, ids.len(), strategy)?;
        let ranking: Vec<&str> = full.iter().map(|h| h.image_id.as_str()).collect();
        println!("average precision {:.3}", average_precision(&ranking, &relevant));
    }
    write(&cfg.out.join("hits.jsonl"), &lines)?;
    cfg.write_snapshot(&cfg.out)?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn explain_cmd(
    common: &Common,
    dataset: &Path,
    speaker: &Path,
    a: usize,
    b: usize,
    per_category: usize,
    top_n: usize,
) -> Result<()> {
    let cfg = common.resolve()?;
    let ds = load_dataset(dataset)?;
    let model = load_speaker(speaker)?;
    let pick = |c: usize| -> Vec<String> {
        ds.category_labels
            .iter()
            .filter(|(_, l)| *l == c)
            .take(per_category)
            .map(|(id, _)| id.clone())
            .collect()
    };
    let explain = ExplainConfig {
        beam_width: cfg.beam_width,
        max_len: 2 * cfg.resolved_profile()?.max_phrase_len + 1,
        top_n,
    };
    let report = explain_categories(&model, &ds.features(), &pick(a), &pick(b), &explain)?;
    let mut text = String::new();
    for (label, side) in [(a, &report.a), (b, &report.b)] {
        text += &format!("category {label}\n");
        for e in side {
            text += &format!("  {:>4} {:>5}  {}\n", e.image_frequency, e.phrase_frequency, e.phrase);
        }
    }
    write(&cfg.out.join("explanation.json"), &(serde_json::to_string_pretty(&report)? + "\n"))?;
    write(&cfg.out.join("explanation.txt"), &text)?;
    cfg.write_snapshot(&cfg.out)?;
    print!("{text}");
    Ok(())
}

fn export_cmd(
    common: &Common,
    listener: &Path,
    dataset: &Path,
    phrases: Option<PathBuf>,
    top: usize,
    split: &str,
) -> Result<()> {
    let cfg = common.resolve()?;
    let ds = load_dataset(dataset)?;
    let model = load_listener(listener)?;
    let list: Vec<Vec<String>> = match phrases {
        Some(path) => fs::read_to_string(&path)
            .with_context(|| format!("reading {}", path.display()))?
            .lines()
            .map(normalize_tokens)
            .filter(|t| !t.is_empty())
            .collect(),
        None => {
            let train = split_of(&ds, "train")?;
            let k = top.min(distinct_phrases(train));
            build_lexicon(train, k, false)?.phrases
        }
    };
    let ids = image_set(&ds, split)?;
    fs::create_dir_all(&cfg.out)?;
    let p = export_phrase_embeddings(&model, &list)?;
    p.write(&cfg.out.join("phrases.bin"))?;
    let i = export_image_embeddings(&model, &ds.features(), &ids)?;
    i.write(&cfg.out.join("images.bin"))?;
    cfg.write_snapshot(&cfg.out)?;
    println!("exported {} phrase and {} image vectors", p.len(), i.len());
    Ok(())
}

fn distinct_phrases(records: &[phrasegame::data::AnnotationRecord]) -> usize {
    let mut set = HashSet::new();
    for r in records {
        for pp in &r.phrase_pairs {
            set.insert(pp.left.text());
            set.insert(pp.right.text());
        }
    }
    set.len()
}
