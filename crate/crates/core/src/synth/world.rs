use std::collections::{BTreeMap, HashMap};

use ndarray::Array2;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::grammar::{Grammar, SlotValue};
use crate::data::{tokenize_phrase, AnnotationRecord, FeatureStore, PhrasePair};
use crate::error::{Error, Result};

pub const MAX_RESAMPLES: usize = 1000;
pub const PHRASES_PER_RECORD: usize = 5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlotSpec {
    pub name: String,
    pub values: Vec<String>,
}

impl SlotSpec {
    pub fn new(name: &str, values: &[&str]) -> Self {
        SlotSpec {
            name: name.to_string(),
            values: values.iter().map(|v| v.to_string()).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldSpec {
    pub slots: Vec<SlotSpec>,
    /// Slot names, most salient first. Annotation positions follow this order.
    pub saliency_order: Vec<String>,
    pub feature_dim: usize,
    pub noise_sigma: f64,
    pub seed: u64,
    /// Perturbs each slot's latent one-hot with noise growing linearly with its
    /// saliency rank, so less salient slots are harder to read off features.
    #[serde(default)]
    pub saliency_difficulty: bool,
    #[serde(default = "default_saliency_noise_step")]
    pub saliency_noise_step: f64,
    /// Probability that a phrase pair is replaced by a random unrelated one.
    #[serde(default)]
    pub annotation_noise: f64,
}

fn default_saliency_noise_step() -> f64 {
    0.25
}

impl Default for WorldSpec {
    fn default() -> Self {
        WorldSpec {
            slots: vec![
                SlotSpec::new("body_color", &["red", "blue", "green", "white", "yellow"]),
                SlotSpec::new("size", &["small", "medium", "large"]),
                SlotSpec::new("nose", &["pointy", "round"]),
                SlotSpec::new("engines", &["one", "two", "four"]),
                SlotSpec::new("tail", &["high", "low"]),
                SlotSpec::new("background", &["sky", "grass", "concrete"]),
            ],
            saliency_order: ["body_color", "nose", "engines", "size", "tail", "background"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            feature_dim: 64,
            noise_sigma: 0.1,
            seed: 0,
            saliency_difficulty: false,
            saliency_noise_step: default_saliency_noise_step(),
            annotation_noise: 0.0,
        }
    }
}

impl WorldSpec {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn one_hot_width(&self) -> usize {
        self.slots.iter().map(|s| s.values.len()).sum()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidWorld(m));
        if self.slots.len() < PHRASES_PER_RECORD {
            return bad(format!("{} slots, need at least 5", self.slots.len()));
        }
        if let Some(s) = self.slots.iter().find(|s| s.values.len() < 2) {
            return bad(format!("slot {} has fewer than two values", s.name));
        }
        if self.feature_dim < self.one_hot_width() {
            return bad(format!(
                "feature_dim {} below one-hot width {}",
                self.feature_dim,
                self.one_hot_width()
            ));
        }
        let mut order = self.saliency_order.clone();
        order.sort();
        let mut names: Vec<String> = self.slots.iter().map(|s| s.name.clone()).collect();
        names.sort();
        if order != names {
            return bad("saliency_order is not a permutation of the slots".into());
        }
        if self.noise_sigma.is_nan() || self.noise_sigma < 0.0 || !(0.0..=1.0).contains(&self.annotation_noise) {
            return bad("noise parameters out of range".into());
        }
        Ok(())
    }

    pub fn slot(&self, name: &str) -> Option<&SlotSpec> {
        self.slots.iter().find(|s| s.name == name)
    }

    pub fn saliency_rank(&self, slot: &str) -> Option<usize> {
        self.saliency_order.iter().position(|s| s == slot)
    }
}

/// A latent slot assignment with its derived feature vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthObject {
    pub object_id: String,
    pub assignment: BTreeMap<String, String>,
    #[serde(skip)]
    pub feature: Vec<f32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_path: Option<String>,
}

impl SynthObject {
    pub fn value(&self, slot: &str) -> Option<&str> {
        self.assignment.get(slot).map(String::as_str)
    }

    pub fn has(&self, sv: &SlotValue) -> bool {
        self.value(&sv.slot) == Some(sv.value.as_str())
    }

    /// Slots on which two objects differ, in `order`.
    pub fn differing_slots<'a>(&self, other: &SynthObject, order: &'a [String]) -> Vec<&'a String> {
        order
            .iter()
            .filter(|s| self.assignment.get(*s) != other.assignment.get(*s))
            .collect()
    }
}

/// Which image of a pair a phrase singles out.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Grounding {
    Left,
    Right,
    Ambiguous,
}

/// Ground-truth listener: parses the phrase with the grammar and checks the
/// latent assignments.
pub fn oracle_ground(
    grammar: &Grammar,
    phrase: &[String],
    first: &SynthObject,
    second: &SynthObject,
) -> Grounding {
    let Some(sv) = grammar.parse(phrase) else {
        return Grounding::Ambiguous;
    };
    match (first.has(sv), second.has(sv)) {
        (true, false) => Grounding::Left,
        (false, true) => Grounding::Right,
        _ => Grounding::Ambiguous,
    }
}

pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// A world instance: spec, grammar and the fixed latent-to-feature projection.
#[derive(Clone, Debug)]
pub struct World {
    pub spec: WorldSpec,
    pub grammar: Grammar,
    projection: Array2<f64>,
    offsets: HashMap<String, usize>,
}

impl World {
    pub fn new(spec: WorldSpec) -> Result<Self> {
        spec.validate()?;
        let grammar = Grammar::for_world(&spec)?;
        let width = spec.one_hot_width();
        let mut rng = rng_for(spec.seed, 0);
        let scale = 1.0 / (spec.slots.len() as f64).sqrt();
        let normal = Normal::new(0.0, scale).unwrap();
        let projection =
            Array2::from_shape_simple_fn((width, spec.feature_dim), || normal.sample(&mut rng));
        let mut offsets = HashMap::new();
        let mut off = 0;
        for s in &spec.slots {
            offsets.insert(s.name.clone(), off);
            off += s.values.len();
        }
        Ok(World {
            spec,
            grammar,
            projection,
            offsets,
        })
    }

    pub fn random_assignment(&self, rng: &mut impl Rng) -> BTreeMap<String, String> {
        self.spec
            .slots
            .iter()
            .map(|s| (s.name.clone(), s.values.choose(rng).unwrap().clone()))
            .collect()
    }

    /// `projection(one_hot(assignment)) + N(0, noise_sigma)`.
    pub fn feature(&self, assignment: &BTreeMap<String, String>, rng: &mut impl Rng) -> Result<Vec<f32>> {
        let width = self.spec.one_hot_width();
        let mut latent = vec![0.0f64; width];
        for slot in &self.spec.slots {
            let value = assignment.get(&slot.name).ok_or_else(|| Error::UnknownSlotValue {
                slot: slot.name.clone(),
                value: String::new(),
            })?;
            let idx = slot.values.iter().position(|v| v == value).ok_or_else(|| {
                Error::UnknownSlotValue {
                    slot: slot.name.clone(),
                    value: value.clone(),
                }
            })?;
            let off = self.offsets[&slot.name];
            latent[off + idx] = 1.0;
            if self.spec.saliency_difficulty {
                let rank = self.spec.saliency_rank(&slot.name).unwrap_or(0) as f64;
                let sigma = self.spec.saliency_noise_step * rank;
                if sigma > 0.0 {
                    let n = Normal::new(0.0, sigma).unwrap();
                    for k in 0..slot.values.len() {
                        latent[off + k] += n.sample(rng);
                    }
                }
            }
        }
        let noise = Normal::new(0.0, self.spec.noise_sigma.max(0.0)).unwrap();
        let mut out = Vec::with_capacity(self.spec.feature_dim);
        for j in 0..self.spec.feature_dim {
            let mut v = 0.0;
            for (i, &l) in latent.iter().enumerate() {
                if l != 0.0 {
                    v += l * self.projection[[i, j]];
                }
            }
            if self.spec.noise_sigma > 0.0 {
                v += noise.sample(rng);
            }
            out.push(v as f32);
        }
        Ok(out)
    }

    pub fn make_object(
        &self,
        id: impl Into<String>,
        assignment: BTreeMap<String, String>,
        rng: &mut impl Rng,
    ) -> Result<SynthObject> {
        let feature = self.feature(&assignment, rng)?;
        Ok(SynthObject {
            object_id: id.into(),
            assignment,
            feature,
            image_path: None,
        })
    }

    pub fn sample_object(&self, id: impl Into<String>, rng: &mut impl Rng) -> SynthObject {
        let a = self.random_assignment(rng);
        self.make_object(id, a, rng).expect("sampled assignment is valid")
    }

    fn phrase_for(&self, sv: &SlotValue, rng: &mut impl Rng) -> String {
        self.grammar.surfaces(sv).choose(rng).unwrap().clone()
    }

    /// Five phrase pairs for the five most salient differing slots. Returns
    /// `None` when fewer than five slots differ.
    pub fn annotate(
        &self,
        pair_id: String,
        a: &SynthObject,
        b: &SynthObject,
        rng: &mut impl Rng,
    ) -> Result<Option<AnnotationRecord>> {
        let diff = a.differing_slots(b, &self.spec.saliency_order);
        if diff.len() < PHRASES_PER_RECORD {
            return Ok(None);
        }
        let mut pairs = Vec::with_capacity(PHRASES_PER_RECORD);
        for (k, slot) in diff.iter().take(PHRASES_PER_RECORD).enumerate() {
            let sva = SlotValue::new(slot.as_str(), a.assignment[*slot].as_str());
            let svb = SlotValue::new(slot.as_str(), b.assignment[*slot].as_str());
            let (mut left, mut right) = (self.phrase_for(&sva, rng), self.phrase_for(&svb, rng));
            if self.spec.annotation_noise > 0.0 && rng.random_bool(self.spec.annotation_noise) {
                let s = self.spec.slots.choose(rng).unwrap();
                let pick = |rng: &mut dyn rand::RngCore| {
                    let v = s.values.choose(rng).unwrap();
                    SlotValue::new(&s.name, v)
                };
                left = self.phrase_for(&pick(rng), rng);
                right = self.phrase_for(&pick(rng), rng);
            }
            pairs.push(PhrasePair::new(
                tokenize_phrase(&left)?,
                tokenize_phrase(&right)?,
                (k + 1) as u8,
            )?);
        }
        Ok(Some(AnnotationRecord::new(
            pair_id,
            &a.object_id,
            &b.object_id,
            pairs,
        )?))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSizes {
    pub name: String,
    pub pairs: usize,
    /// Distinct objects the split's pairs are drawn from; defaults to `pairs`.
    #[serde(default)]
    pub objects: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub splits: Vec<SplitSizes>,
    /// Labelled category objects for classification and explanations.
    pub categories: usize,
    pub per_category: usize,
    pub category_variation: f64,
}

impl GenConfig {
    pub fn new(train: usize, val: usize, test: usize) -> Self {
        let s = |name: &str, pairs| SplitSizes {
            name: name.into(),
            pairs,
            objects: None,
        };
        GenConfig {
            splits: vec![s("train", train), s("val", val), s("test", test)],
            categories: 0,
            per_category: 0,
            category_variation: 0.1,
        }
    }

    pub fn with_categories(mut self, categories: usize, per_category: usize) -> Self {
        self.categories = categories;
        self.per_category = per_category;
        self
    }
}

/// Everything one generation run produces.
#[derive(Clone, Debug)]
pub struct SynthDataset {
    pub world: World,
    pub config: GenConfig,
    pub splits: Vec<(String, Vec<AnnotationRecord>)>,
    /// `(split or "categories", object)` in generation order.
    pub objects: Vec<(String, SynthObject)>,
    /// `(object_id, category index)` for category objects.
    pub category_labels: Vec<(String, usize)>,
}

impl SynthDataset {
    pub fn split(&self, name: &str) -> &[AnnotationRecord] {
        self.splits
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, r)| r.as_slice())
            .unwrap_or(&[])
    }

    pub fn features(&self) -> FeatureStore {
        let mut fs = FeatureStore::new(self.world.spec.feature_dim);
        for (_, o) in &self.objects {
            fs.push(o.object_id.clone(), &o.feature).expect("unique ids");
        }
        fs
    }

    pub fn object_index(&self) -> HashMap<String, SynthObject> {
        self.objects
            .iter()
            .map(|(_, o)| (o.object_id.clone(), o.clone()))
            .collect()
    }

    pub fn objects_in(&self, split: &str) -> Vec<&SynthObject> {
        self.objects
            .iter()
            .filter(|(s, _)| s == split)
            .map(|(_, o)| o)
            .collect()
    }
}

pub fn generate_dataset(spec: WorldSpec, config: &GenConfig) -> Result<SynthDataset> {
    let world = World::new(spec)?;
    let mut splits = Vec::new();
    let mut objects = Vec::new();
    for (k, split) in config.splits.iter().enumerate() {
        let mut rng = rng_for(world.spec.seed, 1 + k as u64);
        let n_obj = split.objects.unwrap_or(split.pairs).max(2);
        let pool: Vec<SynthObject> = (0..n_obj)
            .map(|i| world.sample_object(format!("{}-obj-{i:05}", split.name), &mut rng))
            .collect();
        let mut records = Vec::with_capacity(split.pairs);
        let mut failures = 0;
        while records.len() < split.pairs {
            let ia = rng.random_range(0..pool.len());
            let mut ib = rng.random_range(0..pool.len() - 1);
            if ib >= ia {
                ib += 1;
            }
            let id = format!("{}-{:05}", split.name, records.len());
            match world.annotate(id, &pool[ia], &pool[ib], &mut rng)? {
                Some(r) => {
                    records.push(r);
                    failures = 0;
                }
                None => {
                    failures += 1;
                    if failures >= MAX_RESAMPLES {
                        return Err(Error::InfeasibleWorld(MAX_RESAMPLES));
                    }
                }
            }
        }
        objects.extend(pool.into_iter().map(|o| (split.name.clone(), o)));
        splits.push((split.name.clone(), records));
    }

    let mut category_labels = Vec::new();
    if config.categories > 0 {
        let mut rng = rng_for(world.spec.seed, 100);
        let cats = super::categories::generate_categories(
            &world,
            config.categories,
            config.per_category,
            config.category_variation,
            &mut rng,
        )?;
        for (o, c) in cats {
            category_labels.push((o.object_id.clone(), c));
            objects.push(("categories".to_string(), o));
        }
    }

    Ok(SynthDataset {
        world,
        config: config.clone(),
        splits,
        objects,
        category_labels,
    })
}
