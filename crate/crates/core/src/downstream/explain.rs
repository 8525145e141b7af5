use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::data::{split_phrase_pair, FeatureStore};
use crate::error::{Error, Result};
use crate::speaker::{beam_decode, SpeakerKind, SpeakerModel, DEFAULT_BEAM_WIDTH};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExplainConfig {
    pub beam_width: usize,
    /// Decode length limit for the whole `P1 vs P2` sequence.
    pub max_len: usize,
    pub top_n: usize,
}

impl Default for ExplainConfig {
    fn default() -> Self {
        ExplainConfig {
            beam_width: DEFAULT_BEAM_WIDTH,
            max_len: 29,
            top_n: 10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExplanationEntry {
    pub phrase: String,
    /// Images of this category the phrase describes, minus images of the
    /// other category.
    pub image_frequency: i64,
    /// Occurrences credited to this category, minus occurrences credited to
    /// the other.
    pub phrase_frequency: i64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExplanationReport {
    pub a: Vec<ExplanationEntry>,
    pub b: Vec<ExplanationEntry>,
}

#[derive(Default)]
struct SideCounts {
    images: BTreeMap<String, BTreeSet<String>>,
    occurrences: BTreeMap<String, i64>,
}

/// Phrases that tell category `a` apart from category `b`.
///
/// Every cross pair `(x in a, y in b)` is decoded in both orders, so swapping
/// the arguments only swaps the two lists. The first half of a decoded pair is
/// credited to the target's side and describes the target; the second half
/// goes to the other side. Within one cross pair and side a phrase counts once.
pub fn explain_categories<S: AsRef<str>>(
    speaker: &SpeakerModel,
    features: &FeatureStore,
    a: &[S],
    b: &[S],
    config: &ExplainConfig,
) -> Result<ExplanationReport> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyCategory);
    }
    if speaker.kind != SpeakerKind::Discerning {
        return Err(Error::ConfigError("explanations need a discerning speaker".into()));
    }
    let mut cache: HashMap<(String, String), Vec<(String, String)>> = HashMap::new();
    let mut decode = |target: &str, other: &str| -> Result<Vec<(String, String)>> {
        let key = (target.to_string(), other.to_string());
        if let Some(v) = cache.get(&key) {
            return Ok(v.clone());
        }
        let ctx = speaker.context_for(features, target, other)?;
        let halves: Vec<(String, String)> = beam_decode(speaker, &ctx, config.beam_width, config.max_len)?
            .into_iter()
            .map(|p| {
                let (first, second) = split_phrase_pair(&p.tokens);
                (first.join(" "), second.join(" "))
            })
            .collect();
        cache.insert(key, halves.clone());
        Ok(halves)
    };

    let mut side_a = SideCounts::default();
    let mut side_b = SideCounts::default();
    for x in a {
        for y in b {
            let (x, y) = (x.as_ref(), y.as_ref());
            let mut for_a: BTreeSet<String> = BTreeSet::new();
            let mut for_b: BTreeSet<String> = BTreeSet::new();
            for (first, second) in decode(x, y)? {
                for_a.insert(first);
                for_b.insert(second);
            }
            for (first, second) in decode(y, x)? {
                for_b.insert(first);
                for_a.insert(second);
            }
            for (set, counts, image) in [(for_a, &mut side_a, x), (for_b, &mut side_b, y)] {
                for phrase in set.into_iter().filter(|p| !p.is_empty()) {
                    counts.images.entry(phrase.clone()).or_default().insert(image.to_string());
                    *counts.occurrences.entry(phrase).or_default() += 1;
                }
            }
        }
    }
    Ok(ExplanationReport {
        a: rank_side(&side_a, &side_b, config.top_n),
        b: rank_side(&side_b, &side_a, config.top_n),
    })
}

fn rank_side(own: &SideCounts, other: &SideCounts, top_n: usize) -> Vec<ExplanationEntry> {
    let mut entries: Vec<ExplanationEntry> = own
        .occurrences
        .iter()
        .map(|(phrase, &n)| {
            let imgs = own.images[phrase].len() as i64;
            let other_imgs = other.images.get(phrase).map_or(0, |s| s.len() as i64);
            let other_n = other.occurrences.get(phrase).copied().unwrap_or(0);
            ExplanationEntry {
                phrase: phrase.clone(),
                image_frequency: imgs - other_imgs,
                phrase_frequency: n - other_n,
            }
        })
        .collect();
    entries.sort_by(|x, y| {
        y.image_frequency
            .cmp(&x.image_frequency)
            .then(y.phrase_frequency.cmp(&x.phrase_frequency))
            .then_with(|| x.phrase.cmp(&y.phrase))
    });
    entries.truncate(top_n);
    entries
}
