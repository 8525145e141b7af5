use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::annotation::AnnotationRecord;
use super::phrase::PAIR_SEPARATOR;
use crate::error::{Error, Result};

pub const START_ID: usize = 0;
pub const END_ID: usize = 1;
pub const UNK_ID: usize = 2;
pub const VS_ID: usize = 3;
pub const NUM_SPECIALS: usize = 4;

pub const START_TOKEN: &str = "<s>";
pub const END_TOKEN: &str = "</s>";
pub const UNK_TOKEN: &str = "<unk>";

pub const DEFAULT_MIN_FREQ: usize = 6;

/// Word vocabulary with fixed special ids (start=0, end=1, unk=2, vs=3).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "VocabFile", into = "VocabFile")]
pub struct Vocabulary {
    tokens: Vec<String>,
    id_of: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct VocabFile {
    tokens: Vec<String>,
}

impl From<VocabFile> for Vocabulary {
    fn from(f: VocabFile) -> Self {
        Vocabulary::from_tokens(f.tokens)
    }
}

impl From<Vocabulary> for VocabFile {
    fn from(v: Vocabulary) -> Self {
        VocabFile { tokens: v.tokens }
    }
}

impl Vocabulary {
    fn from_tokens(tokens: Vec<String>) -> Self {
        let id_of = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Vocabulary { tokens, id_of }
    }

    /// Builds a vocabulary from an explicit word list, in the given order.
    pub fn from_words<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut tokens: Vec<String> = [START_TOKEN, END_TOKEN, UNK_TOKEN, PAIR_SEPARATOR]
            .iter()
            .map(|s| s.to_string())
            .collect();
        for w in words {
            let w = w.into();
            if !tokens.contains(&w) {
                tokens.push(w);
            }
        }
        Self::from_tokens(tokens)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> usize {
        self.id_of.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.id_of.contains_key(token)
    }

    pub fn token(&self, id: usize) -> &str {
        self.tokens.get(id).map(String::as_str).unwrap_or(UNK_TOKEN)
    }

    /// Non-special words in id order.
    pub fn words(&self) -> &[String] {
        &self.tokens[NUM_SPECIALS..]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// `start + ids + end`, with unknown words mapped to unk.
    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<usize> {
        let mut ids = Vec::with_capacity(tokens.len() + 2);
        ids.push(START_ID);
        ids.extend(tokens.iter().map(|t| self.id(t.as_ref())));
        ids.push(END_ID);
        ids
    }

    /// Inverse of [`encode`](Self::encode): drops start/end framing.
    pub fn decode(&self, ids: &[usize]) -> Vec<String> {
        ids.iter()
            .filter(|&&i| i != START_ID && i != END_ID)
            .map(|&i| self.token(i).to_string())
            .collect()
    }

    /// Rejects a vocabulary that was not built from `records`: every word it
    /// holds must occur in them.
    pub fn check_built_from(&self, records: &[AnnotationRecord]) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for r in records {
            for pp in &r.phrase_pairs {
                seen.extend(pp.left.tokens.iter().map(String::as_str));
                seen.extend(pp.right.tokens.iter().map(String::as_str));
            }
        }
        if self.words().is_empty() {
            return Err(Error::VocabMismatch("vocabulary has no words".into()));
        }
        if let Some(w) = self.words().iter().find(|w| !seen.contains(w.as_str())) {
            return Err(Error::VocabMismatch(format!(
                "vocabulary word {w:?} does not occur in the training records"
            )));
        }
        Ok(())
    }

    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for t in &self.tokens {
            h.update(t.as_bytes());
            h.update(b"\n");
        }
        hex::encode(h.finalize())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let s = serde_json::to_string_pretty(self)?;
        std::fs::write(path, s).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&s)?)
    }
}

/// Keeps words occurring at least `min_freq` times across both sides of every
/// phrase pair, ordered by descending count then lexicographically.
pub fn build_vocabulary(records: &[AnnotationRecord], min_freq: usize) -> Result<Vocabulary> {
    if records.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if min_freq == 0 {
        return Err(Error::ConfigError("min_freq must be at least 1".into()));
    }
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for r in records {
        for pp in &r.phrase_pairs {
            for t in pp.left.tokens.iter().chain(&pp.right.tokens) {
                *counts.entry(t.as_str()).or_default() += 1;
            }
        }
    }
    let mut kept: Vec<(&str, usize)> = counts
        .into_iter()
        .filter(|&(t, c)| c >= min_freq && t != PAIR_SEPARATOR)
        .collect();
    kept.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    Ok(Vocabulary::from_words(kept.into_iter().map(|(t, _)| t)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::phrase::{tokenize_phrase, PhrasePair};

    fn record(id: &str, left: &str, right: &str) -> AnnotationRecord {
        AnnotationRecord::new(
            id,
            "x",
            "y",
            vec![PhrasePair::new(
                tokenize_phrase(left).unwrap(),
                tokenize_phrase(right).unwrap(),
                1,
            )
            .unwrap()],
        )
        .unwrap()
    }

    #[test]
    fn min_freq_filters() {
        let v = build_vocabulary(&[record("p", "a a a", "b")], 2).unwrap();
        assert_eq!(v.words(), &["a".to_string()]);
        assert_eq!(v.len(), NUM_SPECIALS + 1);
    }

    #[test]
    fn order_is_frequency_then_lexicographic() {
        let v = build_vocabulary(&[record("p", "c b b", "a a c d")], 1).unwrap();
        assert_eq!(v.words(), &["a", "b", "c", "d"]);
        let v = build_vocabulary(&[record("p", "z z z", "a")], 1).unwrap();
        assert_eq!(v.words(), &["z", "a"]);
    }

    #[test]
    fn specials_fixed() {
        let v = Vocabulary::from_words(["x"]);
        assert_eq!(v.id(START_TOKEN), START_ID);
        assert_eq!(v.id(END_TOKEN), END_ID);
        assert_eq!(v.id(UNK_TOKEN), UNK_ID);
        assert_eq!(v.id("vs"), VS_ID);
    }

    #[test]
    fn empty_corpus() {
        assert!(matches!(build_vocabulary(&[], 1), Err(Error::EmptyCorpus)));
    }

    #[test]
    fn encode_frames_and_maps_unknown() {
        let v = Vocabulary::from_words(["red", "body"]);
        let ids = v.encode(&["red", "wing", "body"]);
        assert_eq!(ids, vec![START_ID, 4, UNK_ID, 5, END_ID]);
        assert_eq!(v.decode(&ids), vec!["red", UNK_TOKEN, "body"]);
        let only_unk = v.encode(&["wing"]);
        assert_eq!(only_unk, vec![START_ID, UNK_ID, END_ID]);
    }

    #[test]
    fn json_round_trip() {
        let v = Vocabulary::from_words(["red", "body"]);
        let s = serde_json::to_string(&v).unwrap();
        let back: Vocabulary = serde_json::from_str(&s).unwrap();
        assert_eq!(v, back);
        assert_eq!(v.hash(), back.hash());
    }
}
