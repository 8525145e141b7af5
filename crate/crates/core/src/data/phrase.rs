use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Surface form of the reserved word separating the two halves of a phrase pair.
pub const PAIR_SEPARATOR: &str = "vs";

pub const DEFAULT_MAX_PHRASE_LEN: usize = 14;

/// A short description of one visual property, e.g. "pointy nose".
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AttributePhrase {
    pub tokens: Vec<String>,
    pub raw_text: String,
}

impl AttributePhrase {
    pub fn text(&self) -> String {
        self.tokens.join(" ")
    }
}

/// Lowercases, splits on whitespace and strips trailing `.,!?` from every token.
/// Tokens emptied by stripping are dropped.
pub fn normalize_tokens(raw: &str) -> Vec<String> {
    raw.split_whitespace()
        .map(|t| {
            t.to_lowercase()
                .trim_end_matches(['.', ',', '!', '?'])
                .to_string()
        })
        .filter(|t| !t.is_empty())
        .collect()
}

pub fn tokenize_phrase(raw: &str) -> Result<AttributePhrase> {
    tokenize_phrase_with_limit(raw, DEFAULT_MAX_PHRASE_LEN)
}

pub fn tokenize_phrase_with_limit(raw: &str, max_len: usize) -> Result<AttributePhrase> {
    let mut tokens = normalize_tokens(raw);
    if tokens.is_empty() {
        return Err(Error::EmptyPhrase);
    }
    if let Some(t) = tokens.iter().find(|t| t.as_str() == PAIR_SEPARATOR) {
        return Err(Error::ReservedToken(t.clone()));
    }
    tokens.truncate(max_len);
    Ok(AttributePhrase {
        tokens,
        raw_text: raw.to_string(),
    })
}

/// One "P1 vs P2" difference; `left` describes image a, `right` image b.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PhrasePair {
    pub left: AttributePhrase,
    pub right: AttributePhrase,
    /// 1-based order in which the difference was listed.
    pub position: u8,
}

impl PhrasePair {
    pub fn new(left: AttributePhrase, right: AttributePhrase, position: u8) -> Result<Self> {
        if !(1..=5).contains(&position) {
            return Err(Error::InvalidRecord(format!(
                "position {position} outside 1..=5"
            )));
        }
        Ok(PhrasePair {
            left,
            right,
            position,
        })
    }

    /// `left.tokens + ["vs"] + right.tokens`.
    pub fn serialized_tokens(&self) -> Vec<String> {
        join_pair(&self.left.tokens, &self.right.tokens)
    }

    /// The same difference as seen from image b.
    pub fn swapped(&self) -> PhrasePair {
        PhrasePair {
            left: self.right.clone(),
            right: self.left.clone(),
            position: self.position,
        }
    }
}

pub fn join_pair(first: &[String], second: &[String]) -> Vec<String> {
    let mut out = Vec::with_capacity(first.len() + second.len() + 1);
    out.extend_from_slice(first);
    out.push(PAIR_SEPARATOR.to_string());
    out.extend_from_slice(second);
    out
}

/// Splits a decoded sequence at its first separator. Without a separator the
/// whole sequence is the first half and the second half is empty.
pub fn split_phrase_pair<T: AsRef<str> + Clone>(tokens: &[T]) -> (Vec<T>, Vec<T>) {
    match tokens.iter().position(|t| t.as_ref() == PAIR_SEPARATOR) {
        Some(i) => (tokens[..i].to_vec(), tokens[i + 1..].to_vec()),
        None => (tokens.to_vec(), Vec::new()),
    }
}
