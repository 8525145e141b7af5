use std::cell::RefCell;
use std::collections::HashMap;

use ndarray::Axis;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{split_phrase_pair, FeatureStore};
use crate::error::Result;
use crate::listener::{ListenerModel, ListenerScore};
use crate::synth::{oracle_ground, Grammar, Grounding, SynthObject};

/// A listener in the reference game: how likely a phrase refers to the
/// left or the right image.
pub trait Judge {
    fn judge(&self, left: &str, right: &str, phrase: &[String]) -> Result<ListenerScore>;

    fn judge_batch(&self, queries: &[(&str, &str, &[String])]) -> Result<Vec<ListenerScore>> {
        queries.iter().map(|(l, r, p)| self.judge(l, r, p)).collect()
    }
}

/// Parses the phrase with the world grammar and checks latent assignments:
/// certain when exactly one image matches, a coin flip otherwise.
pub struct OracleJudge<'a> {
    pub grammar: &'a Grammar,
    pub objects: &'a HashMap<String, SynthObject>,
}

impl Judge for OracleJudge<'_> {
    fn judge(&self, left: &str, right: &str, phrase: &[String]) -> Result<ListenerScore> {
        let get = |id: &str| {
            self.objects
                .get(id)
                .ok_or_else(|| crate::Error::UnknownImage(id.to_string()))
        };
        let (p_left, p_right) = match oracle_ground(self.grammar, phrase, get(left)?, get(right)?) {
            Grounding::Left => (1.0, 0.0),
            Grounding::Right => (0.0, 1.0),
            Grounding::Ambiguous => (0.5, 0.5),
        };
        Ok(ListenerScore { p_left, p_right })
    }
}

/// A trained listener reading precomputed features.
pub struct ModelJudge<'a> {
    pub listener: &'a ListenerModel,
    pub features: &'a FeatureStore,
}

impl Judge for ModelJudge<'_> {
    fn judge(&self, left: &str, right: &str, phrase: &[String]) -> Result<ListenerScore> {
        self.listener.score_ids(self.features, left, right, phrase)
    }

    fn judge_batch(&self, queries: &[(&str, &str, &[String])]) -> Result<Vec<ListenerScore>> {
        let lefts: Vec<&str> = queries.iter().map(|q| q.0).collect();
        let rights: Vec<&str> = queries.iter().map(|q| q.1).collect();
        let phrases: Vec<Vec<String>> = queries.iter().map(|q| q.2.to_vec()).collect();
        let l = self.features.matrix(&lefts)?;
        let r = self.features.matrix(&rights)?;
        let mut out = Vec::with_capacity(queries.len());
        // chunk to bound memory on large evaluations
        const CHUNK: usize = 4096;
        for start in (0..queries.len()).step_by(CHUNK) {
            let end = (start + CHUNK).min(queries.len());
            out.extend(self.listener.score_batch(
                &l.slice_axis(Axis(0), (start..end).into()),
                &r.slice_axis(Axis(0), (start..end).into()),
                &phrases[start..end],
            )?);
        }
        Ok(out)
    }
}

/// Reads a phrase pair `P1 vs P2` (P1 describing the left image) with a
/// simple listener by averaging both directed scores.
pub struct TwoSimpleJudge<'a> {
    pub listener: &'a ListenerModel,
    pub features: &'a FeatureStore,
}

impl Judge for TwoSimpleJudge<'_> {
    fn judge(&self, left: &str, right: &str, phrase: &[String]) -> Result<ListenerScore> {
        let (p1, p2) = split_phrase_pair(phrase);
        self.listener.discerning_score(
            &self.features.get_f64(left)?,
            &self.features.get_f64(right)?,
            &p1,
            &p2,
        )
    }
}

/// Picks a side uniformly at random, ignoring the phrase.
pub struct RandomJudge {
    rng: RefCell<ChaCha8Rng>,
}

impl RandomJudge {
    pub fn new(seed: u64) -> Self {
        RandomJudge {
            rng: RefCell::new(ChaCha8Rng::seed_from_u64(seed)),
        }
    }
}

impl Judge for RandomJudge {
    fn judge(&self, _: &str, _: &str, _: &[String]) -> Result<ListenerScore> {
        let left = self.rng.borrow_mut().random_bool(0.5);
        Ok(if left {
            ListenerScore {
                p_left: 1.0,
                p_right: 0.0,
            }
        } else {
            ListenerScore {
                p_left: 0.0,
                p_right: 1.0,
            }
        })
    }
}
