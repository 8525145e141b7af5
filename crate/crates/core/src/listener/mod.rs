//! Listeners: pick the image of a pair a phrase refers to.
//!
//! The score of image `I` for phrase `P` is `phi(I) . theta(P)`, where
//! `phi(I) = relu(I W + b)` and `theta(P)` is the final hidden state of an
//! LSTM run over `<s> P </s>`. The pair probability is the two-way softmax of
//! the two scores.

mod train;

use std::collections::BTreeMap;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{join_pair, FeatureStore, Vocabulary};
use crate::error::{Error, Result};
use crate::nn::layers::{embed, linear, relu};
use crate::nn::{
    glorot, init_lstm, length_groups, load_checkpoint_expecting, lstm_step_infer, save_checkpoint,
    uniform, ArchManifest, CheckpointManifest, LstmState, LstmWeights, ParameterSet,
    TrainingMetadata,
};

pub use train::{listener_loss_and_grad, train_listener, ListenerBatch, ListenerTrainReport};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ListenerKind {
    /// Scores a single phrase.
    Simple,
    /// Scores a serialized phrase pair `P1 vs P2`.
    Discerning,
}

/// Where a simple listener's distractor comes from during training.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// The other image of the annotated pair.
    Contrastive,
    /// A uniformly drawn other training image, redrawn every epoch.
    RandomNegative,
}

impl ListenerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ListenerKind::Simple => "simple",
            ListenerKind::Discerning => "discerning",
        }
    }
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Contrastive => "contrastive",
            Regime::RandomNegative => "random_negative",
        }
    }
}

/// Probability that the phrase refers to each image.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ListenerScore {
    pub p_left: f64,
    pub p_right: f64,
}

impl ListenerScore {
    /// Two-way softmax with the larger logit subtracted first.
    pub fn from_logits(s_left: f64, s_right: f64) -> Self {
        let m = s_left.max(s_right);
        let (el, er) = ((s_left - m).exp(), (s_right - m).exp());
        let z = el + er;
        ListenerScore {
            p_left: el / z,
            p_right: er / z,
        }
    }

    pub fn swapped(self) -> Self {
        ListenerScore {
            p_left: self.p_right,
            p_right: self.p_left,
        }
    }

    /// Mean of two scores for the same image order.
    pub fn average(a: Self, b: Self) -> Self {
        ListenerScore {
            p_left: (a.p_left + b.p_left) / 2.0,
            p_right: (a.p_right + b.p_right) / 2.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ListenerModel {
    pub kind: ListenerKind,
    pub regime: Regime,
    pub params: ParameterSet,
    pub vocab: Vocabulary,
}

impl ListenerModel {
    pub fn new(
        kind: ListenerKind,
        regime: Regime,
        vocab: Vocabulary,
        feature_dim: usize,
        embed_dim: usize,
        hidden: usize,
        rng: &mut impl Rng,
    ) -> Self {
        let mut params = ParameterSet::new();
        params.insert("embedding", uniform(rng, vocab.len(), embed_dim, 0.1));
        init_lstm(&mut params, rng, "enc", embed_dim, hidden);
        params.insert("img.w", glorot(rng, feature_dim, hidden));
        params.insert("img.b", Array2::zeros((1, hidden)));
        ListenerModel {
            kind,
            regime,
            params,
            vocab,
        }
    }

    pub fn feature_dim(&self) -> usize {
        self.params.get("img.w").nrows()
    }

    pub fn hidden(&self) -> usize {
        self.params.get("img.w").ncols()
    }

    pub fn embed_dim(&self) -> usize {
        self.params.get("embedding").ncols()
    }

    pub fn arch(&self) -> ArchManifest {
        let dims = BTreeMap::from([
            ("vocab".to_string(), self.vocab.len()),
            ("embed".to_string(), self.embed_dim()),
            ("hidden".to_string(), self.hidden()),
            ("feature".to_string(), self.feature_dim()),
        ]);
        ArchManifest {
            model: "listener".into(),
            kind: self.kind.as_str().into(),
            dims,
            vocab_hash: self.vocab.hash(),
            options: BTreeMap::from([("regime".to_string(), self.regime.as_str().to_string())]),
        }
    }

    pub fn save(&self, dir: &Path, metadata: TrainingMetadata) -> Result<()> {
        let manifest = CheckpointManifest {
            arch: self.arch(),
            tensors: self.params.shapes(),
            metadata,
        };
        save_checkpoint(dir, &manifest, &self.params, &self.vocab)
    }

    /// Loads a checkpoint, requiring it to match `expected`'s architecture
    /// when given.
    pub fn load(dir: &Path, expected: Option<&ArchManifest>) -> Result<(Self, TrainingMetadata)> {
        let (manifest, params, vocab) = match expected {
            Some(arch) => load_checkpoint_expecting(dir, arch)?,
            None => crate::nn::load_checkpoint(dir)?,
        };
        if manifest.arch.model != "listener" {
            return Err(Error::ManifestMismatch(format!(
                "expected a listener checkpoint, found {}",
                manifest.arch.model
            )));
        }
        let kind = match manifest.arch.kind.as_str() {
            "simple" => ListenerKind::Simple,
            "discerning" => ListenerKind::Discerning,
            k => return Err(Error::ManifestMismatch(format!("unknown listener kind {k}"))),
        };
        let regime = match manifest.arch.options.get("regime").map(String::as_str) {
            Some("random_negative") => Regime::RandomNegative,
            _ => Regime::Contrastive,
        };
        let model = ListenerModel {
            kind,
            regime,
            params,
            vocab,
        };
        model.check_shapes()?;
        Ok((model, manifest.metadata))
    }

    fn check_shapes(&self) -> Result<()> {
        let h = self.hidden();
        let e = self.embed_dim();
        let ok = self.params.get("embedding").nrows() == self.vocab.len()
            && self.params.get("enc.wx").dim() == (e, 4 * h)
            && self.params.get("enc.wh").dim() == (h, 4 * h)
            && self.params.get("img.b").dim() == (1, h);
        if ok {
            Ok(())
        } else {
            Err(Error::ShapeMismatch("listener tensors are inconsistent".into()))
        }
    }

    /// `phi(I)` for each row of `features`.
    pub fn image_embedding(&self, features: &ArrayView2<f64>) -> Result<Array2<f64>> {
        if features.ncols() != self.feature_dim() {
            return Err(Error::ShapeMismatch(format!(
                "feature dim {} but listener expects {}",
                features.ncols(),
                self.feature_dim()
            )));
        }
        Ok(relu(&linear(features, self.params.get("img.w"), self.params.get("img.b"))))
    }

    /// Token ids the encoder reads for a phrase (or serialized pair).
    pub fn encode(&self, tokens: &[String]) -> Vec<usize> {
        self.vocab.encode(tokens)
    }

    /// `theta` for a batch of id sequences that all have the same length.
    pub fn encode_ids(&self, seqs: &[Vec<usize>]) -> Array2<f64> {
        let w = LstmWeights::from_params(&self.params, "enc");
        let mut state = LstmState::zeros(seqs.len(), self.hidden());
        let len = seqs.first().map_or(0, Vec::len);
        for t in 0..len {
            let ids: Vec<usize> = seqs.iter().map(|s| s[t]).collect();
            let x = embed(self.params.get("embedding"), &ids);
            state = lstm_step_infer(w, &x.view(), &state);
        }
        state.h
    }

    /// `theta` for phrases of any lengths, one row per phrase.
    pub fn phrase_embeddings(&self, phrases: &[Vec<String>]) -> Array2<f64> {
        let encoded: Vec<Vec<usize>> = phrases.iter().map(|p| self.encode(p)).collect();
        let lengths: Vec<usize> = encoded.iter().map(Vec::len).collect();
        let mut out = Array2::zeros((phrases.len(), self.hidden()));
        for group in length_groups(&lengths) {
            let seqs: Vec<Vec<usize>> = group.iter().map(|&i| encoded[i].clone()).collect();
            let theta = self.encode_ids(&seqs);
            for (r, &i) in group.iter().enumerate() {
                out.row_mut(i).assign(&theta.row(r));
            }
        }
        out
    }

    pub fn phrase_embedding(&self, phrase: &[String]) -> Array1<f64> {
        self.phrase_embeddings(&[phrase.to_vec()]).row(0).to_owned()
    }

    /// Row-wise `phi . theta`.
    pub fn bilinear(phi: &Array2<f64>, theta: &Array2<f64>) -> Array1<f64> {
        (phi * theta).sum_axis(Axis(1))
    }

    /// Pair scores for aligned rows of `left`, `right` and `phrases`.
    pub fn score_batch(
        &self,
        left: &ArrayView2<f64>,
        right: &ArrayView2<f64>,
        phrases: &[Vec<String>],
    ) -> Result<Vec<ListenerScore>> {
        if left.nrows() != phrases.len() || right.nrows() != phrases.len() {
            return Err(Error::ShapeMismatch("batch rows differ".into()));
        }
        let theta = self.phrase_embeddings(phrases);
        let s1 = Self::bilinear(&self.image_embedding(left)?, &theta);
        let s2 = Self::bilinear(&self.image_embedding(right)?, &theta);
        Ok(s1
            .iter()
            .zip(s2.iter())
            .map(|(&a, &b)| ListenerScore::from_logits(a, b))
            .collect())
    }

    pub fn score(&self, left: &[f64], right: &[f64], phrase: &[String]) -> Result<ListenerScore> {
        let l = ArrayView2::from_shape((1, left.len()), left)
            .map_err(|e| Error::ShapeMismatch(e.to_string()))?;
        let r = ArrayView2::from_shape((1, right.len()), right)
            .map_err(|e| Error::ShapeMismatch(e.to_string()))?;
        Ok(self.score_batch(&l, &r, &[phrase.to_vec()])?[0])
    }

    pub fn score_ids(
        &self,
        features: &FeatureStore,
        left: &str,
        right: &str,
        phrase: &[String],
    ) -> Result<ListenerScore> {
        self.score(&features.get_f64(left)?, &features.get_f64(right)?, phrase)
    }

    /// Scores a phrase pair where `first` describes the left image. A
    /// discerning listener reads the serialized pair; a simple listener
    /// averages `p(left | first)` with `p(left | second refers to right)`,
    /// falling back to `first` alone when `second` is empty.
    pub fn discerning_score(
        &self,
        left: &[f64],
        right: &[f64],
        first: &[String],
        second: &[String],
    ) -> Result<ListenerScore> {
        match self.kind {
            ListenerKind::Discerning => self.score(left, right, &join_pair(first, second)),
            ListenerKind::Simple => {
                let a = self.score(left, right, first)?;
                if second.is_empty() {
                    return Ok(a);
                }
                let b = self.score(left, right, second)?.swapped();
                Ok(ListenerScore::average(a, b))
            }
        }
    }
}

#[cfg(test)]
mod tests;
