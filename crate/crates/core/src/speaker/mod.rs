//! Speakers: describe an image (simple) or how one image differs from
//! another (discerning).
//!
//! Each image goes through `relu(relu(I W1 + b1) W2 + b2)`, with optional
//! batch normalisation before the first ReLU. The context is that vector, or
//! the two vectors concatenated for a discerning speaker. An LSTM decoder reads
//! `[embedding(previous token), context]` at every step and predicts the next
//! token through a linear output layer.

mod beam;
mod decoded;
mod train;

use std::collections::BTreeMap;
use std::path::Path;

use ndarray::{concatenate, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{FeatureStore, Vocabulary};
use crate::error::{Error, Result};
use crate::nn::layers::{batch_norm_eval, embed, linear, log_softmax_rows, relu};
use crate::nn::{
    glorot, init_lstm, load_checkpoint, load_checkpoint_expecting, lstm_step_infer,
    save_checkpoint, uniform, ArchManifest, CheckpointManifest, LstmState, LstmWeights,
    ParameterSet, TrainingMetadata,
};

pub use beam::{beam_decode, ScoredPhrase, DEFAULT_BEAM_WIDTH};
pub use decoded::{load_decoded, write_decoded, DecodedRecord, Target};
pub use train::{speaker_eval_loss, speaker_loss_and_grad, train_speaker, SpeakerBatch, SpeakerStep, SpeakerTrainReport};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpeakerKind {
    Simple,
    Discerning,
}

impl SpeakerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SpeakerKind::Simple => "simple",
            SpeakerKind::Discerning => "discerning",
        }
    }

    pub fn images(self) -> usize {
        match self {
            SpeakerKind::Simple => 1,
            SpeakerKind::Discerning => 2,
        }
    }
}

/// Layer widths of a speaker.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SpeakerDims {
    pub feature: usize,
    pub image_hidden: usize,
    pub embed: usize,
    pub hidden: usize,
}

#[derive(Clone, Debug)]
pub struct SpeakerModel {
    pub kind: SpeakerKind,
    pub params: ParameterSet,
    pub vocab: Vocabulary,
    /// Dropout rate on the decoder output during training.
    pub dropout: f64,
}

impl SpeakerModel {
    pub fn new(
        kind: SpeakerKind,
        vocab: Vocabulary,
        dims: SpeakerDims,
        batch_norm: bool,
        dropout: f64,
        rng: &mut impl Rng,
    ) -> Self {
        let mut p = ParameterSet::new();
        p.insert("embedding", uniform(rng, vocab.len(), dims.embed, 0.1));
        p.insert("img1.w", glorot(rng, dims.feature, dims.image_hidden));
        p.insert("img1.b", Array2::zeros((1, dims.image_hidden)));
        if batch_norm {
            p.insert("img1.bn_gamma", Array2::ones((1, dims.image_hidden)));
            p.insert("img1.bn_beta", Array2::zeros((1, dims.image_hidden)));
            p.insert("img1.bn_mean", Array2::zeros((1, dims.image_hidden)));
            p.insert("img1.bn_var", Array2::ones((1, dims.image_hidden)));
        }
        p.insert("img2.w", glorot(rng, dims.image_hidden, dims.embed));
        p.insert("img2.b", Array2::zeros((1, dims.embed)));
        let context = dims.embed * kind.images();
        init_lstm(&mut p, rng, "dec", dims.embed + context, dims.hidden);
        p.insert("out.w", glorot(rng, dims.hidden, vocab.len()));
        p.insert("out.b", Array2::zeros((1, vocab.len())));
        SpeakerModel {
            kind,
            params: p,
            vocab,
            dropout,
        }
    }

    pub fn dims(&self) -> SpeakerDims {
        SpeakerDims {
            feature: self.params.get("img1.w").nrows(),
            image_hidden: self.params.get("img1.w").ncols(),
            embed: self.params.get("embedding").ncols(),
            hidden: self.params.get("dec.wh").nrows(),
        }
    }

    pub fn batch_norm(&self) -> bool {
        self.params.contains("img1.bn_gamma")
    }

    pub fn context_dim(&self) -> usize {
        self.dims().embed * self.kind.images()
    }

    pub fn arch(&self) -> ArchManifest {
        let d = self.dims();
        ArchManifest {
            model: "speaker".into(),
            kind: self.kind.as_str().into(),
            dims: BTreeMap::from([
                ("vocab".to_string(), self.vocab.len()),
                ("feature".to_string(), d.feature),
                ("image_hidden".to_string(), d.image_hidden),
                ("embed".to_string(), d.embed),
                ("hidden".to_string(), d.hidden),
                ("context".to_string(), self.context_dim()),
            ]),
            vocab_hash: self.vocab.hash(),
            options: BTreeMap::from([
                ("batch_norm".to_string(), self.batch_norm().to_string()),
                ("dropout".to_string(), self.dropout.to_string()),
            ]),
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

    pub fn load(dir: &Path, expected: Option<&ArchManifest>) -> Result<(Self, TrainingMetadata)> {
        let (manifest, params, vocab) = match expected {
            Some(arch) => load_checkpoint_expecting(dir, arch)?,
            None => load_checkpoint(dir)?,
        };
        if manifest.arch.model != "speaker" {
            return Err(Error::ManifestMismatch(format!(
                "expected a speaker checkpoint, found {}",
                manifest.arch.model
            )));
        }
        let kind = match manifest.arch.kind.as_str() {
            "simple" => SpeakerKind::Simple,
            "discerning" => SpeakerKind::Discerning,
            k => return Err(Error::ManifestMismatch(format!("unknown speaker kind {k}"))),
        };
        let dropout = manifest
            .arch
            .options
            .get("dropout")
            .and_then(|d| d.parse().ok())
            .unwrap_or(0.0);
        let model = SpeakerModel {
            kind,
            params,
            vocab,
            dropout,
        };
        let d = model.dims();
        if model.params.get("dec.wx").nrows() != d.embed + model.context_dim()
            || model.params.get("out.w").ncols() != model.vocab.len()
        {
            return Err(Error::ShapeMismatch("speaker tensors are inconsistent".into()));
        }
        Ok((model, manifest.metadata))
    }

    /// Image pathway in inference mode (running batch-norm statistics).
    pub fn image_pathway(&self, x: &ArrayView2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.dims().feature {
            return Err(Error::ShapeMismatch(format!(
                "feature dim {} but speaker expects {}",
                x.ncols(),
                self.dims().feature
            )));
        }
        let p = &self.params;
        let mut z = linear(x, p.get("img1.w"), p.get("img1.b"));
        if self.batch_norm() {
            z = batch_norm_eval(
                &z,
                p.get("img1.bn_gamma"),
                p.get("img1.bn_beta"),
                p.get("img1.bn_mean"),
                p.get("img1.bn_var"),
            );
        }
        Ok(relu(&linear(&relu(&z).view(), p.get("img2.w"), p.get("img2.b"))))
    }

    /// Decoder context for a target image, with the distractor for a
    /// discerning speaker. Rows of `target` and `other` align.
    pub fn context(&self, target: &ArrayView2<f64>, other: Option<&ArrayView2<f64>>) -> Result<Array2<f64>> {
        let a = self.image_pathway(target)?;
        match (self.kind, other) {
            (SpeakerKind::Simple, _) => Ok(a),
            (SpeakerKind::Discerning, Some(o)) => {
                let b = self.image_pathway(o)?;
                Ok(concatenate![Axis(1), a, b])
            }
            (SpeakerKind::Discerning, None) => Err(Error::ShapeMismatch(
                "a discerning speaker needs both images".into(),
            )),
        }
    }

    /// Context for one image pair from the feature store.
    pub fn context_for(&self, features: &FeatureStore, target: &str, other: &str) -> Result<Array2<f64>> {
        let t = features.matrix(&[target])?;
        match self.kind {
            SpeakerKind::Simple => self.context(&t.view(), None),
            SpeakerKind::Discerning => {
                let o = features.matrix(&[other])?;
                self.context(&t.view(), Some(&o.view()))
            }
        }
    }

    /// One decoder step for a batch: next-token log-probabilities and the new
    /// state.
    pub fn step_log_probs(
        &self,
        prev: &[usize],
        state: &LstmState,
        context: &Array2<f64>,
    ) -> Result<(Array2<f64>, LstmState)> {
        if context.ncols() != self.context_dim() || context.nrows() != prev.len() {
            return Err(Error::ShapeMismatch(format!(
                "context is {:?}, expected ({}, {})",
                context.dim(),
                prev.len(),
                self.context_dim()
            )));
        }
        let p = &self.params;
        let emb = embed(p.get("embedding"), prev);
        let x = concatenate![Axis(1), emb, context.view()];
        let next = lstm_step_infer(LstmWeights::from_params(p, "dec"), &x.view(), state);
        let logits = linear(&next.h.view(), p.get("out.w"), p.get("out.b"));
        Ok((log_softmax_rows(&logits), next))
    }

    /// Next-token distribution and new state.
    pub fn decode_step(
        &self,
        prev: &[usize],
        state: &LstmState,
        context: &Array2<f64>,
    ) -> Result<(Array2<f64>, LstmState)> {
        let (lp, next) = self.step_log_probs(prev, state, context)?;
        Ok((lp.mapv(f64::exp), next))
    }

    pub fn initial_state(&self, batch: usize) -> LstmState {
        LstmState::zeros(batch, self.dims().hidden)
    }

    /// Sum of step log-probabilities of `ids` (without framing), optionally
    /// followed by the end token.
    pub fn sequence_log_prob(&self, context: &Array2<f64>, ids: &[usize], terminated: bool) -> Result<f64> {
        let mut state = self.initial_state(1);
        let mut prev = crate::data::START_ID;
        let mut total = 0.0;
        let mut targets = ids.to_vec();
        if terminated {
            targets.push(crate::data::END_ID);
        }
        for &t in &targets {
            let (lp, next) = self.step_log_probs(&[prev], &state, context)?;
            total += lp[[0, t]];
            state = next;
            prev = t;
        }
        Ok(total)
    }
}

/// Beam-decodes both targets of every record: the target image comes first,
/// and a discerning speaker also sees the other image.
pub fn decode_records(
    model: &SpeakerModel,
    features: &FeatureStore,
    records: &[crate::data::AnnotationRecord],
    width: usize,
    max_len: usize,
) -> Result<Vec<DecodedRecord>> {
    let mut out = Vec::with_capacity(records.len() * 2 * width);
    for r in records {
        for target in [Target::A, Target::B] {
            let (t, o) = target.images(&r.image_a, &r.image_b);
            let ctx = model.context_for(features, t, o)?;
            for p in beam_decode(model, &ctx, width, max_len)? {
                out.push(DecodedRecord {
                    pair_id: r.pair_id.clone(),
                    target,
                    rank: p.rank,
                    phrase: p.tokens.join(" "),
                    log_prob: p.log_prob,
                });
            }
        }
    }
    Ok(out)
}
