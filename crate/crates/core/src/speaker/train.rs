use std::collections::{HashMap, VecDeque};

use ndarray::{concatenate, s, Array2, Axis};
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::{SpeakerDims, SpeakerKind, SpeakerModel};
use crate::data::{image_pool, join_pair, AnnotationRecord, FeatureStore, Vocabulary};
use crate::error::{Error, Result};
use crate::nn::layers::{
    batch_norm_backward, batch_norm_train, embed, embed_backward, linear, linear_backward,
    log_softmax_rows, relu, relu_backward, BN_MOMENTUM,
};
use crate::nn::{
    length_batches, length_groups, lstm_grads, lstm_step, lstm_step_backward, Adam, LstmState,
    LstmWeights, ParameterSet, Profile,
};
use crate::synth::rng_for;

/// Equal-length framed sequences (`<s> ... </s>`) with their images. `other`
/// is present for a discerning speaker.
#[derive(Clone, Debug)]
pub struct SpeakerBatch {
    pub ids: Vec<Vec<usize>>,
    pub target: Array2<f64>,
    pub other: Option<Array2<f64>>,
}

pub struct SpeakerStep {
    pub loss: f64,
    pub grads: ParameterSet,
    /// Batch mean and variance seen by batch normalisation, if enabled.
    pub bn_stats: Option<(Array2<f64>, Array2<f64>)>,
}

/// Teacher-forced cross-entropy, averaged over predicted tokens, and its
/// gradient. Batch normalisation uses batch statistics; dropout is applied to
/// decoder outputs when `dropout` is given.
pub fn speaker_loss_and_grad(
    params: &ParameterSet,
    batch: &SpeakerBatch,
    mut dropout: Option<(f64, &mut dyn RngCore)>,
) -> SpeakerStep {
    let bsz = batch.ids.len();
    let steps = batch.ids[0].len() - 1;
    let e = params.get("embedding").ncols();
    let bn = params.contains("img1.bn_gamma");

    // image pathway over target rows, then distractor rows
    let x = match &batch.other {
        Some(o) => concatenate![Axis(0), batch.target, *o],
        None => batch.target.clone(),
    };
    let z1 = linear(&x.view(), params.get("img1.w"), params.get("img1.b"));
    let (y1, bn_cache, bn_stats) = if bn {
        let (y, cache, mean, var) =
            batch_norm_train(&z1, params.get("img1.bn_gamma"), params.get("img1.bn_beta"));
        (y, Some(cache), Some((mean, var)))
    } else {
        (z1, None, None)
    };
    let a1 = relu(&y1);
    let z2 = linear(&a1.view(), params.get("img2.w"), params.get("img2.b"));
    let pathway = relu(&z2);
    let ctx = match batch.other {
        Some(_) => concatenate![
            Axis(1),
            pathway.slice(s![..bsz, ..]),
            pathway.slice(s![bsz.., ..])
        ],
        None => pathway.clone(),
    };

    let w = LstmWeights::from_params(params, "dec");
    let hidden = w.hidden();
    let mut state = LstmState::zeros(bsz, hidden);
    let mut caches = Vec::with_capacity(steps);
    let mut masks = Vec::with_capacity(steps);
    let mut outs = Array2::zeros((steps * bsz, hidden));
    for t in 0..steps {
        let ids: Vec<usize> = batch.ids.iter().map(|s| s[t]).collect();
        let xt = concatenate![Axis(1), embed(params.get("embedding"), &ids), ctx];
        let (next, cache) = lstm_step(w, &xt.view(), &state);
        let mask = dropout.as_mut().map(|(rate, rng)| {
            let keep = 1.0 - *rate;
            Array2::from_shape_simple_fn((bsz, hidden), || {
                if rng.random::<f64>() < keep {
                    1.0 / keep
                } else {
                    0.0
                }
            })
        });
        let h = match &mask {
            Some(m) => &next.h * m,
            None => next.h.clone(),
        };
        outs.slice_mut(s![t * bsz..(t + 1) * bsz, ..]).assign(&h);
        caches.push((ids, cache));
        masks.push(mask);
        state = next;
    }
    let logits = linear(&outs.view(), params.get("out.w"), params.get("out.b"));
    let logp = log_softmax_rows(&logits);
    let n = (steps * bsz) as f64;
    let mut loss = 0.0;
    let mut dlogits = logp.mapv(f64::exp);
    for t in 0..steps {
        for b in 0..bsz {
            let r = t * bsz + b;
            let y = batch.ids[b][t + 1];
            loss -= logp[[r, y]];
            dlogits[[r, y]] -= 1.0;
        }
    }
    loss /= n;
    dlogits /= n;

    let mut grads = params.zeros_like();
    let douts = {
        let [dw, db] = grads.get_many_mut(["out.w", "out.b"]);
        linear_backward(&outs.view(), params.get("out.w"), &dlogits, dw, db)
    };
    let mut dctx: Array2<f64> = Array2::zeros(ctx.raw_dim());
    let mut dh_next = Array2::zeros((bsz, hidden));
    let mut dc = Array2::zeros((bsz, hidden));
    for t in (0..steps).rev() {
        let mut dh = douts.slice(s![t * bsz..(t + 1) * bsz, ..]).to_owned();
        if let Some(m) = &masks[t] {
            dh *= m;
        }
        dh += &dh_next;
        let (ids, cache) = &caches[t];
        let (dx, dh_prev, dc_prev) =
            lstm_step_backward(w, cache, &dh, &dc, &mut lstm_grads(&mut grads, "dec"));
        embed_backward(grads.get_mut("embedding"), ids, &dx.slice(s![.., ..e]).to_owned());
        dctx += &dx.slice(s![.., e..]);
        dh_next = dh_prev;
        dc = dc_prev;
    }

    let dpath = match batch.other {
        Some(_) => concatenate![Axis(0), dctx.slice(s![.., ..e]), dctx.slice(s![.., e..])],
        None => dctx,
    };
    let dz2 = relu_backward(&z2, &dpath);
    let da1 = {
        let [dw, db] = grads.get_many_mut(["img2.w", "img2.b"]);
        linear_backward(&a1.view(), params.get("img2.w"), &dz2, dw, db)
    };
    let dy1 = relu_backward(&y1, &da1);
    let dz1 = match &bn_cache {
        Some(cache) => {
            let [dg, dbeta] = grads.get_many_mut(["img1.bn_gamma", "img1.bn_beta"]);
            batch_norm_backward(cache, params.get("img1.bn_gamma"), &dy1, dg, dbeta)
        }
        None => dy1,
    };
    {
        let [dw, db] = grads.get_many_mut(["img1.w", "img1.b"]);
        linear_backward(&x.view(), params.get("img1.w"), &dz1, dw, db);
    }
    SpeakerStep {
        loss,
        grads,
        bn_stats,
    }
}

/// Teacher-forced loss in inference mode (running batch-norm statistics, no
/// dropout).
pub fn speaker_eval_loss(model: &SpeakerModel, batch: &SpeakerBatch) -> Result<f64> {
    let ctx = model.context(&batch.target.view(), batch.other.as_ref().map(|o| o.view()).as_ref())?;
    let bsz = batch.ids.len();
    let steps = batch.ids[0].len() - 1;
    let mut state = model.initial_state(bsz);
    let mut total = 0.0;
    for t in 0..steps {
        let prev: Vec<usize> = batch.ids.iter().map(|s| s[t]).collect();
        let (lp, next) = model.step_log_probs(&prev, &state, &ctx)?;
        for b in 0..bsz {
            total -= lp[[b, batch.ids[b][t + 1]]];
        }
        state = next;
    }
    Ok(total / (steps * bsz) as f64)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SpeakerTrainReport {
    pub initial_loss: f64,
    pub final_loss: f64,
    pub losses: Vec<f64>,
    pub steps: usize,
}

const LOG_EVERY: usize = 100;
const PROBE_SIZE: usize = 512;

struct Example {
    ids: Vec<usize>,
    target: usize,
    other: usize,
}

/// Simple speakers learn every phrase of both sides of every annotation;
/// discerning speakers learn `P1 vs P2` for `(a, b)` and `P2 vs P1` for
/// `(b, a)`.
pub fn train_speaker(
    records: &[AnnotationRecord],
    features: &FeatureStore,
    vocab: &Vocabulary,
    kind: SpeakerKind,
    profile: &Profile,
    seed: u64,
) -> Result<(SpeakerModel, SpeakerTrainReport)> {
    if records.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    vocab.check_built_from(records)?;
    let pool = image_pool(records);
    let index: HashMap<&str, usize> = pool.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let feats = features.matrix(&pool)?;
    let dims = SpeakerDims {
        feature: features.dim(),
        image_hidden: profile.speaker_image_hidden,
        embed: profile.embed_dim,
        hidden: profile.speaker_hidden,
    };
    let mut model = SpeakerModel::new(
        kind,
        vocab.clone(),
        dims,
        profile.batch_norm,
        profile.speaker_dropout,
        &mut rng_for(seed, 300),
    );

    let cap = |t: &[String]| t[..t.len().min(profile.max_phrase_len)].to_vec();
    let mut examples = Vec::new();
    for r in records {
        let (a, b) = (index[r.image_a.as_str()], index[r.image_b.as_str()]);
        for pp in &r.phrase_pairs {
            let (l, rt) = (cap(&pp.left.tokens), cap(&pp.right.tokens));
            let (first, second) = match kind {
                SpeakerKind::Simple => (l, rt),
                SpeakerKind::Discerning => (join_pair(&l, &rt), join_pair(&rt, &l)),
            };
            examples.push(Example {
                ids: vocab.encode(&first),
                target: a,
                other: b,
            });
            examples.push(Example {
                ids: vocab.encode(&second),
                target: b,
                other: a,
            });
        }
    }
    let lengths: Vec<usize> = examples.iter().map(|e| e.ids.len()).collect();
    let assemble = |idx: &[usize]| {
        let rows = |f: fn(&Example) -> usize| idx.iter().map(|&i| f(&examples[i])).collect::<Vec<_>>();
        SpeakerBatch {
            ids: idx.iter().map(|&i| examples[i].ids.clone()).collect(),
            target: feats.select(Axis(0), &rows(|e| e.target)),
            other: (kind == SpeakerKind::Discerning).then(|| feats.select(Axis(0), &rows(|e| e.other))),
        }
    };
    let probe: Vec<SpeakerBatch> = length_groups(&lengths[..examples.len().min(PROBE_SIZE)])
        .into_iter()
        .map(|g| assemble(&g))
        .collect();
    let probe_loss = |m: &SpeakerModel| -> Result<f64> {
        let n: usize = probe.iter().map(|b| b.ids.len()).sum();
        let mut total = 0.0;
        for b in &probe {
            total += speaker_eval_loss(m, b)? * b.ids.len() as f64;
        }
        Ok(total / n as f64)
    };

    let mut report = SpeakerTrainReport {
        initial_loss: probe_loss(&model)?,
        ..Default::default()
    };
    let mut adam = Adam::new(profile.adam, &model.params);
    let sched = &profile.speaker;
    let stages = [
        (sched.steps, profile.adam.lr, sched.batch_size),
        (sched.stage2_steps, sched.stage2_lr, sched.stage2_batch_size),
    ];
    let mut batch_rng = rng_for(seed, 301);
    let mut drop_rng = rng_for(seed, 303);
    let mut block = Vec::new();
    for (steps, lr, batch_size) in stages {
        if steps == 0 {
            continue;
        }
        adam.set_lr(lr);
        let mut queue: VecDeque<Vec<usize>> = VecDeque::new();
        for _ in 0..steps {
            if queue.is_empty() {
                queue = length_batches(&lengths, batch_size, &mut batch_rng).into();
            }
            let batch = assemble(&queue.pop_front().unwrap());
            let dropout = (model.dropout > 0.0).then_some((model.dropout, &mut drop_rng as &mut dyn RngCore));
            let step = speaker_loss_and_grad(&model.params, &batch, dropout);
            adam.update(&mut model.params, &step.grads)?;
            if let Some((mean, var)) = step.bn_stats {
                let rm = model.params.get_mut("img1.bn_mean");
                *rm = &*rm * BN_MOMENTUM + &(mean * (1.0 - BN_MOMENTUM));
                let rv = model.params.get_mut("img1.bn_var");
                *rv = &*rv * BN_MOMENTUM + &(var * (1.0 - BN_MOMENTUM));
            }
            block.push(step.loss);
            report.steps += 1;
            if block.len() == LOG_EVERY {
                report.losses.push(block.iter().sum::<f64>() / LOG_EVERY as f64);
                block.clear();
            }
        }
    }
    if !block.is_empty() {
        report.losses.push(block.iter().sum::<f64>() / block.len() as f64);
    }
    model.params.round_to_f32();
    report.final_loss = probe_loss(&model)?;
    Ok((model, report))
}
