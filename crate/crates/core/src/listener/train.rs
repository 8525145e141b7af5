use std::collections::{HashMap, VecDeque};

use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{ListenerKind, ListenerModel, Regime};
use crate::data::{image_pool, join_pair, AnnotationRecord, FeatureStore, Vocabulary};
use crate::error::{Error, Result};
use crate::nn::layers::{embed, embed_backward, linear, linear_backward, relu, relu_backward, sigmoid};
use crate::nn::{
    length_batches, length_groups, lstm_grads, lstm_step, lstm_step_backward, Adam, LstmState,
    LstmWeights, ParameterSet, Profile,
};
use crate::synth::rng_for;

/// Equal-length phrases with their image features; the loss asks for the
/// left image when `target_left` is set.
#[derive(Clone, Debug)]
pub struct ListenerBatch {
    pub ids: Vec<Vec<usize>>,
    pub left: Array2<f64>,
    pub right: Array2<f64>,
    pub target_left: Vec<bool>,
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Mean binary cross-entropy of the target side and its gradient.
pub fn listener_loss_and_grad(params: &ParameterSet, batch: &ListenerBatch) -> (f64, ParameterSet) {
    let bsz = batch.ids.len();
    let len = batch.ids[0].len();
    let w = LstmWeights::from_params(params, "enc");
    let mut state = LstmState::zeros(bsz, w.hidden());
    let mut caches = Vec::with_capacity(len);
    let mut step_ids = Vec::with_capacity(len);
    for t in 0..len {
        let ids: Vec<usize> = batch.ids.iter().map(|s| s[t]).collect();
        let x = embed(params.get("embedding"), &ids);
        let (next, cache) = lstm_step(w, &x.view(), &state);
        caches.push(cache);
        step_ids.push(ids);
        state = next;
    }
    let theta = state.h;
    let (iw, ib) = (params.get("img.w"), params.get("img.b"));
    let z1 = linear(&batch.left.view(), iw, ib);
    let z2 = linear(&batch.right.view(), iw, ib);
    let (phi1, phi2) = (relu(&z1), relu(&z2));
    let s1 = (&phi1 * &theta).sum_axis(Axis(1));
    let s2 = (&phi2 * &theta).sum_axis(Axis(1));

    let mut loss = 0.0;
    let mut dd = Array1::zeros(bsz);
    for r in 0..bsz {
        let d = s1[r] - s2[r];
        let y = if batch.target_left[r] { 1.0 } else { 0.0 };
        loss += softplus(if batch.target_left[r] { -d } else { d });
        dd[r] = (sigmoid(d) - y) / bsz as f64;
    }
    loss /= bsz as f64;

    let ds1 = dd.view().insert_axis(Axis(1)).to_owned();
    let ds2 = -&ds1;
    let dtheta = &phi1 * &ds1 + &phi2 * &ds2;
    let dphi1 = &theta * &ds1;
    let dphi2 = &theta * &ds2;

    let mut grads = params.zeros_like();
    {
        let [dw, db] = grads.get_many_mut(["img.w", "img.b"]);
        linear_backward(&batch.left.view(), iw, &relu_backward(&z1, &dphi1), dw, db);
        linear_backward(&batch.right.view(), iw, &relu_backward(&z2, &dphi2), dw, db);
    }
    let mut dh = dtheta;
    let mut dc = Array2::zeros(dh.raw_dim());
    for t in (0..len).rev() {
        let (dx, dh_prev, dc_prev) =
            lstm_step_backward(w, &caches[t], &dh, &dc, &mut lstm_grads(&mut grads, "enc"));
        embed_backward(grads.get_mut("embedding"), &step_ids[t], &dx);
        dh = dh_prev;
        dc = dc_prev;
    }
    (loss, grads)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ListenerTrainReport {
    /// Loss on a fixed probe set before and after training.
    pub initial_loss: f64,
    pub final_loss: f64,
    /// Mean training loss per block of `LOG_EVERY` steps.
    pub losses: Vec<f64>,
    pub steps: usize,
}

pub(crate) const LOG_EVERY: usize = 100;
pub(crate) const PROBE_SIZE: usize = 512;

struct Example {
    ids: Vec<usize>,
    target: usize,
    distractor: usize,
}

fn draw_other(rng: &mut impl Rng, n: usize, not: usize) -> usize {
    let mut d = rng.random_range(0..n - 1);
    if d >= not {
        d += 1;
    }
    d
}

pub fn train_listener(
    records: &[AnnotationRecord],
    features: &FeatureStore,
    vocab: &Vocabulary,
    kind: ListenerKind,
    regime: Regime,
    profile: &Profile,
    seed: u64,
) -> Result<(ListenerModel, ListenerTrainReport)> {
    if records.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    vocab.check_built_from(records)?;
    let pool = image_pool(records);
    let index: HashMap<&str, usize> = pool.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let feats = features.matrix(&pool)?;

    let mut init_rng = rng_for(seed, 200);
    let mut model = ListenerModel::new(
        kind,
        regime,
        vocab.clone(),
        features.dim(),
        profile.embed_dim,
        profile.listener_hidden,
        &mut init_rng,
    );

    let mut examples = Vec::new();
    for r in records {
        let (a, b) = (index[r.image_a.as_str()], index[r.image_b.as_str()]);
        for pp in &r.phrase_pairs {
            let (l, rt) = (&pp.left.tokens, &pp.right.tokens);
            let (first, second) = match kind {
                ListenerKind::Simple => (l.clone(), rt.clone()),
                ListenerKind::Discerning => (join_pair(l, rt), join_pair(rt, l)),
            };
            examples.push(Example {
                ids: vocab.encode(&first),
                target: a,
                distractor: b,
            });
            examples.push(Example {
                ids: vocab.encode(&second),
                target: b,
                distractor: a,
            });
        }
    }
    let lengths: Vec<usize> = examples.iter().map(|e| e.ids.len()).collect();

    let mut neg_rng = rng_for(seed, 202);
    let mut resample = |examples: &mut Vec<Example>| {
        if regime == Regime::RandomNegative {
            for e in examples.iter_mut() {
                e.distractor = draw_other(&mut neg_rng, pool.len(), e.target);
            }
        }
    };
    resample(&mut examples);

    let assemble = |examples: &[Example], idx: &[usize]| ListenerBatch {
        ids: idx.iter().map(|&i| examples[i].ids.clone()).collect(),
        left: feats.select(Axis(0), &idx.iter().map(|&i| examples[i].target).collect::<Vec<_>>()),
        right: feats.select(
            Axis(0),
            &idx.iter().map(|&i| examples[i].distractor).collect::<Vec<_>>(),
        ),
        target_left: vec![true; idx.len()],
    };
    // The probe set is fixed before training, including its distractors.
    let probe: Vec<ListenerBatch> = length_groups(&lengths[..examples.len().min(PROBE_SIZE)])
        .into_iter()
        .map(|g| assemble(&examples, &g))
        .collect();
    let probe_loss = |params: &ParameterSet| {
        let n: usize = probe.iter().map(|b| b.ids.len()).sum();
        probe
            .iter()
            .map(|b| listener_loss_and_grad(params, b).0 * b.ids.len() as f64)
            .sum::<f64>()
            / n as f64
    };

    let mut report = ListenerTrainReport {
        initial_loss: probe_loss(&model.params),
        ..Default::default()
    };
    let mut adam = Adam::new(profile.adam, &model.params);
    let stage1_steps = match regime {
        Regime::Contrastive => profile.listener.steps,
        Regime::RandomNegative => profile.listener_random_negative_steps,
    };
    let sched = &profile.listener;
    let stages = [
        (stage1_steps, profile.adam.lr, sched.batch_size),
        (sched.stage2_steps, sched.stage2_lr, sched.stage2_batch_size),
    ];
    let mut batch_rng = rng_for(seed, 201);
    let mut first_epoch = true;
    let mut block = Vec::new();
    for (steps, lr, batch_size) in stages {
        if steps == 0 {
            continue;
        }
        adam.set_lr(lr);
        let mut queue: VecDeque<Vec<usize>> = VecDeque::new();
        for _ in 0..steps {
            if queue.is_empty() {
                if !first_epoch {
                    resample(&mut examples);
                }
                first_epoch = false;
                queue = length_batches(&lengths, batch_size, &mut batch_rng).into();
            }
            let idx = queue.pop_front().unwrap();
            let batch = assemble(&examples, &idx);
            let (loss, grads) = listener_loss_and_grad(&model.params, &batch);
            adam.update(&mut model.params, &grads)?;
            block.push(loss);
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
    report.final_loss = probe_loss(&model.params);
    Ok((model, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_negative_never_draws_itself() {
        let mut rng = rng_for(0, 0);
        for n in 2..10 {
            for not in 0..n {
                for _ in 0..50 {
                    let d = draw_other(&mut rng, n, not);
                    assert!(d < n && d != not);
                }
            }
        }
    }
}
