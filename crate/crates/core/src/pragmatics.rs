//! Pragmatic speakers: rerank a speaker's beam by how well a listener picks
//! the target, using `p = p_s^lambda * p_l^(1 - lambda)`.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::split_phrase_pair;
use crate::error::{Error, Result};
use crate::eval::{group_decoded, rg_accuracy_top_k, Judge, PairIndex};
use crate::speaker::{DecodedRecord, Target};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RerankConfig {
    pub lambda: f64,
}

impl RerankConfig {
    pub fn new(lambda: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::InvalidLambda(lambda));
        }
        Ok(RerankConfig { lambda })
    }
}

/// `0, 0.1, ..., 1.0`.
pub fn default_lambda_grid() -> Vec<f64> {
    (0..=10).map(|i| i as f64 / 10.0).collect()
}

/// Weighted geometric combination of speaker and listener probabilities.
pub fn combine(p_s: f64, p_l: f64, lambda: f64) -> f64 {
    p_s.powf(lambda) * p_l.powf(1.0 - lambda)
}

/// A beam entry after reranking.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RerankedRecord {
    pub pair_id: String,
    pub target: Target,
    pub rank: usize,
    pub original_rank: usize,
    pub phrase: String,
    pub p_s: f64,
    pub p_l: f64,
    pub p_combined: f64,
}

impl RerankedRecord {
    /// The reranked entry as a decoded record at its new rank.
    pub fn to_decoded(&self) -> DecodedRecord {
        DecodedRecord {
            pair_id: self.pair_id.clone(),
            target: self.target,
            rank: self.rank,
            phrase: self.phrase.clone(),
            log_prob: self.p_s.ln(),
        }
    }
}

/// Reorders one beam (given in beam order) by combined score. The sort is
/// stable, so ties keep beam order.
pub fn rerank(
    beam: &[DecodedRecord],
    listener_probs: &[f64],
    config: RerankConfig,
) -> Result<Vec<RerankedRecord>> {
    if beam.is_empty() {
        return Err(Error::EmptyBeam);
    }
    if beam.len() != listener_probs.len() {
        return Err(Error::ShapeMismatch("one listener probability per beam entry".into()));
    }
    let mut out: Vec<RerankedRecord> = beam
        .iter()
        .zip(listener_probs)
        .map(|(d, &p_l)| {
            let p_s = d.log_prob.exp();
            RerankedRecord {
                pair_id: d.pair_id.clone(),
                target: d.target,
                rank: 0,
                original_rank: d.rank,
                phrase: d.phrase.clone(),
                p_s,
                p_l,
                p_combined: combine(p_s, p_l, config.lambda),
            }
        })
        .collect();
    out.sort_by(|a, b| b.p_combined.partial_cmp(&a.p_combined).unwrap_or(std::cmp::Ordering::Equal));
    for (k, r) in out.iter_mut().enumerate() {
        r.rank = k + 1;
    }
    Ok(out)
}

/// Listener probability of the target for every decoded record, in input
/// order. The listener reads the first half of a phrase pair.
pub fn listener_probs(decoded: &[DecodedRecord], pairs: &PairIndex, listener: &dyn Judge) -> Result<Vec<f64>> {
    let mut phrases = Vec::with_capacity(decoded.len());
    let mut images = Vec::with_capacity(decoded.len());
    for d in decoded {
        let (a, b) = pairs
            .get(&d.pair_id)
            .ok_or_else(|| Error::InvalidRecord(format!("unknown pair {}", d.pair_id)))?;
        images.push(d.target.images(a, b));
        phrases.push(split_phrase_pair(&d.tokens()).0);
    }
    let queries: Vec<(&str, &str, &[String])> = images
        .iter()
        .zip(&phrases)
        .map(|((t, o), p)| (*t, *o, p.as_slice()))
        .collect();
    Ok(listener.judge_batch(&queries)?.into_iter().map(|s| s.p_left).collect())
}

/// Reranks every `(pair, target)` beam in `decoded`.
pub fn rerank_decoded(
    decoded: &[DecodedRecord],
    pairs: &PairIndex,
    listener: &dyn Judge,
    config: RerankConfig,
) -> Result<Vec<RerankedRecord>> {
    let probs = listener_probs(decoded, pairs, listener)?;
    rerank_with_probs(decoded, &probs, config)
}

fn rerank_with_probs(decoded: &[DecodedRecord], probs: &[f64], config: RerankConfig) -> Result<Vec<RerankedRecord>> {
    let lookup: std::collections::HashMap<(&str, Target, usize), f64> = decoded
        .iter()
        .zip(probs)
        .map(|(d, &p)| ((d.pair_id.as_str(), d.target, d.rank), p))
        .collect();
    let mut out = Vec::with_capacity(decoded.len());
    for ((pair_id, target), group) in group_decoded(decoded) {
        let beam: Vec<DecodedRecord> = group.into_iter().cloned().collect();
        let p: Vec<f64> = beam
            .iter()
            .map(|d| lookup[&(pair_id.as_str(), target, d.rank)])
            .collect();
        out.extend(rerank(&beam, &p, config)?);
    }
    Ok(out)
}

/// The grid value whose reranked outputs score best at top `k` under
/// `judge`; ties go to the smaller value. Also returns every grid score.
pub fn select_lambda(
    decoded: &[DecodedRecord],
    pairs: &PairIndex,
    reranker: &dyn Judge,
    judge: &dyn Judge,
    grid: &[f64],
    k: usize,
) -> Result<(f64, Vec<(f64, f64)>)> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let mut sorted = grid.to_vec();
    for &l in &sorted {
        RerankConfig::new(l)?;
    }
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let probs = listener_probs(decoded, pairs, reranker)?;
    let mut scores = Vec::with_capacity(sorted.len());
    let mut best: Option<(f64, f64)> = None;
    for l in sorted {
        let reranked: Vec<DecodedRecord> = rerank_with_probs(decoded, &probs, RerankConfig { lambda: l })?
            .iter()
            .map(RerankedRecord::to_decoded)
            .collect();
        let acc = rg_accuracy_top_k(&reranked, pairs, judge, k)?.value();
        scores.push((l, acc));
        if best.is_none_or(|(_, b)| acc > b) {
            best = Some((l, acc));
        }
    }
    Ok((best.unwrap().0, scores))
}

pub fn write_reranked(path: &Path, records: &[RerankedRecord]) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    for r in records {
        let line = serde_json::to_string(r)? + "\n";
        f.write_all(line.as_bytes()).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn beam(log_probs: &[f64]) -> Vec<DecodedRecord> {
        log_probs
            .iter()
            .enumerate()
            .map(|(i, &lp)| DecodedRecord {
                pair_id: "p".into(),
                target: Target::A,
                rank: i + 1,
                phrase: format!("w{i}"),
                log_prob: lp,
            })
            .collect()
    }

    #[test]
    fn combine_fixture() {
        assert!((combine(0.64, 0.25, 0.5) - 0.4).abs() < 1e-12);
    }

    #[test]
    fn lambda_endpoints() {
        let b = beam(&[-0.1, -0.5, -0.9, -2.0]);
        let pl = [0.2, 0.9, 0.5, 0.7];
        let one = rerank(&b, &pl, RerankConfig::new(1.0).unwrap()).unwrap();
        assert_eq!(one.iter().map(|r| r.original_rank).collect::<Vec<_>>(), vec![1, 2, 3, 4]);
        let zero = rerank(&b, &pl, RerankConfig::new(0.0).unwrap()).unwrap();
        assert_eq!(zero.iter().map(|r| r.original_rank).collect::<Vec<_>>(), vec![2, 4, 3, 1]);
        assert_eq!(zero[0].rank, 1);
    }

    #[test]
    fn ties_keep_beam_order() {
        let b = beam(&[-0.1, -0.5, -0.9]);
        let r = rerank(&b, &[0.5, 0.5, 0.5], RerankConfig::new(0.0).unwrap()).unwrap();
        assert_eq!(r.iter().map(|r| r.original_rank).collect::<Vec<_>>(), vec![1, 2, 3]);
    }

    #[test]
    fn errors() {
        assert!(matches!(rerank(&[], &[], RerankConfig { lambda: 0.5 }), Err(Error::EmptyBeam)));
        assert!(matches!(RerankConfig::new(1.5), Err(Error::InvalidLambda(_))));
    }

    proptest::proptest! {
        #[test]
        fn rerank_is_a_permutation(lps in proptest::collection::vec(-10.0f64..0.0, 1..12), seed in 0u64..1000, lambda in 0.0f64..=1.0) {
            let b = beam(&lps);
            let mut rng = crate::synth::rng_for(seed, 0);
            let pl: Vec<f64> = (0..b.len()).map(|_| rand::Rng::random::<f64>(&mut rng)).collect();
            let r = rerank(&b, &pl, RerankConfig::new(lambda).unwrap()).unwrap();
            let mut got: Vec<String> = r.iter().map(|x| x.phrase.clone()).collect();
            got.sort();
            let mut want: Vec<String> = b.iter().map(|x| x.phrase.clone()).collect();
            want.sort();
            proptest::prop_assert_eq!(got, want);
            for w in r.windows(2) {
                proptest::prop_assert!(w[0].p_combined >= w[1].p_combined);
            }
        }

        #[test]
        fn combine_is_monotone(ps in 0.01f64..1.0, pl in 0.01f64..1.0, d in 0.001f64..0.5, lambda in 0.01f64..0.99) {
            proptest::prop_assert!(combine((ps + d).min(1.0), pl, lambda) >= combine(ps, pl, lambda));
            proptest::prop_assert!(combine(ps, (pl + d).min(1.0), lambda) >= combine(ps, pl, lambda));
            proptest::prop_assert!(combine(ps + d, pl, lambda) > combine(ps, pl, lambda));
        }
    }
}
