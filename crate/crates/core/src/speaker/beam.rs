use std::cmp::Ordering;

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use super::SpeakerModel;
use crate::data::{END_ID, START_ID};
use crate::error::Result;

pub const DEFAULT_BEAM_WIDTH: usize = 10;

/// A decoded phrase with its speaker log-probability.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoredPhrase {
    pub tokens: Vec<String>,
    /// Token ids without the start and end tokens.
    pub ids: Vec<usize>,
    pub log_prob: f64,
    /// 1-based position in the beam result.
    pub rank: usize,
    /// Hit the length limit without producing the end token.
    #[serde(default)]
    pub truncated: bool,
}

struct Candidate {
    ids: Vec<usize>,
    score: f64,
    parent: usize,
}

fn by_score_then_ids(a_score: f64, a_ids: &[usize], b_score: f64, b_ids: &[usize]) -> Ordering {
    b_score
        .partial_cmp(&a_score)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a_ids.cmp(b_ids))
}

/// Beam search over one context row. Every step expands all live prefixes by
/// every token except the start token and keeps the best `width` expansions;
/// those ending in the end token are complete. Live prefixes left after
/// `max_len` steps are returned as truncated. Scores are raw sums of step
/// log-probabilities (no length normalisation); results are sorted by score,
/// ties by token ids.
pub fn beam_decode(
    model: &SpeakerModel,
    context: &Array2<f64>,
    width: usize,
    max_len: usize,
) -> Result<Vec<ScoredPhrase>> {
    assert!(width >= 1 && max_len >= 1, "beam width and max_len must be positive");
    let ctx_row = context.row(0).insert_axis(Axis(0)).to_owned();
    let mut alive: Vec<(Vec<usize>, f64)> = vec![(Vec::new(), 0.0)];
    let mut state = model.initial_state(1);
    let mut done: Vec<(Vec<usize>, f64, bool)> = Vec::new();

    for step in 0..max_len {
        let prev: Vec<usize> = alive
            .iter()
            .map(|(ids, _)| ids.last().copied().unwrap_or(START_ID))
            .collect();
        let ctx = ctx_row.broadcast((alive.len(), ctx_row.ncols())).unwrap().to_owned();
        let (lp, next) = model.step_log_probs(&prev, &state, &ctx)?;
        let mut cands = Vec::with_capacity(alive.len() * lp.ncols());
        for (i, (ids, score)) in alive.iter().enumerate() {
            for v in 0..lp.ncols() {
                if v == START_ID {
                    continue;
                }
                let mut ext = ids.clone();
                ext.push(v);
                cands.push(Candidate {
                    ids: ext,
                    score: score + lp[[i, v]],
                    parent: i,
                });
            }
        }
        cands.sort_by(|a, b| by_score_then_ids(a.score, &a.ids, b.score, &b.ids));
        cands.truncate(width);

        let mut next_alive = Vec::new();
        let mut parents = Vec::new();
        for c in cands {
            if *c.ids.last().unwrap() == END_ID {
                let mut ids = c.ids;
                ids.pop();
                done.push((ids, c.score, false));
            } else {
                parents.push(c.parent);
                next_alive.push((c.ids, c.score));
            }
        }
        if next_alive.is_empty() {
            alive.clear();
            break;
        }
        state = next.select(&parents);
        alive = next_alive;
        if step + 1 == max_len {
            break;
        }
    }
    done.extend(alive.into_iter().map(|(ids, s)| (ids, s, true)));
    done.sort_by(|a, b| by_score_then_ids(a.1, &a.0, b.1, &b.0));
    done.truncate(width);
    Ok(done
        .into_iter()
        .enumerate()
        .map(|(k, (ids, log_prob, truncated))| ScoredPhrase {
            tokens: model.vocab.decode(&ids),
            ids,
            log_prob,
            rank: k + 1,
            truncated,
        })
        .collect())
}
