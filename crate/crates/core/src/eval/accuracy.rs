use serde::{Deserialize, Serialize};

use super::judge::Judge;
use super::tasks::{tasks_from_decoded, GameTask, PairIndex};
use crate::error::Result;
use crate::speaker::DecodedRecord;

/// Correct-out-of-total counts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Accuracy {
    pub correct: usize,
    pub total: usize,
}

impl Accuracy {
    pub fn value(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.correct as f64 / self.total as f64
        }
    }

    /// Half-width of the normal-approximation 95% binomial interval.
    pub fn ci95_half_width(&self) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        let p = self.value();
        1.96 * (p * (1.0 - p) / self.total as f64).sqrt()
    }

    fn add(&mut self, ok: bool) {
        self.correct += ok as usize;
        self.total += 1;
    }
}

/// Probability the judge gives the task's target, with left/right unmapped
/// through the presentation swap.
fn target_probs(tasks: &[GameTask], judge: &dyn Judge) -> Result<Vec<f64>> {
    let queries: Vec<(&str, &str, &[String])> = tasks
        .iter()
        .map(|t| {
            let (l, r) = t.presented();
            (l, r, t.phrase.as_slice())
        })
        .collect();
    let scores = judge.judge_batch(&queries)?;
    Ok(tasks
        .iter()
        .zip(scores)
        .map(|(t, s)| if t.target_on_left() { s.p_left } else { s.p_right })
        .collect())
}

/// A task is correct when the target gets probability strictly above one
/// half; ties count as wrong.
pub fn rg_accuracy(tasks: &[GameTask], judge: &dyn Judge) -> Result<Accuracy> {
    let mut acc = Accuracy::default();
    for p in target_probs(tasks, judge)? {
        acc.add(p > 0.5);
    }
    Ok(acc)
}

/// Mean accuracy over the top `k` decoded phrases of every pair and target.
pub fn rg_accuracy_top_k(
    decoded: &[DecodedRecord],
    pairs: &PairIndex,
    judge: &dyn Judge,
    k: usize,
) -> Result<Accuracy> {
    rg_accuracy(&tasks_from_decoded(decoded, pairs, k)?, judge)
}

/// Accuracy separately for annotation positions 1..=5.
pub fn position_accuracy(tasks: &[GameTask], judge: &dyn Judge) -> Result<[Accuracy; 5]> {
    let mut out = [Accuracy::default(); 5];
    for (t, p) in tasks.iter().zip(target_probs(tasks, judge)?) {
        if let Some(pos) = t.position.filter(|p| (1..=5).contains(p)) {
            out[pos as usize - 1].add(p > 0.5);
        }
    }
    Ok(out)
}
