use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::tasks::GameTask;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Choice {
    Left,
    Right,
    Unsure,
}

/// One vote. `choice` is as shown on screen, before undoing the swap.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameAnswer {
    pub task_id: String,
    pub voter_id: String,
    pub choice: Choice,
    /// Milliseconds since the Unix epoch.
    pub timestamp: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PanelOutcome {
    MajorityCorrect,
    MajorityWrong,
    NoMajority,
}

/// Counts over panels plus the two accuracies, in percent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HumanSummary {
    pub tasks: usize,
    pub majority_correct: usize,
    pub majority_wrong: usize,
    pub no_majority: usize,
    /// Share of tasks where a majority picked the target.
    pub majority_accuracy: f64,
    /// Majority accuracy plus half the no-majority share.
    pub accuracy_with_guessing: f64,
}

impl HumanSummary {
    pub fn from_counts(correct: usize, wrong: usize, none: usize) -> Self {
        let total = correct + wrong + none;
        let pct = |num: usize, den: usize| {
            if den == 0 {
                0.0
            } else {
                (100 * num) as f64 / den as f64
            }
        };
        HumanSummary {
            tasks: total,
            majority_correct: correct,
            majority_wrong: wrong,
            no_majority: none,
            majority_accuracy: pct(correct, total),
            accuracy_with_guessing: pct(2 * correct + none, 2 * total),
        }
    }
}

/// Outcome of one panel. A majority needs more than half the panel choosing
/// the same image; "unsure" votes never count toward one.
pub fn panel_outcome(task: &GameTask, choices: &[Choice]) -> PanelOutcome {
    let need = choices.len() / 2 + 1;
    let left = choices.iter().filter(|c| **c == Choice::Left).count();
    let right = choices.iter().filter(|c| **c == Choice::Right).count();
    let (target_votes, other_votes) = if task.target_on_left() {
        (left, right)
    } else {
        (right, left)
    };
    if target_votes >= need {
        PanelOutcome::MajorityCorrect
    } else if other_votes >= need {
        PanelOutcome::MajorityWrong
    } else {
        PanelOutcome::NoMajority
    }
}

/// Aggregates the first `panel_size` distinct voters of every task, in log
/// order. Fails if any task has fewer.
pub fn aggregate_human(
    tasks: &[GameTask],
    answers: &[GameAnswer],
    panel_size: usize,
) -> Result<(HumanSummary, Vec<PanelOutcome>)> {
    let mut by_task: HashMap<&str, Vec<Choice>> = HashMap::new();
    let mut seen: HashSet<(&str, &str)> = HashSet::new();
    for a in answers {
        if seen.insert((&a.task_id, &a.voter_id)) {
            let v = by_task.entry(a.task_id.as_str()).or_default();
            if v.len() < panel_size {
                v.push(a.choice);
            }
        }
    }
    let (mut c, mut w, mut n) = (0, 0, 0);
    let mut outcomes = Vec::with_capacity(tasks.len());
    for t in tasks {
        let choices = by_task.get(t.task_id.as_str()).map_or(&[][..], |v| v.as_slice());
        if choices.len() < panel_size {
            return Err(Error::IncompletePanel {
                task_id: t.task_id.clone(),
                got: choices.len(),
                need: panel_size,
            });
        }
        let o = panel_outcome(t, choices);
        match o {
            PanelOutcome::MajorityCorrect => c += 1,
            PanelOutcome::MajorityWrong => w += 1,
            PanelOutcome::NoMajority => n += 1,
        }
        outcomes.push(o);
    }
    Ok((HumanSummary::from_counts(c, w, n), outcomes))
}
