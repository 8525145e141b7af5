use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::accuracy::Accuracy;
use super::human::HumanSummary;

/// One cell of a speaker-by-listener accuracy table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub speaker: String,
    pub top_k: usize,
    pub listener: String,
    pub correct: usize,
    pub total: usize,
    pub accuracy: f64,
}

/// Accuracy tables (rows: speaker x top-k, columns: listeners), optional
/// per-position accuracy and optional human panel summary.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rows: Vec<ReportRow>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub positions: Vec<(String, [Accuracy; 5])>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub human: Option<HumanSummary>,
}

impl EvalReport {
    pub fn push(&mut self, speaker: &str, top_k: usize, listener: &str, acc: Accuracy) {
        self.rows.push(ReportRow {
            speaker: speaker.to_string(),
            top_k,
            listener: listener.to_string(),
            correct: acc.correct,
            total: acc.total,
            accuracy: acc.value(),
        });
    }

    /// One JSON object per line: table cells, then positions, then the human
    /// summary.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.rows {
            out += &serde_json::to_string(r).expect("serializable");
            out.push('\n');
        }
        for (listener, accs) in &self.positions {
            for (i, a) in accs.iter().enumerate() {
                let v = serde_json::json!({
                    "listener": listener,
                    "position": i + 1,
                    "correct": a.correct,
                    "total": a.total,
                    "accuracy": a.value(),
                });
                out += &v.to_string();
                out.push('\n');
            }
        }
        if let Some(h) = &self.human {
            out += &serde_json::to_string(h).expect("serializable");
            out.push('\n');
        }
        out
    }

    /// Plain-text tables with accuracies in percent.
    pub fn to_table(&self) -> String {
        let mut listeners: Vec<&str> = Vec::new();
        let mut keys: Vec<(&str, usize)> = Vec::new();
        for r in &self.rows {
            if !listeners.contains(&r.listener.as_str()) {
                listeners.push(&r.listener);
            }
            if !keys.contains(&(r.speaker.as_str(), r.top_k)) {
                keys.push((&r.speaker, r.top_k));
            }
        }
        let mut out = String::new();
        if !self.rows.is_empty() {
            let _ = write!(out, "{:<14} {:>5}", "speaker", "top");
            for l in &listeners {
                let _ = write!(out, " {:>10}", l);
            }
            out.push('\n');
            for (s, k) in &keys {
                let _ = write!(out, "{:<14} {:>5}", s, k);
                for l in &listeners {
                    match self
                        .rows
                        .iter()
                        .find(|r| r.speaker == *s && r.top_k == *k && r.listener == *l)
                    {
                        Some(r) => {
                            let _ = write!(out, " {:>10.1}", 100.0 * r.accuracy);
                        }
                        None => {
                            let _ = write!(out, " {:>10}", "-");
                        }
                    }
                }
                out.push('\n');
            }
        }
        if !self.positions.is_empty() {
            let _ = writeln!(out, "\n{:<14} {:>7} {:>7} {:>7} {:>7} {:>7}", "listener", "1", "2", "3", "4", "5");
            for (l, accs) in &self.positions {
                let _ = write!(out, "{:<14}", l);
                for a in accs {
                    let _ = write!(out, " {:>7.1}", 100.0 * a.value());
                }
                out.push('\n');
            }
        }
        if let Some(h) = &self.human {
            let _ = writeln!(
                out,
                "\nhuman: {:.1} ({:.1}) over {} tasks; majority correct {}, wrong {}, none {}",
                h.majority_accuracy,
                h.accuracy_with_guessing,
                h.tasks,
                h.majority_correct,
                h.majority_wrong,
                h.no_majority
            );
        }
        out
    }
}
