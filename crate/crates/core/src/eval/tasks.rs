use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::data::{split_phrase_pair, AnnotationRecord};
use crate::error::{Error, Result};
use crate::speaker::{DecodedRecord, Target};

/// `pair_id -> (image_a, image_b)`.
pub type PairIndex = HashMap<String, (String, String)>;

pub fn pair_index(records: &[AnnotationRecord]) -> PairIndex {
    records
        .iter()
        .map(|r| (r.pair_id.clone(), (r.image_a.clone(), r.image_b.clone())))
        .collect()
}

/// One reference-game trial. `presentation_swap` shows image b on the left.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameTask {
    pub task_id: String,
    pub pair_id: String,
    pub image_a: String,
    pub image_b: String,
    pub phrase: Vec<String>,
    pub target: Target,
    #[serde(default)]
    pub presentation_swap: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<u8>,
}

impl GameTask {
    /// `(left, right)` image ids as shown.
    pub fn presented(&self) -> (&str, &str) {
        if self.presentation_swap {
            (&self.image_b, &self.image_a)
        } else {
            (&self.image_a, &self.image_b)
        }
    }

    /// Whether the target is the image shown on the left.
    pub fn target_on_left(&self) -> bool {
        (self.target == Target::A) != self.presentation_swap
    }
}

/// Ten tasks per annotation: each phrase of each pair refers to its own side.
pub fn annotation_tasks(records: &[AnnotationRecord]) -> Vec<GameTask> {
    let mut out = Vec::new();
    for r in records {
        for pp in &r.phrase_pairs {
            for (side, phrase) in [(Target::A, &pp.left), (Target::B, &pp.right)] {
                out.push(GameTask {
                    task_id: format!("{}-{}-{}", r.pair_id, pp.position, side_str(side)),
                    pair_id: r.pair_id.clone(),
                    image_a: r.image_a.clone(),
                    image_b: r.image_b.clone(),
                    phrase: phrase.tokens.clone(),
                    target: side,
                    presentation_swap: false,
                    rank: None,
                    position: Some(pp.position),
                });
            }
        }
    }
    out
}

fn side_str(t: Target) -> &'static str {
    match t {
        Target::A => "a",
        Target::B => "b",
    }
}

/// Decoded records grouped by `(pair_id, target)` and sorted by rank.
pub fn group_decoded(decoded: &[DecodedRecord]) -> BTreeMap<(String, Target), Vec<&DecodedRecord>> {
    let mut groups: BTreeMap<(String, Target), Vec<&DecodedRecord>> = BTreeMap::new();
    for d in decoded {
        groups.entry((d.pair_id.clone(), d.target)).or_default().push(d);
    }
    for g in groups.values_mut() {
        g.sort_by_key(|d| d.rank);
    }
    groups
}

/// Tasks for the top `k` decoded phrases of every `(pair, target)`. The
/// listener sees the first half of a `P1 vs P2` output, or the whole output
/// when it has no separator.
pub fn tasks_from_decoded(decoded: &[DecodedRecord], pairs: &PairIndex, k: usize) -> Result<Vec<GameTask>> {
    let mut out = Vec::new();
    for ((pair_id, target), group) in group_decoded(decoded) {
        let (a, b) = pairs
            .get(&pair_id)
            .ok_or_else(|| Error::InvalidRecord(format!("unknown pair {pair_id}")))?;
        for rank in 1..=k {
            let d = group.iter().find(|d| d.rank == rank).ok_or_else(|| Error::MissingRanks {
                pair_id: pair_id.clone(),
                target: side_str(target).to_string(),
                rank,
            })?;
            let (p1, _) = split_phrase_pair(&d.tokens());
            out.push(GameTask {
                task_id: format!("{pair_id}-{}-{rank}", side_str(target)),
                pair_id: pair_id.clone(),
                image_a: a.clone(),
                image_b: b.clone(),
                phrase: p1,
                target,
                presentation_swap: false,
                rank: Some(rank),
                position: None,
            });
        }
    }
    Ok(out)
}
