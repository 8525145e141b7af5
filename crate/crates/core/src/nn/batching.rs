use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;

/// One epoch of mini-batches. Examples are grouped by sequence length so a
/// batch never needs padding; groups are shuffled, chunked, and the chunks
/// shuffled again.
pub fn length_batches(lengths: &[usize], batch_size: usize, rng: &mut impl Rng) -> Vec<Vec<usize>> {
    assert!(batch_size > 0);
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &l) in lengths.iter().enumerate() {
        groups.entry(l).or_default().push(i);
    }
    let mut batches = Vec::new();
    for (_, mut idx) in groups {
        idx.shuffle(rng);
        batches.extend(idx.chunks(batch_size).map(|c| c.to_vec()));
    }
    batches.shuffle(rng);
    batches
}

/// Indices grouped by length, in order; used for deterministic evaluation.
pub fn length_groups(lengths: &[usize]) -> Vec<Vec<usize>> {
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &l) in lengths.iter().enumerate() {
        groups.entry(l).or_default().push(i);
    }
    groups.into_values().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::rng_for;

    #[test]
    fn batches_partition_and_share_length() {
        let lengths = [3, 4, 3, 5, 4, 3, 3, 3];
        let b = length_batches(&lengths, 2, &mut rng_for(0, 0));
        let mut all: Vec<usize> = b.iter().flatten().copied().collect();
        all.sort();
        assert_eq!(all, (0..8).collect::<Vec<_>>());
        for batch in &b {
            assert!(batch.len() <= 2);
            assert!(batch.iter().all(|&i| lengths[i] == lengths[batch[0]]));
        }
    }
}
