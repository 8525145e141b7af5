//! Fixtures shared by the benchmarks: desk-sized untrained models.

use ndarray::Array2;
use phrasegame::data::Vocabulary;
use phrasegame::listener::{ListenerKind, ListenerModel, Regime};
use phrasegame::nn::uniform;
use phrasegame::speaker::{SpeakerDims, SpeakerKind, SpeakerModel};
use phrasegame::synth::rng_for;

pub const FEATURE_DIM: usize = 64;

pub fn vocabulary(words: usize) -> Vocabulary {
    Vocabulary::from_words((0..words).map(|i| format!("w{i}")))
}

pub fn speaker(kind: SpeakerKind) -> SpeakerModel {
    let dims = SpeakerDims {
        feature: FEATURE_DIM,
        image_hidden: 256,
        embed: 64,
        hidden: 128,
    };
    SpeakerModel::new(kind, vocabulary(120), dims, false, 0.0, &mut rng_for(1, 1))
}

pub fn listener() -> ListenerModel {
    ListenerModel::new(
        ListenerKind::Simple,
        Regime::Contrastive,
        vocabulary(120),
        FEATURE_DIM,
        64,
        128,
        &mut rng_for(1, 2),
    )
}

pub fn features(rows: usize) -> Array2<f64> {
    uniform(&mut rng_for(1, 3), rows, FEATURE_DIM, 1.0)
}

pub fn phrases(n: usize, len: usize) -> Vec<Vec<String>> {
    (0..n)
        .map(|i| (0..len).map(|j| format!("w{}", (i * 7 + j * 3) % 120)).collect())
        .collect()
}
