//! Phrases, vocabulary, annotation records and the feature store.

mod annotation;
mod features;
mod phrase;
mod vocab;

pub use annotation::{
    image_pool, load_annotations, parse_annotations, records_hash, write_annotations, AnnotationRecord,
};
pub use features::FeatureStore;
pub use phrase::{
    join_pair, normalize_tokens, split_phrase_pair, tokenize_phrase, tokenize_phrase_with_limit,
    AttributePhrase, PhrasePair, DEFAULT_MAX_PHRASE_LEN, PAIR_SEPARATOR,
};
pub use vocab::{
    build_vocabulary, Vocabulary, DEFAULT_MIN_FREQ, END_ID, END_TOKEN, NUM_SPECIALS, START_ID,
    START_TOKEN, UNK_ID, UNK_TOKEN, VS_ID,
};
