//! Uses of trained models beyond the reference game: phrase-score image
//! embeddings for classification, phrase-query retrieval, category-difference
//! explanations and raw vector export.

mod classify;
mod explain;
mod lexicon;
mod retrieve;

pub use classify::{classify, ClassifierConfig, LinearClassifier};
pub use explain::{explain_categories, ExplainConfig, ExplanationEntry, ExplanationReport};
pub use lexicon::{
    build_lexicon, embed_image, embed_images, embedding_matrix, export_image_embeddings,
    export_phrase_embeddings, PhraseLexicon, SemanticEmbedding,
};
pub use retrieve::{average_precision, retrieve, QueryStrategy, RetrievalHit};

#[cfg(test)]
mod tests;
