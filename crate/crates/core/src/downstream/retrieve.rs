use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::data::FeatureStore;
use crate::error::{Error, Result};
use crate::listener::ListenerModel;

/// How several query phrases become one score.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QueryStrategy {
    /// Join all phrases into one token sequence and score it once.
    #[default]
    Concatenate,
    /// Sum the scores of each phrase on its own.
    Fusion,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RetrievalHit {
    pub image_id: String,
    pub score: f64,
}

/// Ranks `image_ids` by listener score for the query, best first. Equal
/// scores keep the input order. Returns at most `top_n` hits.
pub fn retrieve<S: AsRef<str>>(
    listener: &ListenerModel,
    queries: &[Vec<String>],
    features: &FeatureStore,
    image_ids: &[S],
    top_n: usize,
    strategy: QueryStrategy,
) -> Result<Vec<RetrievalHit>> {
    let queries: Vec<Vec<String>> = queries.iter().filter(|q| !q.is_empty()).cloned().collect();
    if queries.is_empty() {
        return Err(Error::EmptyQuery);
    }
    let phrases = match strategy {
        QueryStrategy::Concatenate => vec![queries.concat()],
        QueryStrategy::Fusion => queries,
    };
    let phi = listener.image_embedding(&features.matrix(image_ids)?.view())?;
    let theta = listener.phrase_embeddings(&phrases);
    let scores = phi.dot(&theta.t()).sum_axis(ndarray::Axis(1));
    let mut hits: Vec<RetrievalHit> = image_ids
        .iter()
        .zip(scores.iter())
        .map(|(id, &score)| RetrievalHit {
            image_id: id.as_ref().to_string(),
            score,
        })
        .collect();
    hits.sort_by(|a, b| b.score.total_cmp(&a.score));
    hits.truncate(top_n);
    Ok(hits)
}

/// Mean of precision@k over the ranks k holding a relevant item, divided by
/// the number of relevant items. Zero when nothing is relevant.
pub fn average_precision<S: AsRef<str>>(ranking: &[S], relevant: &HashSet<String>) -> f64 {
    if relevant.is_empty() {
        return 0.0;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (k, id) in ranking.iter().enumerate() {
        if relevant.contains(id.as_ref()) {
            hits += 1;
            sum += hits as f64 / (k + 1) as f64;
        }
    }
    sum / relevant.len() as f64
}
