use std::collections::BTreeMap;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::data::{join_pair, records_hash, AnnotationRecord, FeatureStore};
use crate::error::{Error, Result};
use crate::listener::{ListenerKind, ListenerModel};

/// The phrases (or directed phrase pairs) that index embedding dimensions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhraseLexicon {
    /// Token sequences; opponent entries are serialized `left vs right` pairs.
    pub phrases: Vec<Vec<String>>,
    pub opponent: bool,
    /// Hash of the records the counts came from.
    pub source_hash: String,
}

impl PhraseLexicon {
    pub fn len(&self) -> usize {
        self.phrases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phrases.is_empty()
    }

    pub fn texts(&self) -> Vec<String> {
        self.phrases.iter().map(|p| p.join(" ")).collect()
    }
}

/// Top `k` phrases by training frequency, ties broken lexicographically on
/// the joined text. With `opponent`, entries are the directed pairs as
/// annotated.
pub fn build_lexicon(records: &[AnnotationRecord], k: usize, opponent: bool) -> Result<PhraseLexicon> {
    if k == 0 {
        return Err(Error::ConfigError("lexicon size must be at least 1".into()));
    }
    let mut counts: BTreeMap<String, (usize, Vec<String>)> = BTreeMap::new();
    let mut bump = |tokens: Vec<String>| {
        counts.entry(tokens.join(" ")).or_insert((0, tokens)).0 += 1;
    };
    for r in records {
        for pp in &r.phrase_pairs {
            if opponent {
                bump(join_pair(&pp.left.tokens, &pp.right.tokens));
            } else {
                bump(pp.left.tokens.clone());
                bump(pp.right.tokens.clone());
            }
        }
    }
    if counts.len() < k {
        return Err(Error::KTooLarge {
            requested: k,
            available: counts.len(),
        });
    }
    let mut ranked: Vec<(String, usize, Vec<String>)> =
        counts.into_iter().map(|(t, (c, toks))| (t, c, toks)).collect();
    // BTreeMap order is lexicographic already, so a stable sort on count
    // keeps ties in text order.
    ranked.sort_by_key(|r| std::cmp::Reverse(r.1));
    Ok(PhraseLexicon {
        phrases: ranked.into_iter().take(k).map(|(_, _, t)| t).collect(),
        opponent,
        source_hash: records_hash(records),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SemanticEmbedding {
    pub image_id: String,
    /// Entry `i` is the raw bilinear score of phrase `i` on the image.
    pub vector: Vec<f64>,
}

fn check_listener(listener: &ListenerModel, lexicon: &PhraseLexicon) -> Result<()> {
    if lexicon.opponent && listener.kind != ListenerKind::Discerning {
        return Err(Error::ConfigError(
            "opponent lexicons are embedded with a discerning listener".into(),
        ));
    }
    Ok(())
}

/// Raw scores `phi(I) . theta(P_i)` for every row of `features`, one column
/// per lexicon entry.
pub fn embedding_matrix(
    listener: &ListenerModel,
    lexicon: &PhraseLexicon,
    features: &ArrayView2<f64>,
) -> Result<Array2<f64>> {
    check_listener(listener, lexicon)?;
    let phi = listener.image_embedding(features)?;
    let theta = listener.phrase_embeddings(&lexicon.phrases);
    Ok(phi.dot(&theta.t()))
}

pub fn embed_image(
    listener: &ListenerModel,
    lexicon: &PhraseLexicon,
    image_id: &str,
    feature: &[f64],
) -> Result<SemanticEmbedding> {
    let x = ArrayView2::from_shape((1, feature.len()), feature)
        .map_err(|e| Error::ShapeMismatch(e.to_string()))?;
    let m = embedding_matrix(listener, lexicon, &x)?;
    Ok(SemanticEmbedding {
        image_id: image_id.to_string(),
        vector: m.row(0).to_vec(),
    })
}

pub fn embed_images<S: AsRef<str>>(
    listener: &ListenerModel,
    lexicon: &PhraseLexicon,
    features: &FeatureStore,
    ids: &[S],
) -> Result<Vec<SemanticEmbedding>> {
    let x = features.matrix(ids)?;
    let m = embedding_matrix(listener, lexicon, &x.view())?;
    Ok(ids
        .iter()
        .zip(m.rows())
        .map(|(id, row)| SemanticEmbedding {
            image_id: id.as_ref().to_string(),
            vector: row.to_vec(),
        })
        .collect())
}

/// `theta` for each phrase, keyed by the phrase text.
pub fn export_phrase_embeddings(listener: &ListenerModel, phrases: &[Vec<String>]) -> Result<FeatureStore> {
    let theta = listener.phrase_embeddings(phrases);
    let mut out = FeatureStore::new(listener.hidden());
    for (p, row) in phrases.iter().zip(theta.rows()) {
        let text = p.join(" ");
        if out.contains(&text) {
            continue;
        }
        let v: Vec<f32> = row.iter().map(|&x| x as f32).collect();
        out.push(text, &v)?;
    }
    Ok(out)
}

/// `phi` for each image, keyed by image id.
pub fn export_image_embeddings<S: AsRef<str>>(
    listener: &ListenerModel,
    features: &FeatureStore,
    ids: &[S],
) -> Result<FeatureStore> {
    let phi = listener.image_embedding(&features.matrix(ids)?.view())?;
    let mut out = FeatureStore::new(listener.hidden());
    for (id, row) in ids.iter().zip(phi.rows()) {
        let v: Vec<f32> = row.iter().map(|&x| x as f32).collect();
        out.push(id.as_ref(), &v)?;
    }
    Ok(out)
}
