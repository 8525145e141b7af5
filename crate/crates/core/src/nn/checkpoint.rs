//! Checkpoint directories: `manifest.json`, `vocab.json` and one
//! `<tensor>.bin` blob per parameter (u32 rank, u32 dims, then little-endian
//! f32 values, all row-major).

use std::collections::BTreeMap;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::params::{ParameterSet, TensorShape};
use crate::data::Vocabulary;
use crate::error::{Error, Result};

/// What a checkpoint must agree on to be loadable into a given model.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchManifest {
    /// "speaker" or "listener".
    pub model: String,
    /// "simple" or "discerning".
    pub kind: String,
    pub dims: BTreeMap<String, usize>,
    pub vocab_hash: String,
    #[serde(default)]
    pub options: BTreeMap<String, String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub step: u64,
    pub seed: u64,
    pub profile: String,
    pub split_hashes: BTreeMap<String, String>,
    #[serde(default)]
    pub losses: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub arch: ArchManifest,
    pub tensors: Vec<TensorShape>,
    pub metadata: TrainingMetadata,
}

pub fn save_checkpoint(
    dir: &Path,
    manifest: &CheckpointManifest,
    params: &ParameterSet,
    vocab: &Vocabulary,
) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mpath = dir.join("manifest.json");
    std::fs::write(&mpath, serde_json::to_string_pretty(manifest)?)
        .map_err(|e| Error::io(&mpath, e))?;
    vocab.save(&dir.join("vocab.json"))?;
    for (name, t) in params.iter() {
        let path = dir.join(format!("{name}.bin"));
        std::fs::write(&path, encode_blob(t)).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

pub fn load_checkpoint(dir: &Path) -> Result<(CheckpointManifest, ParameterSet, Vocabulary)> {
    let mpath = dir.join("manifest.json");
    let text = std::fs::read_to_string(&mpath).map_err(|e| Error::io(&mpath, e))?;
    let manifest: CheckpointManifest = serde_json::from_str(&text)?;
    let vocab = Vocabulary::load(&dir.join("vocab.json"))?;
    if vocab.hash() != manifest.arch.vocab_hash {
        return Err(Error::ManifestMismatch(
            "vocabulary hash differs from manifest".into(),
        ));
    }
    let mut params = ParameterSet::new();
    for ts in &manifest.tensors {
        let path = dir.join(format!("{}.bin", ts.name));
        let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let t = decode_blob(&bytes)?;
        if t.shape() != ts.shape.as_slice() {
            return Err(Error::ManifestMismatch(format!(
                "{}: blob shape {:?}, manifest {:?}",
                ts.name,
                t.shape(),
                ts.shape
            )));
        }
        params.insert(ts.name.clone(), t);
    }
    Ok((manifest, params, vocab))
}

/// Loads and insists the stored architecture equals `expected`.
pub fn load_checkpoint_expecting(
    dir: &Path,
    expected: &ArchManifest,
) -> Result<(CheckpointManifest, ParameterSet, Vocabulary)> {
    let loaded = load_checkpoint(dir)?;
    if &loaded.0.arch != expected {
        return Err(Error::ManifestMismatch(format!(
            "expected {expected:?}, found {:?}",
            loaded.0.arch
        )));
    }
    Ok(loaded)
}

fn encode_blob(t: &Array2<f64>) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + t.len() * 4);
    out.extend_from_slice(&2u32.to_le_bytes());
    for &d in t.shape() {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for &v in t.iter() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

fn decode_blob(bytes: &[u8]) -> Result<Array2<f64>> {
    let u32_at = |i: usize| -> Result<usize> {
        bytes
            .get(i..i + 4)
            .map(|b| u32::from_le_bytes(b.try_into().unwrap()) as usize)
            .ok_or_else(|| Error::ManifestMismatch("truncated tensor blob".into()))
    };
    let rank = u32_at(0)?;
    let dims: Vec<usize> = (0..rank).map(|k| u32_at(4 + 4 * k)).collect::<Result<_>>()?;
    let (rows, cols) = match dims.as_slice() {
        [n] => (1, *n),
        [r, c] => (*r, *c),
        _ => {
            return Err(Error::ManifestMismatch(format!(
                "unsupported tensor rank {rank}"
            )))
        }
    };
    let start = 4 + 4 * rank;
    let payload = &bytes[start.min(bytes.len())..];
    if payload.len() != rows * cols * 4 {
        return Err(Error::ManifestMismatch("tensor payload length".into()));
    }
    let data: Vec<f64> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    Ok(Array2::from_shape_vec((rows, cols), data).expect("length checked"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::params::uniform;
    use rand::SeedableRng;

    fn fixture() -> (CheckpointManifest, ParameterSet, Vocabulary) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut p = ParameterSet::new();
        p.insert("enc.wx", uniform(&mut rng, 3, 8, 1.0));
        p.insert("enc.b", uniform(&mut rng, 1, 8, 1.0));
        p.round_to_f32();
        let vocab = Vocabulary::from_words(["red", "body"]);
        let manifest = CheckpointManifest {
            arch: ArchManifest {
                model: "listener".into(),
                kind: "simple".into(),
                dims: [("hidden".to_string(), 2)].into(),
                vocab_hash: vocab.hash(),
                options: BTreeMap::new(),
            },
            tensors: p.shapes(),
            metadata: TrainingMetadata::default(),
        };
        (manifest, p, vocab)
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let (m, p, v) = fixture();
        save_checkpoint(dir.path(), &m, &p, &v).unwrap();
        let (m2, p2, v2) = load_checkpoint_expecting(dir.path(), &m.arch).unwrap();
        assert_eq!(m, m2);
        assert_eq!(v, v2);
        for (name, t) in p.iter() {
            let a: Vec<u64> = t.iter().map(|x| x.to_bits()).collect();
            let b: Vec<u64> = p2.get(name).iter().map(|x| x.to_bits()).collect();
            assert_eq!(a, b, "{name}");
        }
    }

    #[test]
    fn mismatched_architecture_fails() {
        let dir = tempfile::tempdir().unwrap();
        let (m, p, v) = fixture();
        save_checkpoint(dir.path(), &m, &p, &v).unwrap();
        let mut other = m.arch.clone();
        other.dims.insert("hidden".into(), 4);
        assert!(matches!(
            load_checkpoint_expecting(dir.path(), &other),
            Err(Error::ManifestMismatch(_))
        ));
    }

    #[test]
    fn tampered_blob_fails() {
        let dir = tempfile::tempdir().unwrap();
        let (m, p, v) = fixture();
        save_checkpoint(dir.path(), &m, &p, &v).unwrap();
        std::fs::write(dir.path().join("enc.b.bin"), encode_blob(&Array2::zeros((1, 3)))).unwrap();
        assert!(matches!(
            load_checkpoint(dir.path()),
            Err(Error::ManifestMismatch(_))
        ));
    }
}
