use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"APFV";

/// Row-per-image feature matrix keyed by image id.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureStore {
    dim: usize,
    ids: Vec<String>,
    data: Vec<f32>,
    index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct IdLine {
    row: usize,
    image_id: String,
}

impl FeatureStore {
    pub fn new(dim: usize) -> Self {
        FeatureStore {
            dim,
            ids: Vec::new(),
            data: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn push(&mut self, id: impl Into<String>, row: &[f32]) -> Result<()> {
        let id = id.into();
        if row.len() != self.dim {
            return Err(Error::ShapeMismatch(format!(
                "row for {id} has length {}, store dim {}",
                row.len(),
                self.dim
            )));
        }
        if self.index.contains_key(&id) {
            return Err(Error::InvalidFeatureFile(format!("duplicate id {id}")));
        }
        self.index.insert(id.clone(), self.ids.len());
        self.ids.push(id);
        self.data.extend_from_slice(row);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn get(&self, id: &str) -> Result<&[f32]> {
        self.index
            .get(id)
            .map(|&i| self.row(i))
            .ok_or_else(|| Error::UnknownImage(id.to_string()))
    }

    pub fn get_f64(&self, id: &str) -> Result<Vec<f64>> {
        Ok(self.get(id)?.iter().map(|&x| x as f64).collect())
    }

    /// Stacks the rows for `ids` into a matrix.
    pub fn matrix<S: AsRef<str>>(&self, ids: &[S]) -> Result<Array2<f64>> {
        let mut m = Array2::zeros((ids.len(), self.dim));
        for (r, id) in ids.iter().enumerate() {
            for (dst, &v) in m.row_mut(r).iter_mut().zip(self.get(id.as_ref())?) {
                *dst = v as f64;
            }
        }
        Ok(m)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    /// `features.bin` -> `features.ids.jsonl`.
    pub fn sidecar_path(path: &Path) -> PathBuf {
        path.with_extension("ids.jsonl")
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::with_capacity(12 + self.data.len() * 4);
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&(self.ids.len() as u32).to_le_bytes());
        buf.extend_from_slice(&(self.dim as u32).to_le_bytes());
        for x in &self.data {
            buf.extend_from_slice(&x.to_le_bytes());
        }
        std::fs::write(path, buf).map_err(|e| Error::io(path, e))?;

        let side = Self::sidecar_path(path);
        let mut f = std::fs::File::create(&side).map_err(|e| Error::io(&side, e))?;
        for (row, id) in self.ids.iter().enumerate() {
            let line = serde_json::to_string(&IdLine {
                row,
                image_id: id.clone(),
            })?;
            writeln!(f, "{line}").map_err(|e| Error::io(&side, e))?;
        }
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        if bytes.len() < 12 || &bytes[..4] != MAGIC {
            return Err(Error::InvalidFeatureFile("bad magic".into()));
        }
        let count = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        let dim = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        if bytes.len() != 12 + count * dim * 4 {
            return Err(Error::InvalidFeatureFile(format!(
                "expected {} payload bytes, found {}",
                count * dim * 4,
                bytes.len() - 12
            )));
        }
        let data: Vec<f32> = bytes[12..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();

        let side = Self::sidecar_path(path);
        let f = std::fs::File::open(&side).map_err(|e| Error::io(&side, e))?;
        let mut ids = vec![None; count];
        for (i, line) in BufReader::new(f).lines().enumerate() {
            let line = line.map_err(|e| Error::io(&side, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: IdLine = serde_json::from_str(&line).map_err(|e| Error::ParseError {
                line: i + 1,
                message: e.to_string(),
            })?;
            let slot = ids.get_mut(rec.row).ok_or_else(|| {
                Error::InvalidFeatureFile(format!("row {} out of range", rec.row))
            })?;
            if slot.replace(rec.image_id).is_some() {
                return Err(Error::InvalidFeatureFile(format!("row {} repeated", rec.row)));
            }
        }
        let mut store = FeatureStore::new(dim);
        for (row, id) in ids.into_iter().enumerate() {
            let id = id.ok_or_else(|| Error::InvalidFeatureFile(format!("row {row} has no id")))?;
            store.push(id, &data[row * dim..(row + 1) * dim])?;
        }
        Ok(store)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_wrong_dim_and_duplicates() {
        let mut s = FeatureStore::new(2);
        assert!(s.push("a", &[1.0]).is_err());
        s.push("a", &[1.0, 2.0]).unwrap();
        assert!(s.push("a", &[1.0, 2.0]).is_err());
        assert!(matches!(s.get("b"), Err(Error::UnknownImage(_))));
    }

    #[test]
    fn header_layout() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.bin");
        let mut s = FeatureStore::new(3);
        s.push("x", &[1.0, -2.0, 0.5]).unwrap();
        s.write(&p).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        assert_eq!(&bytes[..4], b"APFV");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 3);
        assert_eq!(bytes.len(), 12 + 12);
        let side = std::fs::read_to_string(dir.path().join("f.ids.jsonl")).unwrap();
        assert_eq!(side, "{\"row\":0,\"image_id\":\"x\"}\n");
    }

    proptest! {
        #[test]
        fn write_read_is_bit_exact(rows in prop::collection::vec(prop::collection::vec(any::<f32>(), 4), 0..20)) {
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("f.bin");
            let mut s = FeatureStore::new(4);
            for (i, r) in rows.iter().enumerate() {
                s.push(format!("img{i}"), r).unwrap();
            }
            s.write(&p).unwrap();
            let back = FeatureStore::read(&p).unwrap();
            prop_assert_eq!(back.ids(), s.ids());
            for i in 0..s.len() {
                let a: Vec<u32> = s.row(i).iter().map(|x| x.to_bits()).collect();
                let b: Vec<u32> = back.row(i).iter().map(|x| x.to_bits()).collect();
                prop_assert_eq!(a, b);
            }
        }
    }
}
