use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which image of an annotated pair a phrase is meant to pick out.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    A,
    B,
}

impl Target {
    pub fn other(self) -> Target {
        match self {
            Target::A => Target::B,
            Target::B => Target::A,
        }
    }

    /// `(target, distractor)` image ids.
    pub fn images<'a>(self, image_a: &'a str, image_b: &'a str) -> (&'a str, &'a str) {
        match self {
            Target::A => (image_a, image_b),
            Target::B => (image_b, image_a),
        }
    }
}

/// One line of a decoded-output file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecodedRecord {
    pub pair_id: String,
    pub target: Target,
    pub rank: usize,
    pub phrase: String,
    pub log_prob: f64,
}

impl DecodedRecord {
    pub fn tokens(&self) -> Vec<String> {
        self.phrase.split_whitespace().map(String::from).collect()
    }
}

pub fn write_decoded(path: &Path, records: &[DecodedRecord]) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    for r in records {
        let line = serde_json::to_string(r)? + "\n";
        f.write_all(line.as_bytes()).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

pub fn load_decoded(path: &Path) -> Result<Vec<DecodedRecord>> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::ParseError {
            line: n + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}
