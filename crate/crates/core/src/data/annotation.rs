use std::collections::HashSet;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::phrase::{tokenize_phrase, PhrasePair};
use crate::error::{Error, Result};

/// An image pair with up to five ordered attribute-phrase differences.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AnnotationRecord {
    pub pair_id: String,
    pub image_a: String,
    pub image_b: String,
    pub phrase_pairs: Vec<PhrasePair>,
}

#[derive(Serialize, Deserialize)]
struct RecordLine {
    pair_id: String,
    image_a: String,
    image_b: String,
    phrases: Vec<PhraseLine>,
}

#[derive(Serialize, Deserialize)]
struct PhraseLine {
    left: String,
    right: String,
    position: u8,
}

impl AnnotationRecord {
    pub fn new(
        pair_id: impl Into<String>,
        image_a: impl Into<String>,
        image_b: impl Into<String>,
        phrase_pairs: Vec<PhrasePair>,
    ) -> Result<Self> {
        let r = AnnotationRecord {
            pair_id: pair_id.into(),
            image_a: image_a.into(),
            image_b: image_b.into(),
            phrase_pairs,
        };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        if self.image_a == self.image_b {
            return Err(Error::InvalidRecord(format!(
                "pair {}: image_a equals image_b",
                self.pair_id
            )));
        }
        if self.phrase_pairs.is_empty() || self.phrase_pairs.len() > 5 {
            return Err(Error::InvalidRecord(format!(
                "pair {}: {} phrase pairs, expected 1..=5",
                self.pair_id,
                self.phrase_pairs.len()
            )));
        }
        let mut seen = HashSet::new();
        for pp in &self.phrase_pairs {
            if !(1..=5).contains(&pp.position) || !seen.insert(pp.position) {
                return Err(Error::InvalidRecord(format!(
                    "pair {}: bad or repeated position {}",
                    self.pair_id, pp.position
                )));
            }
        }
        Ok(())
    }

    pub fn to_json_line(&self) -> String {
        let line = RecordLine {
            pair_id: self.pair_id.clone(),
            image_a: self.image_a.clone(),
            image_b: self.image_b.clone(),
            phrases: self
                .phrase_pairs
                .iter()
                .map(|pp| PhraseLine {
                    left: pp.left.raw_text.clone(),
                    right: pp.right.raw_text.clone(),
                    position: pp.position,
                })
                .collect(),
        };
        serde_json::to_string(&line).expect("record serializes")
    }

    pub fn from_json_line(s: &str) -> Result<Self> {
        let line: RecordLine = serde_json::from_str(s)?;
        let phrase_pairs = line
            .phrases
            .into_iter()
            .map(|p| PhrasePair::new(tokenize_phrase(&p.left)?, tokenize_phrase(&p.right)?, p.position))
            .collect::<Result<Vec<_>>>()?;
        AnnotationRecord::new(line.pair_id, line.image_a, line.image_b, phrase_pairs)
    }
}

pub fn parse_annotations(reader: impl BufRead) -> Result<Vec<AnnotationRecord>> {
    let mut out = Vec::new();
    let mut ids = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::ParseError {
            line: lineno,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = AnnotationRecord::from_json_line(&line).map_err(|e| Error::ParseError {
            line: lineno,
            message: e.to_string(),
        })?;
        if !ids.insert(rec.pair_id.clone()) {
            return Err(Error::DuplicatePairId(rec.pair_id));
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn load_annotations(path: &Path) -> Result<Vec<AnnotationRecord>> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_annotations(BufReader::new(f))
}

pub fn write_annotations(path: &Path, records: &[AnnotationRecord]) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    for r in records {
        writeln!(f, "{}", r.to_json_line()).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

/// Distinct image ids referenced by `records`, sorted.
/// SHA-256 over the records' canonical JSON lines.
pub fn records_hash(records: &[AnnotationRecord]) -> String {
    use sha2::{Digest, Sha256};
    let mut h = Sha256::new();
    for r in records {
        h.update(r.to_json_line().as_bytes());
        h.update(b"\n");
    }
    hex::encode(h.finalize())
}

pub fn image_pool(records: &[AnnotationRecord]) -> Vec<String> {
    let set: std::collections::BTreeSet<&str> = records
        .iter()
        .flat_map(|r| [r.image_a.as_str(), r.image_b.as_str()])
        .collect();
    set.into_iter().map(String::from).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const LINE: &str = r#"{"pair_id":"p1","image_a":"i1","image_b":"i2","phrases":[{"left":"red body","right":"blue body","position":1}]}"#;

    #[test]
    fn one_valid_line() {
        let recs = parse_annotations(LINE.as_bytes()).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].phrase_pairs[0].right.tokens, ["blue", "body"]);
        assert_eq!(recs[0].to_json_line(), LINE);
    }

    #[test]
    fn same_image_rejected_with_line_number() {
        let bad = LINE.replace("\"i2\"", "\"i1\"");
        let input = format!("{LINE}\n{bad}\n").replace("\"p1\",\"image_a\":\"i1\",\"image_b\":\"i1\"", "\"p2\",\"image_a\":\"i1\",\"image_b\":\"i1\"");
        match parse_annotations(input.as_bytes()) {
            Err(Error::ParseError { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_pair_id() {
        let input = format!("{LINE}\n{LINE}\n");
        assert!(matches!(
            parse_annotations(input.as_bytes()),
            Err(Error::DuplicatePairId(id)) if id == "p1"
        ));
    }

    #[test]
    fn malformed_json() {
        assert!(matches!(
            parse_annotations("{nope".as_bytes()),
            Err(Error::ParseError { line: 1, .. })
        ));
    }

    #[test]
    fn repeated_position_rejected() {
        let bad = r#"{"pair_id":"p","image_a":"a","image_b":"b","phrases":[{"left":"x","right":"y","position":2},{"left":"x","right":"y","position":2}]}"#;
        assert!(parse_annotations(bad.as_bytes()).is_err());
    }
}
