//! On-disk layout of a generated dataset:
//!
//! ```text
//! manifest.json        world spec, seed, grammar, generation config
//! <split>.jsonl        annotation records per split
//! objects.jsonl        latent assignments {split, object_id, assignment, image_path}
//! categories.jsonl     {object_id, category}
//! features.bin         feature store (+ features.ids.jsonl)
//! images/<id>.png      optional renders
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::grammar::Grammar;
use super::render::{encode_png, render_image};
use super::world::{GenConfig, SynthDataset, SynthObject, World, WorldSpec};
use crate::data::{load_annotations, write_annotations, FeatureStore};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthManifest {
    pub spec: WorldSpec,
    pub seed: u64,
    pub grammar: Grammar,
    pub config: GenConfig,
    pub splits: Vec<String>,
    pub image_size: Option<u32>,
}

#[derive(Serialize, Deserialize)]
struct ObjectLine {
    split: String,
    object_id: String,
    assignment: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    image_path: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct CategoryLine {
    object_id: String,
    category: usize,
}

/// Paths inside a dataset directory.
#[derive(Clone, Debug)]
pub struct DatasetDir {
    pub root: PathBuf,
}

impl DatasetDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        DatasetDir { root: root.into() }
    }

    pub fn manifest(&self) -> PathBuf {
        self.root.join("manifest.json")
    }

    pub fn split(&self, name: &str) -> PathBuf {
        self.root.join(format!("{name}.jsonl"))
    }

    pub fn features(&self) -> PathBuf {
        self.root.join("features.bin")
    }

    pub fn images(&self) -> PathBuf {
        self.root.join("images")
    }

    pub fn image(&self, object_id: &str) -> PathBuf {
        self.images().join(format!("{object_id}.png"))
    }

    pub fn read_manifest(&self) -> Result<SynthManifest> {
        let p = self.manifest();
        let text = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Writes the dataset; renders every object when `image_size` is set.
    pub fn write(&self, ds: &mut SynthDataset, image_size: Option<u32>) -> Result<()> {
        fs::create_dir_all(&self.root).map_err(|e| Error::io(&self.root, e))?;
        if let Some(size) = image_size {
            let dir = self.images();
            fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            for (_, o) in ds.objects.iter_mut() {
                let png = encode_png(&render_image(o, size)?)?;
                let path = self.image(&o.object_id);
                fs::write(&path, png).map_err(|e| Error::io(&path, e))?;
                o.image_path = Some(format!("images/{}.png", o.object_id));
            }
        }
        let manifest = SynthManifest {
            spec: ds.world.spec.clone(),
            seed: ds.world.spec.seed,
            grammar: ds.world.grammar.clone(),
            config: ds.config.clone(),
            splits: ds.splits.iter().map(|(n, _)| n.clone()).collect(),
            image_size,
        };
        write_text(&self.manifest(), &(serde_json::to_string_pretty(&manifest)? + "\n"))?;
        for (name, records) in &ds.splits {
            write_annotations(&self.split(name), records)?;
        }
        let mut objects = String::new();
        for (split, o) in &ds.objects {
            let line = ObjectLine {
                split: split.clone(),
                object_id: o.object_id.clone(),
                assignment: o.assignment.clone(),
                image_path: o.image_path.clone(),
            };
            objects += &serde_json::to_string(&line)?;
            objects.push('\n');
        }
        write_text(&self.root.join("objects.jsonl"), &objects)?;
        let mut cats = String::new();
        for (id, c) in &ds.category_labels {
            cats += &serde_json::to_string(&CategoryLine {
                object_id: id.clone(),
                category: *c,
            })?;
            cats.push('\n');
        }
        write_text(&self.root.join("categories.jsonl"), &cats)?;
        ds.features().write(&self.features())
    }

    pub fn load(&self) -> Result<SynthDataset> {
        let manifest = self.read_manifest()?;
        let mut world = World::new(manifest.spec.clone())?;
        world.grammar = manifest.grammar.clone();
        let features = FeatureStore::read(&self.features())?;
        let mut splits = Vec::new();
        for name in &manifest.splits {
            splits.push((name.clone(), load_annotations(&self.split(name))?));
        }
        let mut objects = Vec::new();
        for line in read_lines(&self.root.join("objects.jsonl"))? {
            let l: ObjectLine = serde_json::from_str(&line)?;
            let feature = features.get(&l.object_id)?.to_vec();
            objects.push((
                l.split,
                SynthObject {
                    object_id: l.object_id,
                    assignment: l.assignment,
                    feature,
                    image_path: l.image_path,
                },
            ));
        }
        let mut category_labels = Vec::new();
        for line in read_lines(&self.root.join("categories.jsonl"))? {
            let l: CategoryLine = serde_json::from_str(&line)?;
            category_labels.push((l.object_id, l.category));
        }
        Ok(SynthDataset {
            world,
            config: manifest.config,
            splits,
            objects,
            category_labels,
        })
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for line in BufReader::new(f).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if !line.trim().is_empty() {
            out.push(line);
        }
    }
    Ok(out)
}

