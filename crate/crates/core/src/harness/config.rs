use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::DEFAULT_MIN_FREQ;
use crate::error::{Error, Result};
use crate::nn::Profile;
use crate::speaker::DEFAULT_BEAM_WIDTH;
use crate::synth::{GenConfig, WorldSpec};

pub const CONFIG_FILE: &str = "config.json";

/// Everything needed to reproduce one run. Written into every output
/// directory the run produces.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub world: WorldSpec,
    pub generation: GenConfig,
    /// Use an existing dataset directory instead of generating one.
    pub dataset: Option<PathBuf>,
    /// `desk` or `paper`.
    pub profile: String,
    /// JSON object merged over the named profile, e.g. `{"speaker": {"steps": 500}}`.
    pub overrides: serde_json::Value,
    pub min_freq: usize,
    pub beam_width: usize,
    pub top_k: Vec<usize>,
    /// Pragmatic reranking weights searched on the validation split.
    pub lambda_grid: Vec<f64>,
    /// Not part of the snapshot, so identical runs written to different
    /// places leave identical trees.
    #[serde(skip_serializing)]
    pub out: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 11,
            world: WorldSpec::default(),
            generation: GenConfig::new(2000, 200, 200).with_categories(10, 40),
            dataset: None,
            profile: "desk".into(),
            overrides: serde_json::Value::Object(Default::default()),
            min_freq: DEFAULT_MIN_FREQ,
            beam_width: DEFAULT_BEAM_WIDTH,
            top_k: vec![1, 5, 7, 10],
            lambda_grid: crate::pragmatics::default_lambda_grid(),
            out: PathBuf::from("runs/desk"),
        }
    }
}

fn merge(base: &mut serde_json::Value, patch: &serde_json::Value) {
    match (base, patch) {
        (serde_json::Value::Object(b), serde_json::Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(k) {
                    Some(slot) if v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        (b, p) => *b = p.clone(),
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::ConfigError(format!("{}: {e}", path.display())))
    }

    /// The named profile with `overrides` applied.
    pub fn resolved_profile(&self) -> Result<Profile> {
        let mut value = serde_json::to_value(Profile::by_name(&self.profile)?)?;
        if !self.overrides.is_null() && !self.overrides.is_object() {
            return Err(Error::ConfigError("overrides must be an object".into()));
        }
        merge(&mut value, &self.overrides);
        serde_json::from_value(value).map_err(|e| Error::ConfigError(format!("bad override: {e}")))
    }

    /// The world with the run seed applied.
    pub fn seeded_world(&self) -> WorldSpec {
        self.world.clone().with_seed(self.seed)
    }

    pub fn validate(&self) -> Result<()> {
        self.resolved_profile()?;
        self.seeded_world().validate()?;
        if self.beam_width == 0 {
            return Err(Error::ConfigError("beam width must be at least 1".into()));
        }
        if let Some(&k) = self.top_k.iter().find(|&&k| k == 0 || k > self.beam_width) {
            return Err(Error::ConfigError(format!("top-k {k} outside 1..={}", self.beam_width)));
        }
        for &l in &self.lambda_grid {
            crate::pragmatics::RerankConfig::new(l)?;
        }
        Ok(())
    }

    /// Writes the config snapshot into `dir`.
    pub fn write_snapshot(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(CONFIG_FILE);
        let text = serde_json::to_string_pretty(self)? + "\n";
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_merge_into_profile() {
        let cfg = ExperimentConfig {
            overrides: serde_json::json!({"speaker": {"steps": 7}, "embed_dim": 16}),
            ..Default::default()
        };
        let p = cfg.resolved_profile().unwrap();
        assert_eq!(p.speaker.steps, 7);
        assert_eq!(p.embed_dim, 16);
        assert_eq!(p.speaker.batch_size, Profile::desk().speaker.batch_size);
        let bad = ExperimentConfig {
            overrides: serde_json::json!({"speaker": {"steps": "many"}}),
            ..Default::default()
        };
        assert!(matches!(bad.resolved_profile(), Err(Error::ConfigError(_))));
    }

    #[test]
    fn snapshot_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig {
            seed: 3,
            out: PathBuf::from("elsewhere"),
            ..Default::default()
        };
        cfg.write_snapshot(dir.path()).unwrap();
        let back = ExperimentConfig::load(&dir.path().join(CONFIG_FILE)).unwrap();
        assert_eq!(back.out, ExperimentConfig::default().out);
        assert_eq!(ExperimentConfig { out: cfg.out.clone(), ..back }, cfg);
    }

    #[test]
    fn validation() {
        assert!(ExperimentConfig::default().validate().is_ok());
        let cfg = ExperimentConfig {
            top_k: vec![11],
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = ExperimentConfig {
            profile: "huge".into(),
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }
}
