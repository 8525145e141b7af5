use serde::{Deserialize, Serialize};

use super::adam::AdamConfig;
use crate::error::{Error, Result};

/// Model sizes and optimisation schedule for one training run.
///
/// `paper` mirrors the published setup; `desk` is sized for CPU runs in
/// minutes and is the default everywhere.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub name: String,
    pub embed_dim: usize,
    pub speaker_hidden: usize,
    pub listener_hidden: usize,
    /// Width of the speaker's first image layer; the second maps to `embed_dim`.
    pub speaker_image_hidden: usize,
    pub speaker_dropout: f64,
    pub batch_norm: bool,
    pub adam: AdamConfig,
    pub speaker: Schedule,
    pub listener: Schedule,
    /// Random-negative listeners train longer in stage one.
    pub listener_random_negative_steps: usize,
    pub max_phrase_len: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub batch_size: usize,
    pub steps: usize,
    /// Optional fine-tuning phase at a lower learning rate.
    pub stage2_steps: usize,
    pub stage2_lr: f64,
    pub stage2_batch_size: usize,
}

impl Profile {
    pub fn paper() -> Self {
        Profile {
            name: "paper".into(),
            embed_dim: 512,
            speaker_hidden: 2048,
            listener_hidden: 1024,
            speaker_image_hidden: 1024,
            speaker_dropout: 0.7,
            batch_norm: true,
            adam: AdamConfig::default(),
            speaker: Schedule {
                batch_size: 64,
                steps: 40_000,
                stage2_steps: 40_000,
                stage2_lr: 5e-6,
                stage2_batch_size: 32,
            },
            listener: Schedule {
                batch_size: 32,
                steps: 2_000,
                stage2_steps: 7_000,
                stage2_lr: 1e-5,
                stage2_batch_size: 32,
            },
            listener_random_negative_steps: 4_000,
            max_phrase_len: 14,
        }
    }

    pub fn desk() -> Self {
        Profile {
            name: "desk".into(),
            embed_dim: 64,
            speaker_hidden: 128,
            listener_hidden: 128,
            speaker_image_hidden: 256,
            speaker_dropout: 0.0,
            batch_norm: false,
            adam: AdamConfig::default(),
            speaker: Schedule {
                batch_size: 32,
                steps: 3_000,
                stage2_steps: 0,
                stage2_lr: 5e-6,
                stage2_batch_size: 32,
            },
            listener: Schedule {
                batch_size: 32,
                steps: 3_000,
                stage2_steps: 0,
                stage2_lr: 1e-5,
                stage2_batch_size: 32,
            },
            listener_random_negative_steps: 3_000,
            max_phrase_len: 14,
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "paper" => Ok(Self::paper()),
            "desk" => Ok(Self::desk()),
            other => Err(Error::ConfigError(format!("unknown profile {other:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_hyperparameters() {
        let p = Profile::paper();
        assert_eq!((p.speaker_hidden, p.listener_hidden), (2048, 1024));
        assert_eq!((p.speaker.batch_size, p.speaker.steps), (64, 40_000));
        assert_eq!(p.speaker.stage2_lr, 5e-6);
        assert_eq!(p.speaker_dropout, 0.7);
        assert_eq!(p.listener.steps, 2_000);
        assert_eq!(p.listener_random_negative_steps, 4_000);
        assert_eq!(p.listener.stage2_lr, 1e-5);
        assert_eq!(p.adam, AdamConfig::default());
        assert_eq!(p.max_phrase_len, 14);
    }

    #[test]
    fn lookup() {
        assert_eq!(Profile::by_name("desk").unwrap().speaker_hidden, 128);
        assert!(Profile::by_name("huge").is_err());
    }
}
