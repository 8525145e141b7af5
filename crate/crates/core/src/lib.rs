//! Speaker and listener models for two-image reference games over
//! fine-grained attribute phrases, with a synthetic attribute world that
//! provides ground truth for every stage.

pub mod data;
pub mod downstream;
pub mod error;
pub mod eval;
pub mod harness;
pub mod listener;
pub mod nn;
pub mod pragmatics;
pub mod speaker;
pub mod synth;

pub use error::{Error, Result};
