//! Layers, manual reverse-mode gradients, the optimizer and checkpoints.

mod adam;
mod batching;
mod checkpoint;
mod gradcheck;
pub mod layers;
mod lstm;
mod params;
mod profile;

pub use adam::{Adam, AdamConfig};
pub use batching::{length_batches, length_groups};
pub use checkpoint::{
    load_checkpoint, load_checkpoint_expecting, save_checkpoint, ArchManifest,
    CheckpointManifest, TrainingMetadata,
};
pub use gradcheck::{gradient_check, relative_error, GradCheckReport, FD_STEP};
pub use lstm::{
    init_lstm, lstm_grads, lstm_step, lstm_step_backward, lstm_step_infer, LstmGrads,
    LstmState, LstmStepCache, LstmWeights,
};
pub use params::{glorot, uniform, ParameterSet, TensorShape};
pub use profile::{Profile, Schedule};
