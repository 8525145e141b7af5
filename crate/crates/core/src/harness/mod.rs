//! Experiment configuration, the end-to-end desk pipeline and human-listener
//! sessions.

mod config;
mod pipeline;
mod session;

pub use config::{ExperimentConfig, CONFIG_FILE};
pub use pipeline::{run_pipeline, PipelineOutput, REPORT_FILE, REPORT_TABLE_FILE};
pub use session::{
    load_answer_log, load_session_tasks, summarize_log, Ack, Progress, Session, SessionStatus, TaskView,
};
