//! Reference-game evaluation: judges, top-k accuracy over decoded phrases,
//! accuracy by annotation position, and human panel aggregation.

mod accuracy;
mod human;
mod judge;
mod report;
mod tasks;

pub use accuracy::{position_accuracy, rg_accuracy, rg_accuracy_top_k, Accuracy};
pub use human::{aggregate_human, panel_outcome, Choice, GameAnswer, HumanSummary, PanelOutcome};
pub use judge::{Judge, ModelJudge, OracleJudge, RandomJudge, TwoSimpleJudge};
pub use report::{EvalReport, ReportRow};
pub use tasks::{annotation_tasks, group_decoded, pair_index, tasks_from_decoded, GameTask, PairIndex};
