//! Search → fine localization → mapping state machine, the scenario runner
//! and its on-disk logs.

mod config;
mod logs;
mod runner;

pub use config::{CameraSpec, MissionParams, ScenarioConfig, TargetSpec};
pub use logs::{
    emit_plot_data, write_run_dir, FlownRecord, MetricRecord, PlanRecord, RunLogs, TransitionRecord, TruthRecord,
};
pub use runner::{
    run_scenario, HypothesisReport, Mission, RunOptions, RunOutput, RunReport, TargetOutcome, TargetReport, TickEvents,
    FOUND_GATE,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MissionError {
    #[error("config parse error at `{path}`: {message}")]
    Parse { path: String, message: String },
    #[error("invalid config: {0}")]
    Validation(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("log format error: {0}")]
    Log(String),
}

impl MissionError {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        MissionError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissionMode {
    Search,
    FineLocalize,
    Map,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MissionState {
    pub mode: MissionMode,
    /// Hypothesis being localized or mapped; `None` while searching.
    pub active_target: Option<u64>,
    /// Search waypoint to fly to when the search resumes.
    pub resume_waypoint_index: usize,
}
