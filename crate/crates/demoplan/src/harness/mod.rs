//! Scenario loading, batch trial execution, metrics, and report emission.

mod batch;
mod metrics;
mod report;
mod scenario;

pub use batch::{build_plan, label_keyframes, run_batch, run_trial, TrialOptions};
pub use metrics::{compute_metrics, compute_metrics_from_rows, MetricsReport, TrialRow};
pub use report::{emit_report, parse_trials_csv, report_json, trials_csv, ReportFormat};
pub use scenario::{load_scenario, CameraRig, Demonstration, KeyframeLabel, Scenario, ScenarioParams};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("failed to parse {path}: {detail}")]
    Parse { path: String, detail: String },
    #[error("referenced file does not exist: {path}")]
    MissingFile { path: String },
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("not enough data: {0}")]
    InsufficientData(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Keyframe(#[from] crate::keyframe::KeyframeError),
    #[error(transparent)]
    Plan(#[from] crate::planner::PlanError),
}
