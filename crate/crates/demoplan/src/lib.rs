//! Demonstration-guided manipulation pipeline.
//!
//! The library covers the full desk-scale loop: a demonstration landmark
//! stream is distilled into key-action frames ([`keyframe`]), abstracted and
//! grounded into a subtask plan ([`planner`]), each subtask is imagined as a
//! short rollout and distilled into a 3D trajectory ([`dynamics`]), refined
//! against a KD-tree obstacle index ([`optimizer`], [`kdtree`]), and executed
//! by a deterministic kinematic simulator with verification and replanning
//! ([`executor`]). All foundation-model calls go through pluggable adapters
//! with seedable fixtures ([`adapters`]); [`harness`] runs seeded batches and
//! computes task/subtask success rates.

pub mod adapters;
pub mod dynamics;
pub mod executor;
pub mod harness;
pub mod kdtree;
pub mod keyframe;
pub mod model;
pub mod optimizer;
pub mod planner;
pub mod seeded;

pub use adapters::{
    call_adapter, make_fixture_suite, make_fixture_suite_with_faults, Adapter, AdapterConfig,
    AdapterError, AdapterKind, AdapterResponse, AdapterRole, AdapterSuite,
};
pub use dynamics::{
    backproject, extract_trajectory, imagine_future, project, simplify_path_rdp, DynamicsError,
    FutureRollout, GenParams, RdpParams, RolloutFrame, SceneObservation,
};
pub use executor::{
    execute_trajectory, run_task, select_grasp, verify_subtask, Ablation, ExecConfig, ExecError,
    ExecutionLog, FailureReason, GraspCandidate, PipelineComponents, SubtaskOutcome, TrialResult,
    TrialRun,
};
pub use harness::{
    compute_metrics, emit_report, load_scenario, run_batch, run_trial, HarnessError, MetricsReport,
    ReportFormat, Scenario, TrialOptions, TrialRow,
};
pub use kdtree::{IndexError, Nearest, ObstacleIndex};
pub use keyframe::{
    extract_keyframes, frame_speed, stationarity_score, KeyframeError, KeyframeParams,
    LandmarkFrame, LandmarkStream,
};
pub use model::{
    angle_between, validate_scene, CameraExtrinsics, CameraIntrinsics, PlanMode, Point2D, Point3D,
    Precondition, Region, SceneDiagnostic, SceneObject, SceneState, SubtaskSpec, TaskPlan,
    Trajectory, Waypoint,
};
pub use optimizer::{
    collision_cost, cost_gradient, iteration_log_jsonl, optimize_trajectory, smoothness_cost,
    total_cost, IterationRecord, OptParams, OptimizerError,
};
pub use planner::{
    abstract_demonstration, unify_plan, validate_plan, BaselinePlan, BaselineStep,
    KeyframeDescriptor, ObjectSummary, PlanDiagnostic, PlanError, PlanningRequest, SceneSummary,
};
