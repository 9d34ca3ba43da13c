//! Deterministic kinematic executor and the verify/replan loop.
//!
//! The robot is a point gripper: it follows optimized waypoints by linear
//! interpolation at a fixed step length, carries the grasped object at a
//! constant offset, and releases it at the final waypoint. No dynamics,
//! friction, or gravity — the executable contract is waypoint following,
//! which keeps every run reproducible.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adapters::schema::{JudgeRequest, JudgeResponse};
use crate::adapters::{Adapter, AdapterError, AdapterSuite};
use crate::dynamics::{
    extract_trajectory, imagine_future, DynamicsError, GenParams, RdpParams, SceneObservation,
};
use crate::kdtree::ObstacleIndex;
use crate::model::{
    CameraExtrinsics, CameraIntrinsics, Point3D, Precondition, SceneState, SubtaskSpec, TaskPlan,
    Trajectory, Waypoint,
};
use crate::optimizer::{optimize_trajectory, OptParams};
use crate::planner::{unify_plan, PlanError, PlanningRequest, SceneSummary};
use crate::seeded::{fnv1a, SplitMix64};

#[derive(Debug, Error)]
pub enum ExecError {
    #[error("no grasp candidates proposed")]
    NoGrasp,
    #[error("grasp pose is {distance:.3} m from the object, beyond grasp radius {radius:.3} m")]
    GraspFailure { distance: f64, radius: f64 },
    #[error("`{id}` is not grounded in the scene")]
    Grounding { id: String },
    #[error("judge selected grasp id {id}, which is not among the candidates")]
    BadSelection { id: u32 },
    #[error(transparent)]
    Adapter(#[from] AdapterError),
}

/// A proposed grasp: pose, approach yaw, and a stability score in [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraspCandidate {
    pub id: u32,
    pub position: Point3D,
    pub yaw: f64,
    pub stability: f64,
}

/// Execution thresholds and the replan budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExecConfig {
    /// Proximity below this logs a collision event, meters.
    pub clearance: f64,
    /// Proximity below this is a contact: execution halts and the held
    /// object drops, meters.
    pub contact: f64,
    /// Maximum grasp-pose distance from the object center, meters.
    pub grasp_radius: f64,
    /// Region expansion used by verification, meters.
    pub verify_tolerance: f64,
    /// Replanning attempts per subtask after a failure.
    pub replan_budget: u32,
    /// Gripper interpolation step, meters.
    pub step_length: f64,
    /// When set, a failed subtask blocks every later subtask instead of
    /// continuing with those whose preconditions still hold.
    pub block_on_failure: bool,
}

impl Default for ExecConfig {
    fn default() -> Self {
        Self {
            clearance: 0.02,
            contact: 0.008,
            grasp_radius: 0.03,
            verify_tolerance: 0.01,
            replan_budget: 2,
            step_length: 0.01,
            block_on_failure: false,
        }
    }
}

/// Component swaps for the ablation studies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ablation {
    /// Full pipeline.
    None,
    /// Replace rollout trajectories with a straight line from the object to
    /// the destination region center.
    Fdp,
    /// Keep only the final rollout waypoint: straight-line approach to the
    /// imagined endpoint.
    Path,
    /// Feed every demonstration frame to the planner instead of extracted
    /// keyframes.
    Parsing,
}

impl std::str::FromStr for Ablation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(Ablation::None),
            "fdp" => Ok(Ablation::Fdp),
            "path" => Ok(Ablation::Path),
            "parsing" => Ok(Ablation::Parsing),
            other => Err(format!("unknown ablation `{other}` (expected fdp|path|parsing)")),
        }
    }
}

/// Failure taxonomy: planning, prediction, and execution mirror the three
/// pipeline stages; verify marks outcomes that completed but missed the goal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    Plan,
    Predict,
    Execute,
    Verify,
}

impl FailureReason {
    pub fn name(&self) -> &'static str {
        match self {
            FailureReason::Plan => "plan",
            FailureReason::Predict => "predict",
            FailureReason::Execute => "execute",
            FailureReason::Verify => "verify",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GripperStep {
    pub position: Point3D,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub held: Option<()>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollisionEvent {
    /// Index of the trajectory waypoint starting the segment in collision.
    pub waypoint: usize,
    /// Interpolation step at which the proximity was observed.
    pub step: usize,
    pub distance: f64,
    /// Disturbed scene object, or `None` for the obstacle cloud.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entity: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExecOutcome {
    Completed,
    /// Contact with an obstacle or object halted execution; the held object
    /// dropped in place.
    HaltedContact { step: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionLog {
    pub steps: Vec<GripperStep>,
    pub collisions: Vec<CollisionEvent>,
    pub outcome: ExecOutcome,
}

/// Selects a grasp through the judge adapter; the returned candidate is
/// always a member of the input list.
pub fn select_grasp(
    candidates: &[GraspCandidate],
    judge: &dyn Adapter,
) -> Result<GraspCandidate, ExecError> {
    if candidates.is_empty() {
        return Err(ExecError::NoGrasp);
    }
    let request = JudgeRequest::SelectGrasp { candidates: candidates.to_vec() };
    let payload = serde_json::to_value(&request).expect("serializable request");
    let response = judge.call(&payload)?;
    let parsed: JudgeResponse = serde_json::from_value(response.payload.clone()).map_err(|e| {
        AdapterError::SchemaViolation {
            role: "judge".into(),
            detail: e.to_string(),
            raw: response.payload.to_string(),
        }
    })?;
    let JudgeResponse::Grasp { id } = parsed else {
        return Err(ExecError::Adapter(AdapterError::SchemaViolation {
            role: "judge".into(),
            detail: "expected a grasp selection".into(),
            raw: response.payload.to_string(),
        }));
    };
    candidates
        .iter()
        .find(|c| c.id == id)
        .cloned()
        .ok_or(ExecError::BadSelection { id })
}

/// Builds the desk-scale observation the dynamics predictor conditions on.
pub fn observe_scene(
    scene: &SceneState,
    intrinsics: &CameraIntrinsics,
    extrinsics: &CameraExtrinsics,
) -> SceneObservation {
    SceneObservation {
        intrinsics: *intrinsics,
        extrinsics: *extrinsics,
        entities: scene
            .objects
            .iter()
            .map(|o| crate::dynamics::EntityState {
                id: o.id.clone(),
                position: o.position,
                radius: o.radius,
            })
            .collect(),
        obstacles: scene.obstacles.clone(),
        regions: scene.regions.clone(),
    }
}

/// Lifts a camera-frame trajectory into the world frame.
pub fn to_world_frame(traj: &Trajectory, extrinsics: &CameraExtrinsics) -> Trajectory {
    Trajectory::new(
        traj.object_id.clone(),
        traj.waypoints
            .iter()
            .map(|w| Waypoint { position: extrinsics.camera_to_world(&w.position), frame: w.frame })
            .collect(),
    )
}

/// Executes a world-frame trajectory: the gripper interpolates through the
/// waypoints, the grasped object rides along at a constant offset, and every
/// proximity violation is logged. Contact halts execution and drops the
/// object in place. Objects other than the held one never move; they only
/// gain disturbed flags.
pub fn execute_trajectory(
    scene: &SceneState,
    traj: &Trajectory,
    grasp: &GraspCandidate,
    config: &ExecConfig,
) -> Result<(SceneState, ExecutionLog), ExecError> {
    traj.validate().map_err(|detail| ExecError::Grounding { id: detail })?;
    let object = scene
        .object(&traj.object_id)
        .ok_or_else(|| ExecError::Grounding { id: traj.object_id.clone() })?;
    let grasp_distance = grasp.position.distance(&object.position);
    if grasp_distance > config.grasp_radius {
        return Err(ExecError::GraspFailure { distance: grasp_distance, radius: config.grasp_radius });
    }

    let mut scene = scene.clone();
    let held_id = traj.object_id.clone();
    let offset = object.position.sub(&traj.waypoints[0].position);
    let index = ObstacleIndex::build(&scene.obstacles);
    scene.held_object = Some(held_id.clone());

    let mut log = ExecutionLog { steps: Vec::new(), collisions: Vec::new(), outcome: ExecOutcome::Completed };
    let mut halted = false;

    let visit = |scene: &mut SceneState,
                     log: &mut ExecutionLog,
                     waypoint: usize,
                     gripper: Point3D|
     -> bool {
        let step = log.steps.len();
        scene.object_mut(&held_id).expect("held object exists").position = gripper.add(&offset);
        log.steps.push(GripperStep { position: gripper, held: Some(()) });

        let mut contact = false;
        if let Ok(d) = index.nearest_distance(&gripper) {
            if d < config.clearance {
                log.collisions.push(CollisionEvent { waypoint, step, distance: d, entity: None });
            }
            contact |= d < config.contact;
        }
        let others: Vec<(String, f64)> = scene
            .objects
            .iter()
            .filter(|o| o.id != held_id)
            .map(|o| (o.id.clone(), gripper.distance(&o.position) - o.radius))
            .collect();
        for (id, surface) in others {
            if surface < config.clearance {
                log.collisions.push(CollisionEvent {
                    waypoint,
                    step,
                    distance: surface,
                    entity: Some(id.clone()),
                });
                scene.object_mut(&id).expect("listed object exists").disturbed = true;
            }
            contact |= surface < config.contact;
        }
        contact
    };

    'outer: for (seg, pair) in traj.waypoints.windows(2).enumerate() {
        if seg == 0 {
            if visit(&mut scene, &mut log, 0, pair[0].position) {
                halted = true;
                break 'outer;
            }
        }
        let from = pair[0].position;
        let to = pair[1].position;
        let length = from.distance(&to);
        if length == 0.0 {
            continue;
        }
        let substeps = (length / config.step_length).ceil() as usize;
        for k in 1..=substeps {
            let t = k as f64 / substeps as f64;
            if visit(&mut scene, &mut log, seg, from.lerp(&to, t)) {
                halted = true;
                break 'outer;
            }
        }
    }

    if halted {
        log.outcome = ExecOutcome::HaltedContact { step: log.steps.len() - 1 };
        scene.held_object = None;
    } else {
        let last = traj.waypoints.last().expect("validated").position;
        let obj = scene.object_mut(&held_id).expect("held object exists");
        obj.position = last.add(&offset);
        obj.disturbed = false;
        scene.held_object = None;
    }
    Ok((scene, log))
}

/// Structured verification verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

pub const VERIFY_OUT_OF_REGION: &str = "out_of_region";
pub const VERIFY_DISTURBED: &str = "disturbed";

/// Geometric outcome check: the target object's centroid must lie inside
/// the destination region expanded by `tolerance`, and the object must not
/// carry a disturbed flag.
pub fn verify_subtask(
    scene: &SceneState,
    subtask: &SubtaskSpec,
    tolerance: f64,
) -> Result<Verdict, ExecError> {
    let object = scene
        .object(&subtask.obj)
        .ok_or_else(|| ExecError::Grounding { id: subtask.obj.clone() })?;
    let region = scene
        .region(&subtask.loc)
        .ok_or_else(|| ExecError::Grounding { id: subtask.loc.clone() })?;
    if !region.contains(&object.position, tolerance) {
        return Ok(Verdict { pass: false, reason: Some(VERIFY_OUT_OF_REGION.into()) });
    }
    if object.disturbed {
        return Ok(Verdict { pass: false, reason: Some(VERIFY_DISTURBED.into()) });
    }
    Ok(Verdict { pass: true, reason: None })
}

/// Outcome of one subtask within a trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubtaskOutcome {
    pub desc: String,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<FailureReason>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
    pub replans: u32,
}

/// Per-trial result: ordered subtask outcomes plus the derived success
/// indicators consumed by the metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub seed: u64,
    pub subtask_outcomes: Vec<SubtaskOutcome>,
    pub replans_used: u32,
    /// True iff every subtask passed.
    pub success: bool,
    /// Number of passed subtasks.
    pub subtasks_passed: u32,
    pub collision_events: u32,
}

impl TrialResult {
    pub fn new(
        seed: u64,
        subtask_outcomes: Vec<SubtaskOutcome>,
        replans_used: u32,
        collision_events: u32,
    ) -> Self {
        let subtasks_passed = subtask_outcomes.iter().filter(|o| o.passed).count() as u32;
        let success = subtasks_passed as usize == subtask_outcomes.len() && !subtask_outcomes.is_empty();
        Self { seed, subtask_outcomes, replans_used, success, subtasks_passed, collision_events }
    }

    /// A trial that failed before any subtask could be attempted.
    pub fn aborted(seed: u64, expected_subtasks: usize, reason: FailureReason, detail: &str) -> Self {
        let outcomes = (0..expected_subtasks)
            .map(|i| SubtaskOutcome {
                desc: format!("subtask {i}"),
                passed: false,
                reason: Some(reason),
                detail: Some(detail.to_string()),
                replans: 0,
            })
            .collect();
        Self::new(seed, outcomes, 0, 0)
    }

    pub fn failure_modes(&self) -> BTreeMap<String, u32> {
        let mut out = BTreeMap::new();
        for outcome in &self.subtask_outcomes {
            if let Some(reason) = outcome.reason {
                *out.entry(reason.name().to_string()).or_insert(0) += 1;
            }
        }
        out
    }
}

/// Execution log of one attempt, kept for verbose single-trial runs and
/// determinism checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttemptLog {
    pub subtask: usize,
    pub attempt: u32,
    pub log: ExecutionLog,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRun {
    pub result: TrialResult,
    pub logs: Vec<AttemptLog>,
}

/// Everything a trial needs besides the scene and the plan.
pub struct PipelineComponents<'a> {
    pub suite: &'a AdapterSuite,
    pub intrinsics: CameraIntrinsics,
    pub extrinsics: CameraExtrinsics,
    pub gen: GenParams,
    pub rdp: RdpParams,
    pub opt: OptParams,
    pub exec: ExecConfig,
    pub grasp_candidates: &'a BTreeMap<String, Vec<GraspCandidate>>,
    /// Original planning request; replanning re-grounds it against the
    /// updated scene. `None` retries the failed subtask as-is.
    pub planning_request: Option<&'a PlanningRequest>,
    pub ablation: Ablation,
    /// Grasp stability perturbation amplitude; zero disables it.
    pub grasp_noise: f64,
    pub seed: u64,
}

struct AttemptFailure {
    reason: FailureReason,
    detail: String,
    abort_trial: bool,
}

impl AttemptFailure {
    fn new(reason: FailureReason, detail: impl Into<String>) -> Self {
        Self { reason, detail: detail.into(), abort_trial: false }
    }

    fn aborting(reason: FailureReason, detail: impl Into<String>) -> Self {
        Self { reason, detail: detail.into(), abort_trial: true }
    }

    fn from_dynamics(err: DynamicsError) -> Self {
        match &err {
            DynamicsError::Adapter(AdapterError::Unavailable { .. }) => {
                Self::aborting(FailureReason::Predict, err.to_string())
            }
            DynamicsError::UngroundedSubtask { .. } | DynamicsError::InvalidParams(_) => {
                Self::new(FailureReason::Plan, err.to_string())
            }
            _ => Self::new(FailureReason::Predict, err.to_string()),
        }
    }
}

fn unmet_precondition(scene: &SceneState, subtask: &SubtaskSpec, tolerance: f64) -> Option<String> {
    for precond in &subtask.precond {
        match precond {
            Precondition::On { obj, region } => {
                let satisfied = scene
                    .object(obj)
                    .zip(scene.region(region))
                    .map(|(o, r)| r.contains(&o.position, tolerance))
                    .unwrap_or(false);
                if !satisfied {
                    return Some(format!("precondition on({obj}, {region}) unsatisfied"));
                }
            }
            Precondition::Holding { obj } => {
                if scene.held_object.as_deref() != Some(obj.as_str()) {
                    return Some(format!("precondition holding({obj}) unsatisfied"));
                }
            }
        }
    }
    None
}

fn straight_line_to_region_center(
    scene: &SceneState,
    subtask: &SubtaskSpec,
) -> Result<Trajectory, AttemptFailure> {
    let object = scene
        .object(&subtask.obj)
        .ok_or_else(|| AttemptFailure::new(FailureReason::Plan, format!("object `{}` missing", subtask.obj)))?;
    let region = scene
        .region(&subtask.loc)
        .ok_or_else(|| AttemptFailure::new(FailureReason::Plan, format!("region `{}` missing", subtask.loc)))?;
    let center = region.center();
    let target = Point3D::new(
        center.x,
        center.y,
        object.position.z.clamp(region.min.z, region.max.z),
    );
    Ok(Trajectory::new(
        subtask.obj.clone(),
        vec![
            Waypoint { position: object.position, frame: 0 },
            Waypoint { position: target, frame: 1 },
        ],
    ))
}

fn candidates_for(
    scene: &SceneState,
    object_id: &str,
    c: &PipelineComponents<'_>,
    attempt: u32,
) -> Result<Vec<GraspCandidate>, AttemptFailure> {
    let object = scene
        .object(object_id)
        .ok_or_else(|| AttemptFailure::new(FailureReason::Plan, format!("object `{object_id}` missing")))?;
    let mut candidates = c
        .grasp_candidates
        .get(object_id)
        .cloned()
        .unwrap_or_else(|| {
            vec![GraspCandidate { id: 0, position: object.position, yaw: 0.0, stability: 0.9 }]
        });
    // Scenario candidates are authored relative to the object's start pose;
    // re-anchor to wherever the object is now.
    if let Some(authored) = c.grasp_candidates.get(object_id) {
        for (cand, auth) in candidates.iter_mut().zip(authored) {
            let local = auth.position;
            cand.position = object.position.add(&local);
        }
    }
    if c.grasp_noise > 0.0 {
        let key = c.seed ^ fnv1a(b"grasp-noise") ^ fnv1a(object_id.as_bytes());
        let mut rng = SplitMix64::new(key.wrapping_add(attempt as u64));
        for cand in &mut candidates {
            cand.stability = (cand.stability + rng.range_f64(-c.grasp_noise, c.grasp_noise)).clamp(0.0, 1.0);
        }
    }
    Ok(candidates)
}

fn verify_via_judge(
    scene: &SceneState,
    subtask: &SubtaskSpec,
    c: &PipelineComponents<'_>,
) -> Result<Verdict, AttemptFailure> {
    let request = JudgeRequest::Verify {
        scene: scene.clone(),
        subtask: subtask.clone(),
        tolerance: c.exec.verify_tolerance,
    };
    let payload = serde_json::to_value(&request).expect("serializable request");
    let response = c.suite.judge.call(&payload).map_err(|e| match e {
        AdapterError::Unavailable { .. } => AttemptFailure::aborting(FailureReason::Verify, e.to_string()),
        other => AttemptFailure::new(FailureReason::Verify, other.to_string()),
    })?;
    let parsed: JudgeResponse = serde_json::from_value(response.payload)
        .map_err(|e| AttemptFailure::new(FailureReason::Verify, format!("undecodable verdict: {e}")))?;
    match parsed {
        JudgeResponse::Verdict { pass, reason } => Ok(Verdict { pass, reason }),
        JudgeResponse::Grasp { .. } => {
            Err(AttemptFailure::new(FailureReason::Verify, "judge answered with a grasp, expected a verdict"))
        }
    }
}

fn attempt_subtask(
    scene: &mut SceneState,
    subtask: &SubtaskSpec,
    c: &PipelineComponents<'_>,
    subtask_idx: usize,
    attempt: u32,
    logs: &mut Vec<AttemptLog>,
    collision_events: &mut u32,
) -> Result<(), AttemptFailure> {
    let trajectory = match c.ablation {
        Ablation::Fdp => straight_line_to_region_center(scene, subtask)?,
        _ => {
            let observation = observe_scene(scene, &c.intrinsics, &c.extrinsics);
            let rollout = imagine_future(&observation, subtask, &c.gen, c.suite.generator.as_ref())
                .map_err(AttemptFailure::from_dynamics)?;
            let camera_traj = extract_trajectory(&rollout, &subtask.obj, &c.rdp)
                .map_err(AttemptFailure::from_dynamics)?;
            let world = to_world_frame(&camera_traj, &c.extrinsics);
            if c.ablation == Ablation::Path {
                let first = world.waypoints[0];
                let mut last = *world.waypoints.last().expect("validated rollout");
                if last.frame <= first.frame {
                    last.frame = first.frame + 1;
                }
                Trajectory::new(world.object_id.clone(), vec![first, last])
            } else {
                world
            }
        }
    };

    let candidates = candidates_for(scene, &subtask.obj, c, attempt)?;
    let grasp = select_grasp(&candidates, c.suite.judge.as_ref()).map_err(|e| match e {
        ExecError::Adapter(AdapterError::Unavailable { .. }) => {
            AttemptFailure::aborting(FailureReason::Execute, e.to_string())
        }
        other => AttemptFailure::new(FailureReason::Execute, other.to_string()),
    })?;

    let index = ObstacleIndex::build(&scene.obstacles);
    let (refined, _iterations) = optimize_trajectory(&trajectory, &index, &c.opt)
        .map_err(|e| AttemptFailure::new(FailureReason::Plan, e.to_string()))?;

    let (new_scene, log) = execute_trajectory(scene, &refined, &grasp, &c.exec).map_err(|e| match e {
        ExecError::GraspFailure { .. } | ExecError::NoGrasp => {
            AttemptFailure::new(FailureReason::Execute, e.to_string())
        }
        other => AttemptFailure::new(FailureReason::Plan, other.to_string()),
    })?;
    *collision_events += log.collisions.len() as u32;
    let outcome = log.outcome.clone();
    logs.push(AttemptLog { subtask: subtask_idx, attempt, log });
    *scene = new_scene;
    if let ExecOutcome::HaltedContact { step } = outcome {
        return Err(AttemptFailure::new(
            FailureReason::Execute,
            format!("contact halted execution at step {step}"),
        ));
    }

    let verdict = verify_via_judge(scene, subtask, c)?;
    if verdict.pass {
        Ok(())
    } else {
        let reason_tag = verdict.reason.unwrap_or_else(|| "unspecified".into());
        let reason = if reason_tag == VERIFY_DISTURBED { FailureReason::Execute } else { FailureReason::Verify };
        Err(AttemptFailure::new(reason, format!("verification failed: {reason_tag}")))
    }
}

/// Runs a validated plan to completion: subtasks execute in order behind
/// their precondition gates, each failed verification triggers replanning up
/// to the configured budget, and an exhausted budget fails the subtask while
/// the trial continues with whatever preconditions still hold.
pub fn run_task(initial_scene: &SceneState, plan: &TaskPlan, c: &PipelineComponents<'_>) -> TrialRun {
    let mut scene = initial_scene.clone();
    let mut outcomes: Vec<SubtaskOutcome> = Vec::new();
    let mut logs = Vec::new();
    let mut replans_total = 0u32;
    let mut collision_events = 0u32;
    let mut current_plan = plan.clone();
    let mut abort: Option<(FailureReason, String)> = None;

    for i in 0..plan.subtasks.len() {
        if let Some((reason, detail)) = &abort {
            outcomes.push(SubtaskOutcome {
                desc: current_plan.subtasks.get(i).map(|s| s.desc.clone()).unwrap_or_default(),
                passed: false,
                reason: Some(*reason),
                detail: Some(format!("trial aborted earlier: {detail}")),
                replans: 0,
            });
            continue;
        }
        if c.exec.block_on_failure && outcomes.iter().any(|o| !o.passed) {
            outcomes.push(SubtaskOutcome {
                desc: current_plan.subtasks[i].desc.clone(),
                passed: false,
                reason: Some(FailureReason::Plan),
                detail: Some("blocked by an earlier failed subtask".into()),
                replans: 0,
            });
            continue;
        }

        let mut subtask = current_plan.subtasks[i].clone();
        if let Some(unmet) = unmet_precondition(&scene, &subtask, c.exec.verify_tolerance) {
            outcomes.push(SubtaskOutcome {
                desc: subtask.desc.clone(),
                passed: false,
                reason: Some(FailureReason::Plan),
                detail: Some(unmet),
                replans: 0,
            });
            continue;
        }

        let mut replans_here = 0u32;
        let mut final_failure: Option<AttemptFailure> = None;
        loop {
            match attempt_subtask(&mut scene, &subtask, c, i, replans_here, &mut logs, &mut collision_events) {
                Ok(()) => break,
                Err(failure) => {
                    if failure.abort_trial {
                        abort = Some((failure.reason, failure.detail.clone()));
                        final_failure = Some(failure);
                        break;
                    }
                    if replans_here >= c.exec.replan_budget {
                        final_failure = Some(failure);
                        break;
                    }
                    replans_here += 1;
                    replans_total += 1;
                    if let Some(request) = c.planning_request {
                        let refreshed = PlanningRequest {
                            scene: SceneSummary::from_scene(&scene),
                            ..(*request).clone()
                        };
                        match unify_plan(&refreshed, c.suite.planner.as_ref()) {
                            Ok(new_plan) if new_plan.subtasks.len() == current_plan.subtasks.len() => {
                                current_plan = new_plan;
                                subtask = current_plan.subtasks[i].clone();
                            }
                            Ok(_) => {}
                            Err(PlanError::Adapter(AdapterError::Unavailable { .. })) => {
                                abort = Some((FailureReason::Plan, "planner unavailable during replan".into()));
                                final_failure = Some(AttemptFailure::new(
                                    FailureReason::Plan,
                                    "planner unavailable during replan",
                                ));
                                break;
                            }
                            Err(e) => {
                                final_failure = Some(AttemptFailure::new(FailureReason::Plan, e.to_string()));
                                // Replanning itself failed; retry the stale
                                // subtask with the remaining budget.
                            }
                        }
                    }
                }
            }
        }

        match final_failure {
            None => outcomes.push(SubtaskOutcome {
                desc: subtask.desc.clone(),
                passed: true,
                reason: None,
                detail: None,
                replans: replans_here,
            }),
            Some(failure) => outcomes.push(SubtaskOutcome {
                desc: subtask.desc.clone(),
                passed: false,
                reason: Some(failure.reason),
                detail: Some(failure.detail),
                replans: replans_here,
            }),
        }
    }

    TrialRun {
        result: TrialResult::new(c.seed, outcomes, replans_total, collision_events),
        logs,
    }
}
