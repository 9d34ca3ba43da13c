//! Wire schemas for the five adapter roles.
//!
//! Every request and response crossing an adapter boundary is one of these
//! JSON bodies, whichever side of the wire produces it. Fixture adapters and
//! remote sidecars share the exact same contract, so a real model can be
//! wrapped by a thin HTTP shim without touching pipeline code.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{AdapterError, AdapterRole};
use crate::dynamics::{DepthTable, EntityState, FutureRollout, RolloutFrame};
use crate::executor::GraspCandidate;
use crate::model::{CameraExtrinsics, CameraIntrinsics, Point2D, Point3D, Region, SceneState, SubtaskSpec, TaskPlan};
use crate::planner::{BaselinePlan, KeyframeDescriptor, PlanningRequest};

/// Planner requests: demonstration abstraction or unified planning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PlannerRequest {
    Abstract { keyframes: Vec<KeyframeDescriptor> },
    Unify { request: PlanningRequest },
}

/// Planner responses. `Error` carries structured refusals (ungroundable
/// identifiers, unsupported constraints) so callers never parse free text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PlannerResponse {
    Baseline {
        baseline: BaselinePlan,
    },
    Plan {
        plan: TaskPlan,
    },
    Error {
        code: String,
        message: String,
        #[serde(default)]
        unresolved: Vec<String>,
    },
}

/// Generator request: the observation a video model would condition on,
/// expressed as desk-scale scene state plus the guide prompt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorRequest {
    pub guide: String,
    pub object_id: String,
    pub frames: u32,
    pub lift: f64,
    pub noise: f64,
    pub intrinsics: CameraIntrinsics,
    pub extrinsics: CameraExtrinsics,
    pub entities: Vec<EntityState>,
    pub obstacles: Vec<Point3D>,
    pub target_region: Region,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepthEntry {
    pub u: i64,
    pub v: i64,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DepthWire {
    Sparse(Vec<DepthEntry>),
    Dense { width: u32, height: u32, data: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutFrameWire {
    pub tracks: BTreeMap<String, [f64; 2]>,
    pub depth: DepthWire,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorResponse {
    pub frames: Vec<RolloutFrameWire>,
    pub intrinsics: CameraIntrinsics,
}

impl From<RolloutFrameWire> for RolloutFrame {
    fn from(wire: RolloutFrameWire) -> Self {
        let tracks = wire
            .tracks
            .into_iter()
            .map(|(id, [u, v])| (id, Point2D::new(u, v)))
            .collect();
        let depth = match wire.depth {
            DepthWire::Sparse(entries) => {
                DepthTable::Sparse(entries.into_iter().map(|e| ((e.u, e.v), e.z)).collect())
            }
            DepthWire::Dense { width, height, data } => DepthTable::Dense { width, height, data },
        };
        RolloutFrame { tracks, depth }
    }
}

impl From<RolloutFrame> for RolloutFrameWire {
    fn from(frame: RolloutFrame) -> Self {
        let tracks = frame.tracks.into_iter().map(|(id, p)| (id, [p.u, p.v])).collect();
        let depth = match frame.depth {
            DepthTable::Sparse(map) => DepthWire::Sparse(
                map.into_iter().map(|((u, v), z)| DepthEntry { u, v, z }).collect(),
            ),
            DepthTable::Dense { width, height, data } => DepthWire::Dense { width, height, data },
        };
        RolloutFrameWire { tracks, depth }
    }
}

impl From<GeneratorResponse> for FutureRollout {
    fn from(wire: GeneratorResponse) -> Self {
        FutureRollout {
            frames: wire.frames.into_iter().map(RolloutFrame::from).collect(),
            intrinsics: wire.intrinsics,
        }
    }
}

impl From<FutureRollout> for GeneratorResponse {
    fn from(rollout: FutureRollout) -> Self {
        GeneratorResponse {
            frames: rollout.frames.into_iter().map(RolloutFrameWire::from).collect(),
            intrinsics: rollout.intrinsics,
        }
    }
}

/// Tracker request: the rollout frames stand in for the generated video.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackerRequest {
    pub frames: Vec<RolloutFrameWire>,
    pub object_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackerResponse {
    pub track: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepthQuery {
    pub frame: usize,
    pub u: i64,
    pub v: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthRequest {
    pub frames: Vec<RolloutFrameWire>,
    pub queries: Vec<DepthQuery>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthResponse {
    pub depths: Vec<Option<f64>>,
}

/// Judge requests: commonsense selection among grasp candidates, or a
/// structured verdict on a subtask outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum JudgeRequest {
    SelectGrasp { candidates: Vec<GraspCandidate> },
    Verify { scene: SceneState, subtask: SubtaskSpec, tolerance: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum JudgeResponse {
    Grasp {
        id: u32,
    },
    Verdict {
        pass: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        reason: Option<String>,
    },
}

fn check<T: for<'de> Deserialize<'de>>(
    role: AdapterRole,
    payload: &Value,
    direction: &str,
) -> Result<(), AdapterError> {
    serde_json::from_value::<T>(payload.clone()).map(|_| ()).map_err(|e| {
        AdapterError::SchemaViolation {
            role: role.name().to_string(),
            detail: format!("{direction} body: {e}"),
            raw: payload.to_string(),
        }
    })
}

/// Validates a request body against its role schema.
pub fn validate_request(role: AdapterRole, payload: &Value) -> Result<(), AdapterError> {
    match role {
        AdapterRole::Planner => check::<PlannerRequest>(role, payload, "request"),
        AdapterRole::Generator => check::<GeneratorRequest>(role, payload, "request"),
        AdapterRole::Tracker => check::<TrackerRequest>(role, payload, "request"),
        AdapterRole::Depth => check::<DepthRequest>(role, payload, "request"),
        AdapterRole::Judge => check::<JudgeRequest>(role, payload, "request"),
    }
}

/// Validates a response body against its role schema.
pub fn validate_response(role: AdapterRole, payload: &Value) -> Result<(), AdapterError> {
    match role {
        AdapterRole::Planner => check::<PlannerResponse>(role, payload, "response"),
        AdapterRole::Generator => check::<GeneratorResponse>(role, payload, "response"),
        AdapterRole::Tracker => check::<TrackerResponse>(role, payload, "response"),
        AdapterRole::Depth => check::<DepthResponse>(role, payload, "response"),
        AdapterRole::Judge => check::<JudgeResponse>(role, payload, "response"),
    }
}
