//! Shared geometric and planning domain types.
//!
//! Conventions used throughout the crate: lengths in meters, image
//! quantities in pixels, frames as integer indices. Poses carry a position
//! plus optional yaw only; the simulator is a point-gripper abstraction.
//! All types here are immutable value data and safe to share across tasks.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GeomError {
    #[error("degenerate zero-norm vector in angle computation")]
    DegenerateVector,
}

/// A pixel position: `u` is the column, `v` the row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2D {
    pub u: f64,
    pub v: f64,
}

impl Point2D {
    pub fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }

    pub fn distance(&self, other: &Point2D) -> f64 {
        ((self.u - other.u).powi(2) + (self.v - other.v).powi(2)).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.v.is_finite()
    }
}

/// A 3D point in meters. Whether it lives in the camera or world frame is
/// determined by context: rollout trajectories are camera-frame until the
/// executor applies the scenario extrinsics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point3D {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3D {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn add(&self, other: &Point3D) -> Point3D {
        Point3D::new(self.x + other.x, self.y + other.y, self.z + other.z)
    }

    pub fn sub(&self, other: &Point3D) -> Point3D {
        Point3D::new(self.x - other.x, self.y - other.y, self.z - other.z)
    }

    pub fn scale(&self, s: f64) -> Point3D {
        Point3D::new(self.x * s, self.y * s, self.z * s)
    }

    pub fn dot(&self, other: &Point3D) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn distance(&self, other: &Point3D) -> f64 {
        self.sub(other).norm()
    }

    pub fn lerp(&self, other: &Point3D, t: f64) -> Point3D {
        self.add(&other.sub(self).scale(t))
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl fmt::Display for Point3D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:.4}, {:.4}, {:.4})", self.x, self.y, self.z)
    }
}

/// Angle between two 3D vectors, in radians within [0, pi].
///
/// The normalized dot product is clamped to [-1, 1] before `acos` so that
/// floating-point drift at near-collinear segments cannot produce NaN.
pub fn angle_between(a: &Point3D, b: &Point3D) -> Result<f64, GeomError> {
    let na = a.norm();
    let nb = b.norm();
    if na == 0.0 || nb == 0.0 {
        return Err(GeomError::DegenerateVector);
    }
    let cos = (a.dot(b) / (na * nb)).clamp(-1.0, 1.0);
    Ok(cos.acos())
}

/// Pinhole camera intrinsics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl CameraIntrinsics {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(format!("focal lengths must be positive, got fx={} fy={}", self.fx, self.fy));
        }
        if !(self.cx >= 0.0 && self.cx < self.width as f64) {
            return Err(format!("cx={} outside [0, {})", self.cx, self.width));
        }
        if !(self.cy >= 0.0 && self.cy < self.height as f64) {
            return Err(format!("cy={} outside [0, {})", self.cy, self.height));
        }
        Ok(())
    }

    pub fn contains_pixel(&self, p: &Point2D) -> bool {
        p.u >= 0.0 && p.u < self.width as f64 && p.v >= 0.0 && p.v < self.height as f64
    }
}

/// Rigid camera-to-world transform: `p_world = R * p_cam + t`.
///
/// This is deliberately a single transform plus its inverse, not a pose
/// algebra. The scenario file owns it; rollout trajectories are produced in
/// the camera frame and the executor lifts them into the world frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraExtrinsics {
    pub rotation: [[f64; 3]; 3],
    pub translation: [f64; 3],
}

impl CameraExtrinsics {
    /// Camera mounted at `height` meters looking straight down at the desk
    /// plane z = 0. Camera +x maps to world +x, camera +y to world -y,
    /// camera +z (depth) to world -z.
    pub fn top_down(height: f64) -> Self {
        Self {
            rotation: [[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, -1.0]],
            translation: [0.0, 0.0, height],
        }
    }

    /// Camera at `position` looking at `target`, image x aligned with the
    /// horizontal. The view direction must not be vertical; use
    /// [`top_down`](Self::top_down) for nadir rigs.
    pub fn look_at(position: Point3D, target: Point3D) -> Result<Self, String> {
        let forward = target.sub(&position);
        let norm = forward.norm();
        if norm < 1e-9 {
            return Err("camera position and target coincide".into());
        }
        let f = forward.scale(1.0 / norm);
        let horizontal = (f.x * f.x + f.y * f.y).sqrt();
        if horizontal < 1e-9 {
            return Err("view direction is vertical; use a top-down rig".into());
        }
        let x = Point3D::new(f.y / horizontal, -f.x / horizontal, 0.0);
        // y points down in the image: z_cam cross x_cam.
        let y = Point3D::new(
            f.y * x.z - f.z * x.y,
            f.z * x.x - f.x * x.z,
            f.x * x.y - f.y * x.x,
        );
        Ok(Self {
            rotation: [[x.x, y.x, f.x], [x.y, y.y, f.y], [x.z, y.z, f.z]],
            translation: [position.x, position.y, position.z],
        })
    }

    pub fn camera_to_world(&self, p: &Point3D) -> Point3D {
        let r = &self.rotation;
        Point3D::new(
            r[0][0] * p.x + r[0][1] * p.y + r[0][2] * p.z + self.translation[0],
            r[1][0] * p.x + r[1][1] * p.y + r[1][2] * p.z + self.translation[1],
            r[2][0] * p.x + r[2][1] * p.y + r[2][2] * p.z + self.translation[2],
        )
    }

    /// Inverse of [`camera_to_world`](Self::camera_to_world); valid because
    /// the rotation is orthonormal.
    pub fn world_to_camera(&self, p: &Point3D) -> Point3D {
        let r = &self.rotation;
        let d = Point3D::new(
            p.x - self.translation[0],
            p.y - self.translation[1],
            p.z - self.translation[2],
        );
        Point3D::new(
            r[0][0] * d.x + r[1][0] * d.y + r[2][0] * d.z,
            r[0][1] * d.x + r[1][1] * d.y + r[2][1] * d.z,
            r[0][2] * d.x + r[1][2] * d.y + r[2][2] * d.z,
        )
    }

    pub fn validate(&self) -> Result<(), String> {
        // Rows must be orthonormal.
        for i in 0..3 {
            for j in 0..3 {
                let dot: f64 = (0..3).map(|k| self.rotation[i][k] * self.rotation[j][k]).sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                if (dot - expect).abs() > 1e-9 {
                    return Err(format!("extrinsic rotation is not orthonormal (rows {i},{j})"));
                }
            }
        }
        Ok(())
    }
}

/// A single trajectory waypoint: a 3D position plus the rollout frame it
/// was extracted from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub position: Point3D,
    pub frame: u32,
}

/// An ordered 3D waypoint sequence guiding the manipulation of one object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub object_id: String,
    pub waypoints: Vec<Waypoint>,
}

impl Trajectory {
    pub fn new(object_id: impl Into<String>, waypoints: Vec<Waypoint>) -> Self {
        Self { object_id: object_id.into(), waypoints }
    }

    pub fn len(&self) -> usize {
        self.waypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waypoints.is_empty()
    }

    pub fn positions(&self) -> impl Iterator<Item = &Point3D> {
        self.waypoints.iter().map(|w| &w.position)
    }

    /// Checks the executable-trajectory invariants: at least two waypoints
    /// and strictly increasing source frames.
    pub fn validate(&self) -> Result<(), String> {
        if self.waypoints.len() < 2 {
            return Err(format!("trajectory has {} waypoints, need at least 2", self.waypoints.len()));
        }
        for pair in self.waypoints.windows(2) {
            if pair[1].frame <= pair[0].frame {
                return Err(format!(
                    "frame indices must be strictly increasing, got {} then {}",
                    pair[0].frame, pair[1].frame
                ));
            }
        }
        Ok(())
    }
}

/// Planning modes supported by the plan translator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanMode {
    /// Reproduce the demonstrated action sequence in the current scene.
    Mimic,
    /// Demonstration plus a language constraint that edits the plan.
    Constrained,
    /// Reapply the demonstrated sorting logic to novel object categories.
    SkillTransfer,
    /// No demonstration; plan from a short language command alone.
    TextOnly,
}

impl fmt::Display for PlanMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            PlanMode::Mimic => "mimic",
            PlanMode::Constrained => "constrained",
            PlanMode::SkillTransfer => "skill_transfer",
            PlanMode::TextOnly => "text_only",
        };
        f.write_str(s)
    }
}

/// Precondition predicates a subtask may carry. Deliberately a closed enum:
/// these two relations cover every bundled task.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "relation", rename_all = "snake_case")]
pub enum Precondition {
    On { obj: String, region: String },
    Holding { obj: String },
}

/// One planned subtask: description, target object, destination, the prompt
/// used to condition rollout generation, and preconditions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubtaskSpec {
    pub desc: String,
    pub obj: String,
    pub loc: String,
    pub guide: String,
    #[serde(default)]
    pub precond: Vec<Precondition>,
}

impl SubtaskSpec {
    pub fn validate(&self) -> Result<(), String> {
        for (name, value) in [
            ("desc", &self.desc),
            ("obj", &self.obj),
            ("loc", &self.loc),
            ("guide", &self.guide),
        ] {
            if value.is_empty() {
                return Err(format!("subtask field `{name}` must be non-empty"));
            }
        }
        Ok(())
    }
}

/// An ordered subtask plan plus the mode that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskPlan {
    pub subtasks: Vec<SubtaskSpec>,
    pub provenance: PlanMode,
}

/// An object in the scene: position, optional yaw, bounding radius, and a
/// disturbed flag set by the executor when a collision touches it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub id: String,
    pub position: Point3D,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub yaw: Option<f64>,
    pub radius: f64,
    #[serde(default)]
    pub disturbed: bool,
}

/// An axis-aligned destination region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub id: String,
    pub min: Point3D,
    pub max: Point3D,
}

impl Region {
    /// Whether `p` lies inside the box expanded by `tolerance` on every face.
    pub fn contains(&self, p: &Point3D, tolerance: f64) -> bool {
        p.x >= self.min.x - tolerance
            && p.x <= self.max.x + tolerance
            && p.y >= self.min.y - tolerance
            && p.y <= self.max.y + tolerance
            && p.z >= self.min.z - tolerance
            && p.z <= self.max.z + tolerance
    }

    pub fn center(&self) -> Point3D {
        self.min.lerp(&self.max, 0.5)
    }
}

/// The simulator's world model: objects, destination regions, an obstacle
/// point cloud, and the currently held object if any.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneState {
    pub objects: Vec<SceneObject>,
    pub regions: Vec<Region>,
    #[serde(default)]
    pub obstacles: Vec<Point3D>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub held_object: Option<String>,
}

impl SceneState {
    pub fn object(&self, id: &str) -> Option<&SceneObject> {
        self.objects.iter().find(|o| o.id == id)
    }

    pub fn object_mut(&mut self, id: &str) -> Option<&mut SceneObject> {
        self.objects.iter_mut().find(|o| o.id == id)
    }

    pub fn region(&self, id: &str) -> Option<&Region> {
        self.regions.iter().find(|r| r.id == id)
    }
}

/// One scene-validation finding. Diagnostics are reports, not failures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneDiagnostic {
    pub invariant: String,
    pub id: String,
    pub detail: String,
}

impl SceneDiagnostic {
    fn new(invariant: &str, id: &str, detail: String) -> Self {
        Self { invariant: invariant.to_string(), id: id.to_string(), detail }
    }
}

/// Checks every [`SceneState`] invariant and returns one diagnostic per
/// violation. An empty list means the scene is accepted by every
/// downstream module.
pub fn validate_scene(scene: &SceneState) -> Vec<SceneDiagnostic> {
    let mut out = Vec::new();
    let mut seen: BTreeSet<&str> = BTreeSet::new();

    for obj in &scene.objects {
        if !seen.insert(&obj.id) {
            out.push(SceneDiagnostic::new("unique-ids", &obj.id, format!("duplicate id `{}`", obj.id)));
        }
        if !(obj.radius > 0.0) {
            out.push(SceneDiagnostic::new(
                "positive-radius",
                &obj.id,
                format!("bounding radius must be > 0, got {}", obj.radius),
            ));
        }
        if !obj.position.is_finite() {
            out.push(SceneDiagnostic::new("finite-position", &obj.id, format!("non-finite position {:?}", obj.position)));
        }
    }

    for region in &scene.regions {
        if !seen.insert(&region.id) {
            out.push(SceneDiagnostic::new("unique-ids", &region.id, format!("duplicate id `{}`", region.id)));
        }
        if region.min.x > region.max.x || region.min.y > region.max.y || region.min.z > region.max.z {
            out.push(SceneDiagnostic::new(
                "region-min-max",
                &region.id,
                format!("region min {} exceeds max {}", region.min, region.max),
            ));
        }
        if !region.min.is_finite() || !region.max.is_finite() {
            out.push(SceneDiagnostic::new("finite-position", &region.id, "non-finite region bounds".to_string()));
        }
    }

    for (i, p) in scene.obstacles.iter().enumerate() {
        if !p.is_finite() {
            out.push(SceneDiagnostic::new(
                "finite-position",
                &format!("obstacle[{i}]"),
                format!("non-finite obstacle point {p:?}"),
            ));
        }
    }

    if let Some(held) = &scene.held_object {
        if scene.object(held).is_none() {
            out.push(SceneDiagnostic::new(
                "held-object-exists",
                held,
                format!("held_object `{held}` is not a declared object"),
            ));
        }
    }

    out
}
