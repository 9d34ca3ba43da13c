//! Future-rollout trajectory distillation.
//!
//! A generator adapter imagines how a subtask plays out as a short frame
//! sequence with per-frame object pixel tracks and depth. The dense 2D track
//! of the target object is simplified in pixel space, each retained waypoint
//! reads depth from its own source frame, and the result is lifted into a
//! camera-frame 3D trajectory.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adapters::schema::GeneratorRequest;
use crate::adapters::{Adapter, AdapterError, AdapterRole};
use crate::model::{
    CameraExtrinsics, CameraIntrinsics, Point2D, Point3D, Region, SubtaskSpec, Trajectory, Waypoint,
};

/// Depth holes are bridged by the median of defined depths within this
/// pixel radius; beyond it the lookup reports a gap.
pub const DEPTH_FALLBACK_RADIUS: i64 = 5;

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error(transparent)]
    Adapter(#[from] AdapterError),
    #[error("rollout never tracked target object `{object}`: generator hallucinated the scene")]
    Hallucination { object: String },
    #[error("not enough data (need at least 2 points)")]
    InsufficientData,
    #[error("depth must be positive, got {0}")]
    InvalidDepth(f64),
    #[error("object `{object}` is not tracked in rollout frame {frame}")]
    Tracking { object: String, frame: usize },
    #[error("no depth within {radius} px of pixel ({u}, {v}) in frame {frame}")]
    DepthGap { frame: usize, u: i64, v: i64, radius: i64 },
    #[error("invalid rollout: {0}")]
    InvalidRollout(String),
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
    #[error("subtask references `{id}`, which is not in the observation")]
    UngroundedSubtask { id: String },
}

/// Polyline simplification tolerance in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RdpParams {
    pub epsilon_px: f64,
}

impl Default for RdpParams {
    fn default() -> Self {
        Self { epsilon_px: 4.0 }
    }
}

impl RdpParams {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        if !(self.epsilon_px > 0.0) {
            return Err(DynamicsError::InvalidParams(format!(
                "epsilon_px must be > 0, got {}",
                self.epsilon_px
            )));
        }
        Ok(())
    }
}

/// Rollout generation parameters passed through to the generator adapter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenParams {
    /// Number of imagined frames Q.
    pub frames: u32,
    /// Apex height of the imagined transfer arc, meters.
    pub lift: f64,
    /// Seeded placement jitter amplitude, meters. Zero disables noise.
    pub noise: f64,
}

impl Default for GenParams {
    fn default() -> Self {
        Self { frames: 16, lift: 0.15, noise: 0.0 }
    }
}

impl GenParams {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        if self.frames < 2 {
            return Err(DynamicsError::InvalidParams(format!("frames must be >= 2, got {}", self.frames)));
        }
        if self.lift < 0.0 || self.noise < 0.0 {
            return Err(DynamicsError::InvalidParams("lift and noise must be non-negative".into()));
        }
        Ok(())
    }
}

/// Per-frame depth, either a dense grid (row-major, non-positive entries are
/// holes) or the sparse pixel map fixtures emit.
#[derive(Debug, Clone, PartialEq)]
pub enum DepthTable {
    Sparse(BTreeMap<(i64, i64), f64>),
    Dense { width: u32, height: u32, data: Vec<f64> },
}

impl DepthTable {
    fn at(&self, u: i64, v: i64) -> Option<f64> {
        match self {
            DepthTable::Sparse(map) => map.get(&(u, v)).copied().filter(|z| *z > 0.0),
            DepthTable::Dense { width, height, data } => {
                if u < 0 || v < 0 || u >= *width as i64 || v >= *height as i64 {
                    return None;
                }
                let z = data[(v as usize) * (*width as usize) + u as usize];
                (z > 0.0).then_some(z)
            }
        }
    }

    /// Depth at the rounded pixel, falling back to the median of defined
    /// depths within [`DEPTH_FALLBACK_RADIUS`] pixels.
    pub fn lookup(&self, pixel: &Point2D) -> Option<f64> {
        let u = pixel.u.round() as i64;
        let v = pixel.v.round() as i64;
        if let Some(z) = self.at(u, v) {
            return Some(z);
        }
        let r = DEPTH_FALLBACK_RADIUS;
        let mut values = Vec::new();
        for du in -r..=r {
            for dv in -r..=r {
                if du * du + dv * dv > r * r {
                    continue;
                }
                if let Some(z) = self.at(u + du, v + dv) {
                    values.push(z);
                }
            }
        }
        if values.is_empty() {
            return None;
        }
        values.sort_by(f64::total_cmp);
        let n = values.len();
        Some(if n % 2 == 1 { values[n / 2] } else { (values[n / 2 - 1] + values[n / 2]) / 2.0 })
    }
}

/// One imagined frame: pixel position per tracked object plus depth.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutFrame {
    pub tracks: BTreeMap<String, Point2D>,
    pub depth: DepthTable,
}

/// An imagined frame sequence for one subtask.
#[derive(Debug, Clone, PartialEq)]
pub struct FutureRollout {
    pub frames: Vec<RolloutFrame>,
    pub intrinsics: CameraIntrinsics,
}

impl FutureRollout {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        if self.frames.len() < 2 {
            return Err(DynamicsError::InvalidRollout(format!(
                "rollout must have at least 2 frames, got {}",
                self.frames.len()
            )));
        }
        for (i, frame) in self.frames.iter().enumerate() {
            for (id, pixel) in &frame.tracks {
                if !self.intrinsics.contains_pixel(pixel) {
                    return Err(DynamicsError::InvalidRollout(format!(
                        "track `{id}` leaves the image in frame {i}: ({}, {})",
                        pixel.u, pixel.v
                    )));
                }
            }
            if let DepthTable::Sparse(map) = &frame.depth {
                if let Some(((u, v), z)) = map.iter().find(|(_, z)| **z <= 0.0) {
                    return Err(DynamicsError::InvalidRollout(format!(
                        "non-positive depth {z} at ({u}, {v}) in frame {i}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// One object's world state as seen by the camera.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityState {
    pub id: String,
    pub position: Point3D,
    pub radius: f64,
}

/// Desk-scale stand-in for the robot's RGB-D observation: the world state a
/// camera parked over the desk would perceive, plus the camera model needed
/// to reason in pixel space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObservation {
    pub intrinsics: CameraIntrinsics,
    pub extrinsics: CameraExtrinsics,
    pub entities: Vec<EntityState>,
    pub obstacles: Vec<Point3D>,
    pub regions: Vec<Region>,
}

/// Projects a camera-frame point to a pixel. Inverse of [`backproject`].
pub fn project(point: &Point3D, intrinsics: &CameraIntrinsics) -> Result<Point2D, DynamicsError> {
    if !(point.z > 0.0) {
        return Err(DynamicsError::InvalidDepth(point.z));
    }
    Ok(Point2D::new(
        intrinsics.fx * point.x / point.z + intrinsics.cx,
        intrinsics.fy * point.y / point.z + intrinsics.cy,
    ))
}

/// Lifts a pixel with known depth to a camera-frame 3D point.
pub fn backproject(
    pixel: &Point2D,
    depth: f64,
    intrinsics: &CameraIntrinsics,
) -> Result<Point3D, DynamicsError> {
    if !(depth > 0.0) {
        return Err(DynamicsError::InvalidDepth(depth));
    }
    Ok(Point3D::new(
        (pixel.u - intrinsics.cx) * depth / intrinsics.fx,
        (pixel.v - intrinsics.cy) * depth / intrinsics.fy,
        depth,
    ))
}

fn point_segment_distance(p: &Point2D, a: &Point2D, b: &Point2D) -> f64 {
    let abu = b.u - a.u;
    let abv = b.v - a.v;
    let len_sq = abu * abu + abv * abv;
    if len_sq == 0.0 {
        return p.distance(a);
    }
    let t = (((p.u - a.u) * abu + (p.v - a.v) * abv) / len_sq).clamp(0.0, 1.0);
    p.distance(&Point2D::new(a.u + t * abu, a.v + t * abv))
}

fn rdp_rec(points: &[Point2D], start: usize, end: usize, epsilon: f64, keep: &mut Vec<usize>) {
    if end <= start + 1 {
        return;
    }
    let mut max_dist = 0.0;
    let mut max_idx = start + 1;
    for i in start + 1..end {
        let d = point_segment_distance(&points[i], &points[start], &points[end]);
        if d > max_dist {
            max_dist = d;
            max_idx = i;
        }
    }
    if max_dist > epsilon {
        rdp_rec(points, start, max_idx, epsilon, keep);
        keep.push(max_idx);
        rdp_rec(points, max_idx, end, epsilon, keep);
    }
}

/// Indices retained by RDP simplification; always includes first and last.
pub fn rdp_indices(points: &[Point2D], epsilon: f64) -> Vec<usize> {
    if points.len() <= 2 {
        return (0..points.len()).collect();
    }
    let mut keep = vec![0];
    rdp_rec(points, 0, points.len() - 1, epsilon, &mut keep);
    keep.push(points.len() - 1);
    keep
}

/// Simplifies a dense 2D path into a sparse waypoint subsequence.
pub fn simplify_path_rdp(points: &[Point2D], params: &RdpParams) -> Result<Vec<Point2D>, DynamicsError> {
    params.validate()?;
    if points.len() < 2 {
        return Err(DynamicsError::InsufficientData);
    }
    Ok(rdp_indices(points, params.epsilon_px).into_iter().map(|i| points[i]).collect())
}

/// Distills a rollout into the target object's camera-frame trajectory:
/// dense pixel track, RDP simplification, then per-frame depth lifting.
pub fn extract_trajectory(
    rollout: &FutureRollout,
    object_id: &str,
    rdp: &RdpParams,
) -> Result<Trajectory, DynamicsError> {
    rdp.validate()?;
    if rollout.frames.len() < 2 {
        return Err(DynamicsError::InsufficientData);
    }
    let track: Vec<Point2D> = rollout
        .frames
        .iter()
        .enumerate()
        .map(|(i, frame)| {
            frame
                .tracks
                .get(object_id)
                .copied()
                .ok_or_else(|| DynamicsError::Tracking { object: object_id.to_string(), frame: i })
        })
        .collect::<Result<_, _>>()?;

    let mut waypoints = Vec::new();
    for idx in rdp_indices(&track, rdp.epsilon_px) {
        let pixel = track[idx];
        let depth = rollout.frames[idx].depth.lookup(&pixel).ok_or(DynamicsError::DepthGap {
            frame: idx,
            u: pixel.u.round() as i64,
            v: pixel.v.round() as i64,
            radius: DEPTH_FALLBACK_RADIUS,
        })?;
        waypoints.push(Waypoint {
            position: backproject(&pixel, depth, &rollout.intrinsics)?,
            frame: idx as u32,
        });
    }
    Ok(Trajectory::new(object_id, waypoints))
}

/// Asks the generator adapter to imagine the subtask's execution and
/// returns the validated rollout.
///
/// The rollout must track the subtask's target object in every frame;
/// a rollout that loses it is a generator hallucination.
pub fn imagine_future(
    observation: &SceneObservation,
    subtask: &SubtaskSpec,
    gen: &GenParams,
    adapter: &dyn Adapter,
) -> Result<FutureRollout, DynamicsError> {
    gen.validate()?;
    if subtask.guide.is_empty() {
        return Err(DynamicsError::InvalidParams("guide text must be non-empty".into()));
    }
    if observation.entities.iter().all(|e| e.id != subtask.obj) {
        return Err(DynamicsError::UngroundedSubtask { id: subtask.obj.clone() });
    }
    let target_region = observation
        .regions
        .iter()
        .find(|r| r.id == subtask.loc)
        .cloned()
        .ok_or_else(|| DynamicsError::UngroundedSubtask { id: subtask.loc.clone() })?;

    let request = GeneratorRequest {
        guide: subtask.guide.clone(),
        object_id: subtask.obj.clone(),
        frames: gen.frames,
        lift: gen.lift,
        noise: gen.noise,
        intrinsics: observation.intrinsics,
        extrinsics: observation.extrinsics,
        entities: observation.entities.clone(),
        obstacles: observation.obstacles.clone(),
        target_region,
    };
    let payload = serde_json::to_value(&request)
        .map_err(|e| DynamicsError::InvalidParams(format!("unserializable request: {e}")))?;
    debug_assert_eq!(adapter.role(), AdapterRole::Generator);
    let response = adapter.call(&payload)?;
    let wire: crate::adapters::schema::GeneratorResponse = serde_json::from_value(response.payload)
        .map_err(|e| DynamicsError::InvalidRollout(format!("undecodable rollout: {e}")))?;
    let rollout = FutureRollout::from(wire);
    rollout.validate()?;
    if rollout.frames.iter().any(|f| !f.tracks.contains_key(&subtask.obj)) {
        return Err(DynamicsError::Hallucination { object: subtask.obj.clone() });
    }
    Ok(rollout)
}
