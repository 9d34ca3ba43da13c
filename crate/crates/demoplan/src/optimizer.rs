//! Gradient-based trajectory refinement.
//!
//! Minimizes `w_smooth * C_smooth + w_coll * C_coll` over the interior
//! waypoints of a trajectory. `C_smooth` sums `1 - cos(theta)` over the turn
//! angles between consecutive segments; `C_coll` sums the softened inverse
//! distance `(d + phi)^-1` from each waypoint to its nearest obstacle.
//! Endpoints stay fixed: grasp and placement poses are decided upstream.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kdtree::ObstacleIndex;
use crate::model::{Point3D, Trajectory};

/// Segments shorter than this are treated as degenerate and contribute
/// nothing to cost or gradient.
const DEGENERATE_SEGMENT: f64 = 1e-9;

const ARMIJO_C: f64 = 1e-4;
const MAX_BACKTRACKS: u32 = 60;

#[derive(Debug, Error, PartialEq)]
pub enum OptimizerError {
    #[error("invalid optimizer parameter: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptParams {
    pub w_smooth: f64,
    pub w_coll: f64,
    /// Collision softening distance in meters; keeps the cost finite at
    /// contact.
    pub phi: f64,
    pub step_size: f64,
    pub max_iters: u32,
    pub cost_tol: f64,
    pub shrink_factor: f64,
}

impl Default for OptParams {
    fn default() -> Self {
        Self {
            w_smooth: 1.0,
            w_coll: 1.0,
            phi: 0.05,
            step_size: 0.05,
            max_iters: 200,
            cost_tol: 1e-6,
            shrink_factor: 0.5,
        }
    }
}

impl OptParams {
    pub fn validate(&self) -> Result<(), OptimizerError> {
        if !(self.phi > 0.0) {
            return Err(OptimizerError::InvalidParams(format!("phi must be > 0, got {}", self.phi)));
        }
        if self.max_iters < 1 {
            return Err(OptimizerError::InvalidParams("max_iters must be >= 1".into()));
        }
        if !(self.shrink_factor > 0.0 && self.shrink_factor < 1.0) {
            return Err(OptimizerError::InvalidParams(format!(
                "shrink_factor must be in (0, 1), got {}",
                self.shrink_factor
            )));
        }
        if self.w_smooth < 0.0 || self.w_coll < 0.0 {
            return Err(OptimizerError::InvalidParams("weights must be non-negative".into()));
        }
        if !(self.step_size > 0.0) {
            return Err(OptimizerError::InvalidParams("step_size must be > 0".into()));
        }
        if self.cost_tol < 0.0 {
            return Err(OptimizerError::InvalidParams("cost_tol must be >= 0".into()));
        }
        Ok(())
    }
}

/// One accepted solver step, serialized as a JSON line in iteration logs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: u32,
    pub cost: f64,
    pub step: f64,
}

/// Serializes an iteration log as JSON lines, one accepted step per line.
pub fn iteration_log_jsonl(log: &[IterationRecord]) -> String {
    let mut out = String::new();
    for record in log {
        out.push_str(&serde_json::to_string(record).expect("serializable record"));
        out.push('\n');
    }
    out
}

/// Sum of `1 - cos(theta_m)` over interior waypoints. Zero for collinear
/// paths and for trajectories with fewer than three waypoints.
pub fn smoothness_cost(traj: &Trajectory) -> f64 {
    smoothness_of_positions(&positions(traj))
}

fn positions(traj: &Trajectory) -> Vec<Point3D> {
    traj.positions().copied().collect()
}

fn smoothness_of_positions(pts: &[Point3D]) -> f64 {
    let mut total = 0.0;
    for m in 1..pts.len().saturating_sub(1) {
        let d1 = pts[m].sub(&pts[m - 1]);
        let d2 = pts[m + 1].sub(&pts[m]);
        let n1 = d1.norm();
        let n2 = d2.norm();
        if n1 < DEGENERATE_SEGMENT || n2 < DEGENERATE_SEGMENT {
            continue;
        }
        let cos = (d1.dot(&d2) / (n1 * n2)).clamp(-1.0, 1.0);
        total += 1.0 - cos;
    }
    total
}

/// Sum of `(d_m + phi)^-1` over all waypoints, where `d_m` is the distance
/// to the nearest obstacle. An empty index contributes nothing: an
/// obstacle-free scene is a valid task, not an error.
pub fn collision_cost(traj: &Trajectory, index: &ObstacleIndex, phi: f64) -> f64 {
    collision_of_positions(&positions(traj), index, phi)
}

fn collision_of_positions(pts: &[Point3D], index: &ObstacleIndex, phi: f64) -> f64 {
    if index.is_empty() {
        return 0.0;
    }
    pts.iter()
        .map(|p| {
            let d = index.nearest(p).expect("non-empty index").distance;
            1.0 / (d + phi)
        })
        .sum()
}

pub fn total_cost(traj: &Trajectory, index: &ObstacleIndex, params: &OptParams) -> f64 {
    total_of_positions(&positions(traj), index, params)
}

fn total_of_positions(pts: &[Point3D], index: &ObstacleIndex, params: &OptParams) -> f64 {
    params.w_smooth * smoothness_of_positions(pts) + params.w_coll * collision_of_positions(pts, index, params.phi)
}

/// Analytic gradient of the total cost with respect to the interior
/// waypoints (endpoints are pinned, so their entries are not reported).
/// The collision term treats the nearest obstacle as locally fixed; exact
/// nearest-neighbor ties resolve toward the smallest obstacle index, which
/// makes this a deterministic subgradient.
pub fn cost_gradient(traj: &Trajectory, index: &ObstacleIndex, params: &OptParams) -> Vec<Point3D> {
    gradient_of_positions(&positions(traj), index, params)
}

fn gradient_of_positions(pts: &[Point3D], index: &ObstacleIndex, params: &OptParams) -> Vec<Point3D> {
    let n = pts.len();
    if n < 3 {
        return Vec::new();
    }
    let mut grad = vec![Point3D::new(0.0, 0.0, 0.0); n];

    if params.w_smooth > 0.0 {
        for m in 1..n - 1 {
            let d1 = pts[m].sub(&pts[m - 1]);
            let d2 = pts[m + 1].sub(&pts[m]);
            let n1 = d1.norm();
            let n2 = d2.norm();
            if n1 < DEGENERATE_SEGMENT || n2 < DEGENERATE_SEGMENT {
                continue;
            }
            let u1 = d1.scale(1.0 / n1);
            let u2 = d2.scale(1.0 / n2);
            let cos = u1.dot(&u2).clamp(-1.0, 1.0);
            // g1 = d(cos)/d(d1), g2 = d(cos)/d(d2); the 1 - cos term flips signs.
            let g1 = u2.sub(&u1.scale(cos)).scale(1.0 / n1);
            let g2 = u1.sub(&u2.scale(cos)).scale(1.0 / n2);
            let w = params.w_smooth;
            grad[m - 1] = grad[m - 1].add(&g1.scale(w));
            grad[m] = grad[m].add(&g2.sub(&g1).scale(w));
            grad[m + 1] = grad[m + 1].add(&g2.scale(-w));
        }
    }

    if params.w_coll > 0.0 && !index.is_empty() {
        for (m, p) in pts.iter().enumerate().take(n - 1).skip(1) {
            let nearest = index.nearest(p).expect("non-empty index");
            let d = nearest.distance;
            if d < DEGENERATE_SEGMENT {
                // Coincident with the obstacle: direction undefined, take the
                // zero subgradient.
                continue;
            }
            let toward = p.sub(&nearest.point).scale(1.0 / d);
            let magnitude = -1.0 / ((d + params.phi) * (d + params.phi));
            grad[m] = grad[m].add(&toward.scale(params.w_coll * magnitude));
        }
    }

    grad[1..n - 1].to_vec()
}

/// Refines a trajectory by gradient descent with Armijo backtracking.
///
/// The first and last waypoints never move, the accepted-iteration cost
/// sequence is non-increasing, and the waypoint count is fixed. Returns the
/// refined trajectory and one record per accepted step.
pub fn optimize_trajectory(
    traj: &Trajectory,
    index: &ObstacleIndex,
    params: &OptParams,
) -> Result<(Trajectory, Vec<IterationRecord>), OptimizerError> {
    params.validate()?;
    let mut pts = positions(traj);
    let n = pts.len();
    let mut log = Vec::new();
    if n < 3 {
        return Ok((traj.clone(), log));
    }

    let mut cost = total_of_positions(&pts, index, params);
    for iter in 0..params.max_iters {
        let grad = gradient_of_positions(&pts, index, params);
        let grad_sq: f64 = grad.iter().map(|g| g.dot(g)).sum();
        if grad_sq == 0.0 {
            break;
        }

        let mut step = params.step_size;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let candidate: Vec<Point3D> = pts
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    if i == 0 || i == n - 1 {
                        *p
                    } else {
                        p.sub(&grad[i - 1].scale(step))
                    }
                })
                .collect();
            let candidate_cost = total_of_positions(&candidate, index, params);
            if candidate_cost <= cost - ARMIJO_C * step * grad_sq {
                accepted = Some((candidate, candidate_cost, step));
                break;
            }
            step *= params.shrink_factor;
        }

        let Some((next, next_cost, used_step)) = accepted else {
            break;
        };
        let improvement = cost - next_cost;
        pts = next;
        cost = next_cost;
        log.push(IterationRecord { iter, cost, step: used_step });
        if improvement < params.cost_tol {
            break;
        }
    }

    let waypoints = traj
        .waypoints
        .iter()
        .zip(pts)
        .map(|(w, position)| crate::model::Waypoint { position, frame: w.frame })
        .collect();
    Ok((Trajectory::new(traj.object_id.clone(), waypoints), log))
}
