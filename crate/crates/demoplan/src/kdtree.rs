//! Exact nearest-neighbor index over 3D obstacle points.
//!
//! The tree is an accelerator, never an approximation: every query returns
//! exactly what a linear scan would, including the tie-break toward the
//! smallest original point index.

use thiserror::Error;

use crate::model::Point3D;

#[derive(Debug, Error, PartialEq)]
pub enum IndexError {
    #[error("obstacle index is empty")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Nearest {
    /// Index of the point in the original input order.
    pub index: usize,
    pub point: Point3D,
    pub distance: f64,
}

#[derive(Debug, Clone)]
struct Node {
    /// Index into `points`.
    point: usize,
    axis: usize,
    left: Option<usize>,
    right: Option<usize>,
}

/// Immutable KD-tree over 3D points, built once at construction.
#[derive(Debug, Clone, Default)]
pub struct ObstacleIndex {
    points: Vec<Point3D>,
    nodes: Vec<Node>,
    root: Option<usize>,
}

fn coord(p: &Point3D, axis: usize) -> f64 {
    match axis {
        0 => p.x,
        1 => p.y,
        _ => p.z,
    }
}

fn dist_sq(a: &Point3D, b: &Point3D) -> f64 {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    let dz = a.z - b.z;
    dx * dx + dy * dy + dz * dz
}

impl ObstacleIndex {
    pub fn build(points: &[Point3D]) -> Self {
        let mut index = ObstacleIndex {
            points: points.to_vec(),
            nodes: Vec::with_capacity(points.len()),
            root: None,
        };
        let mut order: Vec<usize> = (0..points.len()).collect();
        index.root = index.build_rec(&mut order, 0);
        index
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn build_rec(&mut self, order: &mut [usize], depth: usize) -> Option<usize> {
        if order.is_empty() {
            return None;
        }
        let axis = depth % 3;
        let mid = order.len() / 2;
        // Total order including the original index keeps construction
        // deterministic when coordinates tie.
        let points = &self.points;
        order.select_nth_unstable_by(mid, |&a, &b| {
            coord(&points[a], axis)
                .total_cmp(&coord(&points[b], axis))
                .then(a.cmp(&b))
        });
        let point = order[mid];
        let node_id = self.nodes.len();
        self.nodes.push(Node { point, axis, left: None, right: None });
        let (lo, hi) = order.split_at_mut(mid);
        let left = self.build_rec(lo, depth + 1);
        let right = self.build_rec(&mut hi[1..], depth + 1);
        self.nodes[node_id].left = left;
        self.nodes[node_id].right = right;
        Some(node_id)
    }

    /// Exact nearest neighbor; `None` only for an empty index.
    pub fn nearest(&self, query: &Point3D) -> Option<Nearest> {
        let root = self.root?;
        let mut best: (f64, usize) = (f64::INFINITY, usize::MAX);
        self.search(root, query, &mut best);
        let (d2, idx) = best;
        Some(Nearest { index: idx, point: self.points[idx], distance: d2.sqrt() })
    }

    fn search(&self, node_id: usize, query: &Point3D, best: &mut (f64, usize)) {
        let node = &self.nodes[node_id];
        let p = &self.points[node.point];
        let d2 = dist_sq(p, query);
        if d2 < best.0 || (d2 == best.0 && node.point < best.1) {
            *best = (d2, node.point);
        }
        let delta = coord(query, node.axis) - coord(p, node.axis);
        let (near, far) = if delta < 0.0 { (node.left, node.right) } else { (node.right, node.left) };
        if let Some(n) = near {
            self.search(n, query, best);
        }
        // Visit the far side on exact plane-distance ties as well, so that
        // equal-distance candidates with smaller indices are never missed.
        if let Some(f) = far {
            if delta * delta <= best.0 {
                self.search(f, query, best);
            }
        }
    }

    /// Exact minimum distance from `query` to any indexed point.
    pub fn nearest_distance(&self, query: &Point3D) -> Result<f64, IndexError> {
        self.nearest(query).map(|n| n.distance).ok_or(IndexError::Empty)
    }
}

/// Linear-scan reference with the same arithmetic and tie-break rule.
/// Public so tests and the acceptance suite can compare against it.
pub fn linear_scan_nearest(points: &[Point3D], query: &Point3D) -> Option<Nearest> {
    let mut best: Option<(f64, usize)> = None;
    for (i, p) in points.iter().enumerate() {
        let d2 = dist_sq(p, query);
        match best {
            Some((bd, _)) if d2 >= bd => {}
            _ => best = Some((d2, i)),
        }
    }
    best.map(|(d2, i)| Nearest { index: i, point: points[i], distance: d2.sqrt() })
}
