use serde::{Deserialize, Serialize};

use crate::align::kdtree::{query_all, KdTree};
use crate::error::{Error, Result};
use crate::geom::aabb::Aabb3;
use crate::geom::mesh::PointCloud;
use crate::geom::voxel::{voxelize_with, VoxelMode};

/// Distance threshold for the F-score, in normalized `[-1, 1]` units.
pub const F1_THRESHOLD: f64 = 0.01;
/// Occupancy grid resolution for voxel IoU.
pub const VOXEL_RESOLUTION: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn nn_distances(query: &PointCloud, target: &PointCloud) -> Result<Vec<f64>> {
    if query.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let tree = KdTree::build(target.points())?;
    Ok(query_all(&tree, query.points()).into_iter().map(|n| n.distance).collect())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// A point matches when its nearest neighbour in the other set lies within
/// `threshold` (inclusive).
pub fn fscore(pred: &PointCloud, gt: &PointCloud, threshold: f64) -> Result<FScore> {
    let to_gt = nn_distances(pred, gt)?;
    let to_pred = nn_distances(gt, pred)?;
    let frac = |d: &[f64]| d.iter().filter(|&&x| x <= threshold).count() as f64 / d.len() as f64;
    let precision = frac(&to_gt);
    let recall = frac(&to_pred);
    let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
    Ok(FScore { precision, recall, f1 })
}

/// Symmetric Chamfer distance: `0.5 * (mean d(pred→gt) + mean d(gt→pred))`
/// with unsquared Euclidean distances.
pub fn chamfer(pred: &PointCloud, gt: &PointCloud) -> Result<f64> {
    let a = nn_distances(pred, gt)?;
    let b = nn_distances(gt, pred)?;
    Ok(0.5 * (mean(&a) + mean(&b)))
}

/// IoU of the occupancy grids over `[-1, 1]^3`. Points slightly outside the
/// domain (e.g. after alignment) are clamped into the boundary cells.
pub fn voxel_iou(pred: &PointCloud, gt: &PointCloud, resolution: usize) -> Result<f64> {
    if pred.is_empty() || gt.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let domain = Aabb3::unit_domain();
    let a = voxelize_with(pred, resolution, domain, VoxelMode::Lenient)?;
    let b = voxelize_with(gt, resolution, domain, VoxelMode::Lenient)?;
    let union = a.union_count(&b)?;
    Ok(a.intersection_count(&b)? as f64 / union as f64)
}
