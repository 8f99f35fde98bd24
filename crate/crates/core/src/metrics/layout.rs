use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::align::kdtree::{query_all, KdTree};
use crate::error::{Error, Result};
use crate::geom::aabb::Aabb3;
use crate::geom::mesh::PointCloud;

/// ADD-S success threshold as a fraction of the object diameter (strict).
pub const ADD_S_THRESHOLD: f64 = 0.1;

/// Largest pairwise distance within the cloud.
pub fn diameter(cloud: &PointCloud) -> Result<f64> {
    let pts = cloud.points();
    if pts.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let best2 = (0..pts.len())
        .into_par_iter()
        .map(|i| pts[i + 1..].iter().map(|q| (pts[i] - q).norm_squared()).fold(0.0, f64::max))
        .reduce(|| 0.0, f64::max);
    Ok(best2.sqrt())
}

fn add(a: &PointCloud, b: &PointCloud) -> Result<f64> {
    if a.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let tree = KdTree::build(b.points())?;
    let d = query_all(&tree, a.points());
    Ok(d.iter().map(|n| n.distance).sum::<f64>() / d.len() as f64)
}

/// Symmetrized ADD between posed clouds, normalized by the ground-truth
/// diameter: `(ADD(pred, gt) + ADD(gt, pred)) / (2 d)`.
pub fn add_s(pred_posed: &PointCloud, gt_posed: &PointCloud) -> Result<f64> {
    let d = diameter(gt_posed)?;
    if !(d > 0.0) {
        return Err(Error::DegenerateConfiguration("ground-truth diameter is zero".into()));
    }
    Ok((add(pred_posed, gt_posed)? + add(gt_posed, pred_posed)?) / (2.0 * d))
}

/// `value < threshold`.
pub fn add_s_at(value: f64, threshold: f64) -> bool {
    value < threshold
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxIou {
    pub value: f64,
    /// Both boxes have zero volume, so the ratio is undefined and reported as 0.
    pub degenerate: bool,
}

pub fn aabb_iou_3d(a: &Aabb3, b: &Aabb3) -> BoxIou {
    let inter = a.intersection(b).map(|i| i.volume()).unwrap_or(0.0);
    let union = a.volume() + b.volume() - inter;
    if union <= 0.0 {
        return BoxIou { value: 0.0, degenerate: true };
    }
    BoxIou { value: inter / union, degenerate: false }
}
