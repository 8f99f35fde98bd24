//! End-to-end shape and layout evaluation of a predicted mesh against a
//! reference mesh.
//!
//! Shape pipeline:
//! 1. sample both surfaces with the same seed,
//! 2. coarse rotation search (optional, on by default): multi-start ICP on
//!    centroid-centered, RMS-scaled subsamples, seeded from the identity,
//!    principal-axis alignments and the 24 axis-aligned rotations,
//! 3. normalize each cloud independently into `[-1, 1]^3`,
//! 4. identity-initialized ICP of prediction onto reference,
//! 5. F-score, voxel IoU, Chamfer, and EMD on a seeded subsample.

use nalgebra::{Matrix3, Point3, Vector3};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::align::icp::{icp, icp_from, icp_rotation_error, IcpConfig};
use crate::align::kabsch::RigidTransform;
use crate::error::{Error, Result};
use crate::geom::aabb::Aabb3;
use crate::geom::mesh::{PointCloud, TriangleMesh};
use crate::geom::normalize::normalize_unit_cube;
use crate::geom::pose::{apply_pose, Pose};
use crate::geom::rotation::RotationMatrix;
use crate::geom::sample::sample_surface;
use crate::metrics::emd::{emd_exact_with_cap, DEFAULT_EMD_CAP};
use crate::metrics::layout::{aabb_iou_3d, add_s, add_s_at, ADD_S_THRESHOLD};
use crate::metrics::shape::{chamfer, fscore, voxel_iou, F1_THRESHOLD, VOXEL_RESOLUTION};
use crate::rng::derive;

pub const CHAMFER_CONVENTION: &str = "0.5*(mean_nn(pred,gt)+mean_nn(gt,pred)), unsquared euclidean";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShapeEvalConfig {
    pub n_points: usize,
    pub emd_subsample: usize,
    pub seed: u64,
    pub f1_threshold: f64,
    pub voxel_resolution: usize,
    pub icp: IcpConfig,
    pub coarse_align: bool,
    /// Subsample size used by the coarse rotation search.
    pub coarse_points: usize,
    pub coarse_iterations: usize,
}

impl Default for ShapeEvalConfig {
    fn default() -> Self {
        Self {
            n_points: 1_000_000,
            emd_subsample: 1024,
            seed: 0,
            f1_threshold: F1_THRESHOLD,
            voxel_resolution: VOXEL_RESOLUTION,
            icp: IcpConfig::default(),
            coarse_align: true,
            coarse_points: 400,
            coarse_iterations: 30,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeMetadata {
    pub n_pred: usize,
    pub n_gt: usize,
    pub emd_points: usize,
    pub threshold: f64,
    pub voxel_resolution: usize,
    pub seed: u64,
    pub icp_rmse: f64,
    pub icp_iterations: usize,
    pub chamfer_convention: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeReport {
    #[serde(rename = "f1")]
    pub f1_at_threshold: f64,
    pub precision: f64,
    pub recall: f64,
    #[serde(rename = "viou")]
    pub voxel_iou: f64,
    pub chamfer: f64,
    pub emd: f64,
    pub metadata: ShapeMetadata,
}

/// Report plus the clouds the metrics were computed on.
#[derive(Debug, Clone)]
pub struct ShapeEvaluation {
    pub report: ShapeReport,
    pub pred_aligned: PointCloud,
    pub gt_normalized: PointCloud,
}

pub fn eval_shape(pred: &TriangleMesh, gt: &TriangleMesh, config: &ShapeEvalConfig) -> Result<ShapeReport> {
    eval_shape_detailed(pred, gt, config).map(|e| e.report)
}

pub fn eval_shape_detailed(pred: &TriangleMesh, gt: &TriangleMesh, config: &ShapeEvalConfig) -> Result<ShapeEvaluation> {
    let pred_cloud = sample_surface(pred, config.n_points, config.seed)?;
    let gt_cloud = sample_surface(gt, config.n_points, config.seed)?;
    eval_shape_clouds(&pred_cloud, &gt_cloud, config)
}

/// Shape pipeline from step 2 onward, for callers that already hold
/// surface samples.
pub fn eval_shape_clouds(pred_cloud: &PointCloud, gt_cloud: &PointCloud, config: &ShapeEvalConfig) -> Result<ShapeEvaluation> {
    let pred_cloud = if config.coarse_align {
        let r = coarse_rotation(pred_cloud, gt_cloud, config)?;
        let c = pred_cloud.centroid().ok_or(Error::EmptyCloud)?.coords;
        pred_cloud.map(|p| Point3::from(r.apply(&(p.coords - c)) + c))
    } else {
        pred_cloud.clone()
    };
    let (pred_n, _) = normalize_unit_cube(&pred_cloud)?;
    let (gt_n, _) = normalize_unit_cube(gt_cloud)?;
    let fit = icp(&pred_n, &gt_n, &config.icp)?;
    let aligned = fit.transform.apply_cloud(&pred_n);

    let f = fscore(&aligned, &gt_n, config.f1_threshold)?;
    let viou = voxel_iou(&aligned, &gt_n, config.voxel_resolution)?;
    let cd = chamfer(&aligned, &gt_n)?;
    let m = config.emd_subsample.min(aligned.len()).min(gt_n.len());
    let emd = if m == 0 {
        0.0
    } else {
        let pick = |cloud: &PointCloud| {
            let mut idx: Vec<usize> = (0..cloud.len()).collect();
            idx.shuffle(&mut derive(config.seed, 1));
            idx.truncate(m);
            cloud.select(&idx)
        };
        emd_exact_with_cap(&pick(&aligned), &pick(&gt_n), DEFAULT_EMD_CAP.max(m))?.0
    };

    let report = ShapeReport {
        f1_at_threshold: f.f1,
        precision: f.precision,
        recall: f.recall,
        voxel_iou: viou,
        chamfer: cd,
        emd,
        metadata: ShapeMetadata {
            n_pred: aligned.len(),
            n_gt: gt_n.len(),
            emd_points: m,
            threshold: config.f1_threshold,
            voxel_resolution: config.voxel_resolution,
            seed: config.seed,
            icp_rmse: fit.rmse,
            icp_iterations: fit.iterations,
            chamfer_convention: CHAMFER_CONVENTION.into(),
        },
    };
    Ok(ShapeEvaluation { report, pred_aligned: aligned, gt_normalized: gt_n })
}

/// The 24 proper rotations that permute and flip the coordinate axes.
pub fn axis_rotations() -> Vec<RotationMatrix> {
    let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut out = Vec::with_capacity(24);
    for p in perms {
        for signs in 0..8u8 {
            let mut m = Matrix3::zeros();
            for (row, &col) in p.iter().enumerate() {
                m[(row, col)] = if signs >> row & 1 == 1 { -1.0 } else { 1.0 };
            }
            if let Ok(r) = RotationMatrix::new(m) {
                out.push(r);
            }
        }
    }
    out
}

/// Principal axes as columns of a proper rotation (largest variance first).
fn principal_frame(points: &[Point3<f64>]) -> Option<Matrix3<f64>> {
    let n = points.len() as f64;
    let c = points.iter().fold(Vector3::zeros(), |a, p| a + p.coords) / n;
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = p.coords - c;
        cov += d * d.transpose();
    }
    let eig = (cov / n).symmetric_eigen();
    let mut order = [0, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut m = Matrix3::from_columns(&[
        eig.eigenvectors.column(order[0]).into_owned(),
        eig.eigenvectors.column(order[1]).into_owned(),
        eig.eigenvectors.column(order[2]).into_owned(),
    ]);
    if m.determinant() < 0.0 {
        m.set_column(2, &(-m.column(2)));
    }
    m.iter().all(|v| v.is_finite()).then_some(m)
}

fn centered_scaled(cloud: &PointCloud) -> Result<PointCloud> {
    let c = cloud.centroid().ok_or(Error::EmptyCloud)?.coords;
    let rms = (cloud.points().iter().map(|p| (p.coords - c).norm_squared()).sum::<f64>() / cloud.len() as f64).sqrt();
    if !(rms > 0.0) {
        return Err(Error::ZeroExtent);
    }
    Ok(cloud.map(|p| Point3::from((p.coords - c) / rms)))
}

/// Rotation (about the prediction's centroid) that best aligns the
/// prediction with the reference, chosen by multi-start ICP.
pub fn coarse_rotation(pred: &PointCloud, gt: &PointCloud, config: &ShapeEvalConfig) -> Result<RotationMatrix> {
    let subsample = |cloud: &PointCloud, stream: u64| -> Result<PointCloud> {
        let mut idx: Vec<usize> = (0..cloud.len()).collect();
        idx.shuffle(&mut derive(config.seed, stream));
        idx.truncate(config.coarse_points.max(3));
        centered_scaled(&cloud.select(&idx))
    };
    let src = subsample(pred, 11)?;
    let dst = subsample(gt, 11)?;

    let mut starts = vec![RotationMatrix::identity()];
    if let (Some(fp), Some(fg)) = (principal_frame(src.points()), principal_frame(dst.points())) {
        for flip in [[1.0, 1.0, 1.0], [1.0, -1.0, -1.0], [-1.0, 1.0, -1.0], [-1.0, -1.0, 1.0]] {
            let d = Matrix3::from_diagonal(&Vector3::from(flip));
            if let Ok(r) = RotationMatrix::renormalized(&(fg * d * fp.transpose())) {
                starts.push(r);
            }
        }
    }
    starts.extend(axis_rotations());

    let coarse = IcpConfig { max_iterations: config.coarse_iterations.max(1), convergence_tol: 1e-7, ..Default::default() };
    let mut best: Option<(f64, RotationMatrix)> = None;
    for start in starts {
        let init = RigidTransform { rotation: start, translation: Vector3::zeros() };
        let fit = icp_from(&src, &dst, &init, &coarse)?;
        if best.as_ref().is_none_or(|b| fit.rmse < b.0) {
            best = Some((fit.rmse, fit.transform.rotation));
        }
    }
    Ok(best.map(|b| b.1).unwrap_or_else(RotationMatrix::identity))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LayoutEvalConfig {
    pub n_points: usize,
    pub seed: u64,
    pub icp: IcpConfig,
    pub add_s_threshold: f64,
}

impl Default for LayoutEvalConfig {
    fn default() -> Self {
        Self { n_points: 5000, seed: 0, icp: IcpConfig::default(), add_s_threshold: ADD_S_THRESHOLD }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutReport {
    pub iou3d: f64,
    pub icp_rot_deg: f64,
    pub add_s: f64,
    #[serde(rename = "add_s_at_01")]
    pub add_s_at: bool,
}

/// Layout metrics for a predicted shape+pose against the reference.
///
/// 3D IoU uses the axis-aligned boxes of the posed mesh vertices, which
/// bound the posed surface exactly.
pub fn eval_layout(
    pred: &TriangleMesh,
    pred_pose: &Pose,
    gt: &TriangleMesh,
    gt_pose: &Pose,
    config: &LayoutEvalConfig,
) -> Result<LayoutReport> {
    let box_pred = Aabb3::from_points(apply_pose(pred, pred_pose).vertices())?;
    let box_gt = Aabb3::from_points(apply_pose(gt, gt_pose).vertices())?;
    let iou3d = aabb_iou_3d(&box_pred, &box_gt).value;

    let pred_cloud = sample_surface(pred, config.n_points, config.seed)?;
    let gt_cloud = sample_surface(gt, config.n_points, config.seed)?;
    let scaled = |c: &PointCloud, pose: &Pose| c.map(|p| Point3::from(p.coords.component_mul(pose.scale())));
    let icp_rot_deg = icp_rotation_error(
        pred_pose.rotation(),
        gt_pose.rotation(),
        &scaled(&pred_cloud, pred_pose),
        &scaled(&gt_cloud, gt_pose),
        &config.icp,
    )?;
    let add_s = add_s(&apply_pose(&pred_cloud, pred_pose), &apply_pose(&gt_cloud, gt_pose))?;
    Ok(LayoutReport { iou3d, icp_rot_deg, add_s, add_s_at: add_s_at(add_s, config.add_s_threshold) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::rotation::rotation_angle_deg;

    fn small(n: usize) -> ShapeEvalConfig {
        ShapeEvalConfig { n_points: n, emd_subsample: 256, ..Default::default() }
    }

    #[test]
    fn self_comparison_is_perfect() {
        let cube = TriangleMesh::cube(1.0);
        let r = eval_shape(&cube, &cube, &small(2000)).unwrap();
        assert_eq!(r.f1_at_threshold, 1.0);
        assert_eq!(r.voxel_iou, 1.0);
        assert!(r.chamfer < 1e-12);
        assert!(r.emd < 1e-12);
    }

    #[test]
    fn rotated_copy_matches_unrotated() {
        // extents chosen so no face lies on a voxel boundary
        let shape = TriangleMesh::cuboid(Point3::new(-1.0, -0.53, -0.27), Point3::new(0.9, 0.41, 0.23));
        let rot = RotationMatrix::from_axis_angle(&Vector3::new(0.3, 0.2, 1.0), 45f64.to_radians());
        let moved = shape.map_vertices(|p| Point3::from(rot.apply(&p.coords) + Vector3::new(3.0, -1.0, 0.5)));
        let config = small(3000);
        let base = eval_shape(&shape, &shape, &config).unwrap();
        let r = eval_shape(&moved, &shape, &config).unwrap();
        assert!((r.f1_at_threshold - base.f1_at_threshold).abs() <= 1e-3);
        assert!((r.voxel_iou - base.voxel_iou).abs() <= 1e-3, "{}", r.voxel_iou);
        assert!(r.chamfer <= 1e-3);
        assert!(r.emd <= 1e-3);
    }

    #[test]
    fn axis_rotation_group_has_24_members() {
        let rs = axis_rotations();
        assert_eq!(rs.len(), 24);
        assert!(rs.iter().any(|r| rotation_angle_deg(r) == 0.0));
    }

    #[test]
    fn layout_identity() {
        let cube = TriangleMesh::cube(1.0);
        let pose = Pose::new(
            RotationMatrix::from_axis_angle(&Vector3::new(1.0, 2.0, 0.5), 0.7),
            Vector3::new(0.1, 0.2, 3.0),
            Vector3::new(1.0, 1.5, 0.5),
        )
        .unwrap();
        let r = eval_layout(&cube, &pose, &cube, &pose, &LayoutEvalConfig { n_points: 1000, ..Default::default() }).unwrap();
        assert_eq!(r.iou3d, 1.0);
        assert_eq!(r.icp_rot_deg, 0.0);
        assert_eq!(r.add_s, 0.0);
        assert!(r.add_s_at);
    }

    #[test]
    fn doubled_scale_cube_has_one_eighth_iou() {
        let cube = TriangleMesh::cube(1.0);
        let gt = Pose::identity();
        let pred = gt.with_scale(Vector3::repeat(2.0)).unwrap();
        let r = eval_layout(&cube, &pred, &cube, &gt, &LayoutEvalConfig { n_points: 500, ..Default::default() }).unwrap();
        assert!((r.iou3d - 0.125).abs() < 1e-15);
    }
}
