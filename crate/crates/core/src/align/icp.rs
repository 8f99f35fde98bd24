use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::align::kabsch::{kabsch_points, RigidTransform};
use crate::align::kdtree::{query_all, KdTree};
use crate::error::{Error, Result};
use crate::geom::aabb::Aabb3;
use crate::geom::mesh::PointCloud;
use crate::geom::rotation::{rotation_angle_deg, RotationMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IcpConfig {
    pub max_iterations: usize,
    /// Stop once the RMSE improves by less than this between iterations.
    pub convergence_tol: f64,
    /// Correspondences farther apart than this are ignored; `null` in JSON
    /// means unbounded.
    #[serde(with = "unbounded")]
    pub max_correspondence_distance: f64,
    /// Fraction of the worst correspondences dropped each iteration.
    pub trim_fraction: f64,
}

mod unbounded {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_some(v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

impl Default for IcpConfig {
    fn default() -> Self {
        Self { max_iterations: 50, convergence_tol: 1e-6, max_correspondence_distance: f64::INFINITY, trim_fraction: 0.0 }
    }
}

impl IcpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::InvalidArgument("icp max_iterations must be at least 1".into()));
        }
        if !(self.convergence_tol > 0.0) {
            return Err(Error::InvalidArgument("icp convergence_tol must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.trim_fraction) {
            return Err(Error::InvalidArgument("icp trim_fraction must lie in [0, 1)".into()));
        }
        if !(self.max_correspondence_distance > 0.0) {
            return Err(Error::InvalidArgument("icp max_correspondence_distance must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IcpResult {
    /// Maps the source cloud onto the target.
    pub transform: RigidTransform,
    pub rmse: f64,
    pub iterations: usize,
    /// Correspondence RMSE observed at the start of every iteration, plus the
    /// final evaluation when the iteration cap was hit.
    pub rmse_trace: Vec<f64>,
    pub converged: bool,
    /// Set when a rigid fit failed and the best earlier estimate was returned.
    pub degenerate: bool,
}

struct Correspondences {
    src: Vec<Point3<f64>>,
    dst: Vec<Point3<f64>>,
    rmse: f64,
}

fn correspond(src: &[Point3<f64>], dst: &[Point3<f64>], tree: &KdTree, transform: &RigidTransform, config: &IcpConfig) -> Correspondences {
    let moved: Vec<Point3<f64>> = src.iter().map(|p| transform.apply(p)).collect();
    let nn = query_all(tree, &moved);
    let mut pairs: Vec<(f64, usize, usize)> = nn
        .iter()
        .enumerate()
        .filter(|(_, n)| n.distance <= config.max_correspondence_distance)
        .map(|(i, n)| (n.distance, i, n.index))
        .collect();
    if config.trim_fraction > 0.0 {
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let keep = ((1.0 - config.trim_fraction) * pairs.len() as f64).ceil() as usize;
        pairs.truncate(keep);
    }
    let rmse = if pairs.is_empty() { f64::INFINITY } else { (pairs.iter().map(|p| p.0 * p.0).sum::<f64>() / pairs.len() as f64).sqrt() };
    Correspondences { src: pairs.iter().map(|p| src[p.1]).collect(), dst: pairs.iter().map(|p| dst[p.2]).collect(), rmse }
}

/// Point-to-point ICP starting from the identity.
pub fn icp(src: &PointCloud, dst: &PointCloud, config: &IcpConfig) -> Result<IcpResult> {
    icp_from(src, dst, &RigidTransform::identity(), config)
}

/// Point-to-point ICP from an initial estimate. Without trimming or a
/// distance cap the correspondence RMSE never increases between iterations.
pub fn icp_from(src: &PointCloud, dst: &PointCloud, init: &RigidTransform, config: &IcpConfig) -> Result<IcpResult> {
    config.validate()?;
    if src.len() < 3 || dst.len() < 3 {
        return Err(Error::DegenerateConfiguration("icp needs at least 3 points per cloud".into()));
    }
    let tree = KdTree::build(dst.points())?;
    let (sp, dp) = (src.points(), dst.points());

    let mut current = *init;
    let mut best = (f64::INFINITY, current);
    let mut trace = Vec::new();
    let mut converged = false;
    let mut degenerate = false;
    let mut iterations = 0;
    let mut evaluated = false;

    for k in 1..=config.max_iterations {
        iterations = k;
        let corr = correspond(sp, dp, &tree, &current, config);
        let previous = trace.last().copied();
        trace.push(corr.rmse);
        if corr.rmse < best.0 {
            best = (corr.rmse, current);
        }
        evaluated = true;
        if corr.rmse == 0.0 || previous.is_some_and(|p| p - corr.rmse < config.convergence_tol) {
            converged = true;
            break;
        }
        match kabsch_points(&corr.src, &corr.dst) {
            Ok(next) => {
                current = next;
                evaluated = false;
            }
            Err(_) => {
                degenerate = true;
                break;
            }
        }
    }
    if !evaluated {
        let corr = correspond(sp, dp, &tree, &current, config);
        trace.push(corr.rmse);
        if corr.rmse < best.0 {
            best = (corr.rmse, current);
        }
    }
    Ok(IcpResult { transform: best.1, rmse: best.0, iterations, rmse_trace: trace, converged, degenerate })
}

/// Residual rotation, in degrees, that ICP needs to bring the predicted
/// rotated shape onto the ground-truth rotated shape.
///
/// Both posed clouds are centered on their centroids and share one scale
/// factor (the ground truth's longest extent mapped to 2) so that ICP only
/// has to resolve rotation.
pub fn icp_rotation_error(
    rot_pred: &RotationMatrix,
    rot_gt: &RotationMatrix,
    shape_pred: &PointCloud,
    shape_gt: &PointCloud,
    config: &IcpConfig,
) -> Result<f64> {
    let posed_pred = shape_pred.map(|p| Point3::from(rot_pred.apply(&p.coords)));
    let posed_gt = shape_gt.map(|p| Point3::from(rot_gt.apply(&p.coords)));
    let extent = Aabb3::from_points(posed_gt.points())?.extent().max();
    if !(extent > 0.0) {
        return Err(Error::ZeroExtent);
    }
    let scale = 2.0 / extent;
    let center = |c: &PointCloud| -> Result<PointCloud> {
        let m: Vector3<f64> = c.centroid().ok_or(Error::EmptyCloud)?.coords;
        Ok(c.map(|p| Point3::from((p.coords - m) * scale)))
    };
    let result = icp(&center(&posed_pred)?, &center(&posed_gt)?, config)?;
    Ok(rotation_angle_deg(&result.transform.rotation))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::rotation::random_rotation;
    use crate::rng::seeded;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn gaussian<R: Rng>(rng: &mut R) -> f64 {
        rng.sample(StandardNormal)
    }

    /// Anisotropic, skewed volume cloud without rotational symmetry.
    fn asymmetric_cloud(n: usize, seed: u64) -> PointCloud {
        let mut rng = seeded(seed);
        let pts: Vec<[f64; 3]> = (0..n)
            .map(|_| {
                let x: f64 = rng.random_range(-1.0..1.0);
                let y: f64 = rng.random_range(-0.6..0.6);
                let z: f64 = rng.random_range(-0.3..0.3);
                [x, y + 0.3 * x * x, z + 0.2 * x.max(0.0) * y]
            })
            .collect();
        PointCloud::from_xyz(&pts).unwrap()
    }

    fn transform(deg: f64, axis: Vector3<f64>, t: Vector3<f64>) -> RigidTransform {
        RigidTransform { rotation: RotationMatrix::from_axis_angle(&axis, deg.to_radians()), translation: t }
    }

    #[test]
    fn identical_clouds_converge_immediately() {
        let c = asymmetric_cloud(300, 1);
        let r = icp(&c, &c, &IcpConfig::default()).unwrap();
        assert_eq!(r.iterations, 1);
        assert_eq!(r.rmse, 0.0);
        assert_eq!(r.transform, RigidTransform::identity());
    }

    #[test]
    fn recovers_rotation_and_translation() {
        let src = asymmetric_cloud(500, 2);
        let truth = transform(20.0, Vector3::new(0.2, 1.0, 0.3), Vector3::new(0.1, 0.0, 0.0));
        let dst = truth.apply_cloud(&src);
        let config = IcpConfig { max_iterations: 200, convergence_tol: 1e-12, ..Default::default() };
        let r = icp(&src, &dst, &config).unwrap();
        let err = r.transform.rotation.transpose().compose(&truth.rotation);
        assert!(rotation_angle_deg(&err) < 0.1, "angle {}", rotation_angle_deg(&err));
        assert!((r.transform.translation - truth.translation).norm() < 1e-4);
        for w in r.rmse_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
    }

    #[test]
    fn noisy_target_reaches_noise_floor() {
        let src = asymmetric_cloud(1000, 3);
        let truth = transform(10.0, Vector3::z(), Vector3::new(0.05, -0.02, 0.0));
        let mut rng = seeded(4);
        let sigma = 0.01;
        let moved = truth.apply_cloud(&src);
        let dst = PointCloud::new(
            moved.points().iter().map(|p| p + Vector3::new(gaussian(&mut rng), gaussian(&mut rng), gaussian(&mut rng)) * sigma).collect(),
        )
        .unwrap();
        let r = icp(&src, &dst, &IcpConfig { max_iterations: 100, ..Default::default() }).unwrap();
        assert!(r.rmse <= 2.0 * sigma, "rmse {}", r.rmse);
    }

    #[test]
    fn rmse_never_increases() {
        let mut rng = seeded(5);
        for seed in 0..10 {
            let src = asymmetric_cloud(200, 10 + seed);
            let t = RigidTransform {
                rotation: RotationMatrix::from_axis_angle(
                    &Vector3::new(rng.random(), rng.random(), rng.random()),
                    rng.random_range(0.0..0.6),
                ),
                translation: Vector3::new(rng.random_range(-0.3..0.3), 0.0, 0.1),
            };
            let r = icp(&src, &t.apply_cloud(&src), &IcpConfig::default()).unwrap();
            for w in r.rmse_trace.windows(2) {
                assert!(w[1] <= w[0] + 1e-12, "{:?}", r.rmse_trace);
            }
        }
    }

    #[test]
    fn degenerate_fit_returns_best_so_far() {
        // tight distance cap leaves fewer than three correspondences
        let src = asymmetric_cloud(50, 6);
        let dst = src.map(|p| p + Vector3::new(5.0, 0.0, 0.0));
        let config = IcpConfig { max_correspondence_distance: 0.01, ..Default::default() };
        let r = icp(&src, &dst, &config).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.transform, RigidTransform::identity());
    }

    #[test]
    fn rotation_error_metric() {
        let shape = asymmetric_cloud(800, 7);
        let gt = random_rotation(&mut seeded(8));
        let config = IcpConfig { max_iterations: 200, convergence_tol: 1e-10, ..Default::default() };
        assert_eq!(icp_rotation_error(&gt, &gt, &shape, &shape, &config).unwrap(), 0.0);
        let off = RotationMatrix::from_axis_angle(&Vector3::z(), 15f64.to_radians()).compose(&gt);
        let err = icp_rotation_error(&off, &gt, &shape, &shape, &config).unwrap();
        assert!((err - 15.0).abs() < 0.5, "err {err}");
    }

    #[test]
    fn invalid_config_is_rejected() {
        let c = asymmetric_cloud(10, 9);
        for bad in [
            IcpConfig { max_iterations: 0, ..Default::default() },
            IcpConfig { convergence_tol: 0.0, ..Default::default() },
            IcpConfig { trim_fraction: 1.0, ..Default::default() },
        ] {
            assert!(icp(&c, &c, &bad).is_err());
        }
    }
}
