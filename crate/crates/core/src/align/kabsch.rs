use nalgebra::{Matrix3, Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::mesh::PointCloud;
use crate::geom::rotation::RotationMatrix;

/// `x' = R x + t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidTransform {
    pub rotation: RotationMatrix,
    pub translation: Vector3<f64>,
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self { rotation: RotationMatrix::identity(), translation: Vector3::zeros() }
    }

    pub fn apply(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::from(self.rotation.apply(&p.coords) + self.translation)
    }

    pub fn apply_cloud(&self, cloud: &PointCloud) -> PointCloud {
        cloud.map(|p| self.apply(p))
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self { rotation: rt, translation: -rt.apply(&self.translation) }
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &RigidTransform) -> Self {
        Self { rotation: self.rotation.compose(&other.rotation), translation: self.rotation.apply(&other.translation) + self.translation }
    }
}

/// Relative threshold on the second singular value of the centered source
/// below which the configuration counts as collinear.
const COLLINEAR_TOL: f64 = 1e-10;

/// Least-squares proper rotation and translation mapping `src[i]` onto
/// `dst[i]`.
pub fn kabsch(src: &PointCloud, dst: &PointCloud) -> Result<RigidTransform> {
    kabsch_points(src.points(), dst.points())
}

pub(crate) fn kabsch_points(src: &[Point3<f64>], dst: &[Point3<f64>]) -> Result<RigidTransform> {
    if src.len() != dst.len() {
        return Err(Error::SizeMismatch(format!("{} source vs {} target points", src.len(), dst.len())));
    }
    if src.len() < 3 {
        return Err(Error::DegenerateConfiguration("kabsch needs at least 3 point pairs".into()));
    }
    let n = src.len() as f64;
    let cs = src.iter().fold(Vector3::zeros(), |a, p| a + p.coords) / n;
    let cd = dst.iter().fold(Vector3::zeros(), |a, p| a + p.coords) / n;
    let mut h = Matrix3::zeros();
    let mut spread = Matrix3::zeros();
    for (s, d) in src.iter().zip(dst) {
        let a = s.coords - cs;
        let b = d.coords - cd;
        h += a * b.transpose();
        spread += a * a.transpose();
    }
    let sv = spread.symmetric_eigenvalues();
    let mut sorted = [sv[0], sv[1], sv[2]];
    sorted.sort_by(|a, b| b.total_cmp(a));
    if !(sorted[0] > 0.0) || sorted[1] <= COLLINEAR_TOL * sorted[0] {
        return Err(Error::DegenerateConfiguration("source points are collinear".into()));
    }
    let svd = h.svd(true, true);
    let u = svd.u.unwrap();
    let v_t = svd.v_t.unwrap();
    let v = v_t.transpose();
    let d = (v * u.transpose()).determinant().signum();
    let fix = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, if d == 0.0 { 1.0 } else { d }));
    let r = v * fix * u.transpose();
    let rotation = RotationMatrix::renormalized(&r)?;
    let translation = cd - rotation.apply(&cs);
    Ok(RigidTransform { rotation, translation })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::rotation::rotation_angle_deg;
    use crate::rng::seeded;
    use rand::Rng;

    fn random_cloud(n: usize, seed: u64) -> PointCloud {
        let mut rng = seeded(seed);
        let pts: Vec<[f64; 3]> = (0..n).map(|_| std::array::from_fn(|_| rng.random_range(-1.0..1.0))).collect();
        PointCloud::from_xyz(&pts).unwrap()
    }

    #[test]
    fn identical_clouds_give_identity() {
        let c = random_cloud(20, 1);
        let t = kabsch(&c, &c).unwrap();
        assert!((t.rotation.matrix() - Matrix3::identity()).abs().max() < 1e-12);
        assert!(t.translation.norm() < 1e-12);
    }

    #[test]
    fn recovers_constructed_rotation() {
        let c = random_cloud(50, 2);
        let truth = RigidTransform {
            rotation: RotationMatrix::from_axis_angle(&Vector3::z(), 30f64.to_radians()),
            translation: Vector3::new(0.3, -0.1, 2.0),
        };
        let t = kabsch(&c, &truth.apply_cloud(&c)).unwrap();
        assert!((t.rotation.matrix() - truth.rotation.matrix()).abs().max() < 1e-9);
        assert!((t.translation - truth.translation).norm() < 1e-9);
    }

    #[test]
    fn mirrored_target_yields_proper_rotation() {
        let c = random_cloud(30, 3);
        let mirrored = c.map(|p| Point3::new(-p.x, p.y, p.z));
        let t = kabsch(&c, &mirrored).unwrap();
        assert!((t.rotation.matrix().determinant() - 1.0).abs() < 1e-9);
        let residual: f64 = c.points().iter().zip(mirrored.points()).map(|(s, d)| (t.apply(s) - d).norm_squared()).sum();
        assert!(residual > 1e-3);
        assert!(rotation_angle_deg(&t.rotation).is_finite());
    }

    #[test]
    fn collinear_points_are_rejected() {
        let line = PointCloud::from_xyz(&[[0.0; 3], [1.0, 1.0, 1.0], [2.0, 2.0, 2.0], [3.0, 3.0, 3.0]]).unwrap();
        assert!(matches!(kabsch(&line, &line), Err(Error::DegenerateConfiguration(_))));
        let two = PointCloud::from_xyz(&[[0.0; 3], [1.0, 0.0, 0.0]]).unwrap();
        assert!(kabsch(&two, &two).is_err());
    }
}
