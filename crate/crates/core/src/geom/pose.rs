use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::mesh::{PointCloud, TriangleMesh};
use crate::geom::rotation::RotationMatrix;

/// Object-to-camera placement: `x' = R (s ⊙ x) + t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PoseRepr", into = "PoseRepr")]
pub struct Pose {
    rotation: RotationMatrix,
    translation: Vector3<f64>,
    scale: Vector3<f64>,
}

/// Serialized form: row-major rotation, translation, per-axis scale.
#[derive(Serialize, Deserialize)]
struct PoseRepr {
    rotation: [f64; 9],
    translation: [f64; 3],
    scale: [f64; 3],
}

impl TryFrom<PoseRepr> for Pose {
    type Error = Error;

    fn try_from(r: PoseRepr) -> Result<Self> {
        Pose::new(RotationMatrix::from_row_major(r.rotation)?, Vector3::from(r.translation), Vector3::from(r.scale))
    }
}

impl From<Pose> for PoseRepr {
    fn from(p: Pose) -> Self {
        PoseRepr { rotation: p.rotation.to_row_major(), translation: p.translation.into(), scale: p.scale.into() }
    }
}

impl Pose {
    pub fn new(rotation: RotationMatrix, translation: Vector3<f64>, scale: Vector3<f64>) -> Result<Self> {
        if !translation.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidPose("translation is not finite".into()));
        }
        if !scale.iter().all(|s| s.is_finite() && *s > 0.0) {
            return Err(Error::InvalidPose(format!("scale must be positive, got {scale:?}")));
        }
        Ok(Self { rotation, translation, scale })
    }

    pub fn identity() -> Self {
        Self { rotation: RotationMatrix::identity(), translation: Vector3::zeros(), scale: Vector3::repeat(1.0) }
    }

    pub fn rotation(&self) -> &RotationMatrix {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn scale(&self) -> &Vector3<f64> {
        &self.scale
    }

    pub fn with_translation(&self, translation: Vector3<f64>) -> Result<Self> {
        Self::new(self.rotation, translation, self.scale)
    }

    pub fn with_scale(&self, scale: Vector3<f64>) -> Result<Self> {
        Self::new(self.rotation, self.translation, scale)
    }

    pub fn with_rotation(&self, rotation: RotationMatrix) -> Self {
        Self { rotation, ..*self }
    }

    pub fn transform_point(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::from(self.rotation.apply(&p.coords.component_mul(&self.scale)) + self.translation)
    }

    /// Inverse placement. Only representable in scale-rotate-translate form
    /// when the scale is uniform.
    pub fn inverse(&self) -> Result<Self> {
        let s = self.scale.x;
        if (self.scale.y - s).abs() > 1e-12 * s || (self.scale.z - s).abs() > 1e-12 * s {
            return Err(Error::InvalidPose("inverse requires uniform scale".into()));
        }
        let rt = self.rotation.transpose();
        Self::new(rt, -rt.apply(&self.translation) / s, Vector3::repeat(1.0 / s))
    }
}

/// Geometry that can be placed by a [`Pose`].
pub trait Posable {
    fn posed(&self, pose: &Pose) -> Self;
}

impl Posable for PointCloud {
    fn posed(&self, pose: &Pose) -> Self {
        self.map(|p| pose.transform_point(p))
    }
}

impl Posable for TriangleMesh {
    fn posed(&self, pose: &Pose) -> Self {
        self.map_vertices(|p| pose.transform_point(p))
    }
}

pub fn apply_pose<G: Posable>(geometry: &G, pose: &Pose) -> G {
    geometry.posed(pose)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::aabb::aabb;
    use crate::geom::rotation::random_rotation;
    use crate::rng::seeded;
    use rand::Rng;

    #[test]
    fn identity_pose_is_noop() {
        let c = PointCloud::from_xyz(&[[0.1, 0.2, 0.3], [-4.0, 5.0, 6.0]]).unwrap();
        assert_eq!(apply_pose(&c, &Pose::identity()), c);
    }

    #[test]
    fn uniform_scale_doubles_cube() {
        let pose = Pose::new(RotationMatrix::identity(), Vector3::zeros(), Vector3::repeat(2.0)).unwrap();
        let cube = TriangleMesh::cube(1.0);
        let b = aabb(&apply_pose(&cube, &pose).vertex_cloud()).unwrap();
        assert_eq!(b.extent(), Vector3::repeat(2.0));
    }

    #[test]
    fn inverse_round_trip() {
        let mut rng = seeded(3);
        let cloud = PointCloud::from_xyz(&[[0.3, -0.2, 1.0], [2.0, 0.0, -1.0], [0.0, 0.0, 0.0]]).unwrap();
        for _ in 0..50 {
            let s = rng.random_range(0.2..5.0);
            let t = Vector3::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
            let pose = Pose::new(random_rotation(&mut rng), t, Vector3::repeat(s)).unwrap();
            let back = apply_pose(&apply_pose(&cloud, &pose), &pose.inverse().unwrap());
            for (a, b) in back.points().iter().zip(cloud.points()) {
                assert!((a - b).norm() <= 1e-9);
            }
        }
    }

    #[test]
    fn scale_is_applied_before_rotation() {
        let rz = RotationMatrix::from_axis_angle(&Vector3::z(), std::f64::consts::FRAC_PI_2);
        let pose = Pose::new(rz, Vector3::zeros(), Vector3::new(2.0, 1.0, 1.0)).unwrap();
        let p = pose.transform_point(&Point3::new(1.0, 0.0, 0.0));
        assert!((p - Point3::new(0.0, 2.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn rejects_non_positive_scale() {
        assert!(Pose::new(RotationMatrix::identity(), Vector3::zeros(), Vector3::new(1.0, 0.0, 1.0)).is_err());
        let anisotropic = Pose::new(RotationMatrix::identity(), Vector3::zeros(), Vector3::new(1.0, 2.0, 1.0)).unwrap();
        assert!(anisotropic.inverse().is_err());
    }
}
