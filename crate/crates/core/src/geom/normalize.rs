use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::aabb::Aabb3;
use crate::geom::mesh::PointCloud;

/// Uniform scale about a center: `x' = (x - center) * scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityTransform {
    pub center: Vector3<f64>,
    pub scale: f64,
}

impl SimilarityTransform {
    pub fn apply(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::from((p.coords - self.center) * self.scale)
    }

    pub fn invert(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::from(p.coords / self.scale + self.center)
    }

    pub fn apply_cloud(&self, cloud: &PointCloud) -> PointCloud {
        cloud.map(|p| self.apply(p))
    }

    pub fn invert_cloud(&self, cloud: &PointCloud) -> PointCloud {
        cloud.map(|p| self.invert(p))
    }
}

/// Centers the bounding box at the origin and scales uniformly so the
/// longest axis spans exactly `[-1, 1]`.
pub fn normalize_unit_cube(points: &PointCloud) -> Result<(PointCloud, SimilarityTransform)> {
    let bounds = Aabb3::from_points(points.points())?;
    let longest = bounds.extent().max();
    if !(longest > 0.0) {
        return Err(Error::ZeroExtent);
    }
    let transform = SimilarityTransform { center: bounds.center().coords, scale: 2.0 / longest };
    Ok((transform.apply_cloud(points), transform))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::aabb::aabb;

    fn corners(min: [f64; 3], max: [f64; 3]) -> PointCloud {
        PointCloud::from_xyz(&[min, max, [min[0], max[1], min[2]]]).unwrap()
    }

    #[test]
    fn cube_zero_to_two() {
        let (out, t) = normalize_unit_cube(&corners([0.0; 3], [2.0; 3])).unwrap();
        assert_eq!(t.scale, 1.0);
        assert_eq!(t.center, Vector3::repeat(1.0));
        let b = aabb(&out).unwrap();
        assert_eq!(b.min, Point3::new(-1.0, -1.0, -1.0));
        assert_eq!(b.max, Point3::new(1.0, 1.0, 1.0));
    }

    #[test]
    fn aspect_is_preserved() {
        let (out, _) = normalize_unit_cube(&corners([0.0; 3], [4.0, 2.0, 2.0])).unwrap();
        let b = aabb(&out).unwrap();
        assert_eq!(b.min, Point3::new(-1.0, -0.5, -0.5));
        assert_eq!(b.max, Point3::new(1.0, 0.5, 0.5));
    }

    #[test]
    fn inversion_and_idempotence() {
        let cloud = PointCloud::from_xyz(&[[0.3, 7.0, -2.0], [1.1, 3.3, 5.0], [-4.0, 0.2, 0.1]]).unwrap();
        let (out, t) = normalize_unit_cube(&cloud).unwrap();
        for (a, b) in t.invert_cloud(&out).points().iter().zip(cloud.points()) {
            assert!((a - b).norm() <= 1e-12);
        }
        let (twice, _) = normalize_unit_cube(&out).unwrap();
        for (a, b) in twice.points().iter().zip(out.points()) {
            assert!((a - b).norm() <= 1e-12);
        }
    }

    #[test]
    fn coincident_points_error() {
        let cloud = PointCloud::from_xyz(&[[1.0, 1.0, 1.0], [1.0, 1.0, 1.0]]).unwrap();
        assert_eq!(normalize_unit_cube(&cloud).unwrap_err(), Error::ZeroExtent);
    }
}
