use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::mesh::PointCloud;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb3 {
    pub min: Point3<f64>,
    pub max: Point3<f64>,
}

impl Aabb3 {
    pub fn new(min: Point3<f64>, max: Point3<f64>) -> Result<Self> {
        if (0..3).any(|i| min[i] > max[i]) {
            return Err(Error::InvalidArgument("aabb min exceeds max".into()));
        }
        Ok(Self { min, max })
    }

    /// The canonical voxel domain `[-1, 1]^3`.
    pub fn unit_domain() -> Self {
        Self { min: Point3::new(-1.0, -1.0, -1.0), max: Point3::new(1.0, 1.0, 1.0) }
    }

    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a Point3<f64>>) -> Result<Self> {
        let mut it = points.into_iter();
        let first = it.next().ok_or(Error::EmptyCloud)?;
        let (mut min, mut max) = (*first, *first);
        for p in it {
            for i in 0..3 {
                min[i] = min[i].min(p[i]);
                max[i] = max[i].max(p[i]);
            }
        }
        Ok(Self { min, max })
    }

    pub fn extent(&self) -> Vector3<f64> {
        self.max - self.min
    }

    pub fn center(&self) -> Point3<f64> {
        nalgebra::center(&self.min, &self.max)
    }

    pub fn volume(&self) -> f64 {
        let e = self.extent();
        e.x * e.y * e.z
    }

    pub fn diagonal(&self) -> f64 {
        self.extent().norm()
    }

    pub fn union(&self, other: &Aabb3) -> Aabb3 {
        Aabb3 { min: self.min.inf(&other.min), max: self.max.sup(&other.max) }
    }

    /// Overlap box, or `None` when the boxes are disjoint.
    pub fn intersection(&self, other: &Aabb3) -> Option<Aabb3> {
        let min = self.min.sup(&other.min);
        let max = self.max.inf(&other.max);
        ((0..3).all(|i| min[i] <= max[i])).then_some(Aabb3 { min, max })
    }

    pub fn contains_box(&self, other: &Aabb3) -> bool {
        (0..3).all(|i| self.min[i] <= other.min[i] && other.max[i] <= self.max[i])
    }

    pub fn contains(&self, p: &Point3<f64>) -> bool {
        (0..3).all(|i| self.min[i] <= p[i] && p[i] <= self.max[i])
    }
}

/// Component-wise bounds of a point cloud.
pub fn aabb(points: &PointCloud) -> Result<Aabb3> {
    Aabb3::from_points(points.points())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_points() {
        let c = PointCloud::from_xyz(&[[0.0, 0.0, 0.0], [1.0, 2.0, 3.0]]).unwrap();
        let b = aabb(&c).unwrap();
        assert_eq!(b.min, Point3::origin());
        assert_eq!(b.max, Point3::new(1.0, 2.0, 3.0));
    }

    #[test]
    fn single_point_is_degenerate_box() {
        let c = PointCloud::from_xyz(&[[0.5, -1.0, 2.0]]).unwrap();
        let b = aabb(&c).unwrap();
        assert_eq!(b.min, b.max);
        assert_eq!(b.volume(), 0.0);
    }

    #[test]
    fn empty_cloud_errors() {
        let c = PointCloud::new(vec![]).unwrap();
        assert_eq!(aabb(&c), Err(Error::EmptyCloud));
    }

    #[test]
    fn union_contains_parts() {
        let a = PointCloud::from_xyz(&[[0.0, 0.0, 0.0], [1.0, 1.0, 1.0]]).unwrap();
        let b = PointCloud::from_xyz(&[[-2.0, 0.5, 0.0], [0.0, 3.0, 0.5]]).unwrap();
        let u = aabb(&a.union(&b)).unwrap();
        assert!(u.contains_box(&aabb(&a).unwrap()));
        assert!(u.contains_box(&aabb(&b).unwrap()));
        assert_eq!(u, aabb(&a).unwrap().union(&aabb(&b).unwrap()));
    }
}
