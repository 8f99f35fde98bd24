use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Indexed triangle mesh. Optional per-vertex colors are carried as an opaque
/// payload and are only read by the renderer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriangleMesh {
    vertices: Vec<Point3<f64>>,
    faces: Vec<[usize; 3]>,
    colors: Option<Vec<[u8; 3]>>,
}

impl TriangleMesh {
    pub fn new(vertices: Vec<Point3<f64>>, faces: Vec<[usize; 3]>) -> Result<Self> {
        Self::with_colors(vertices, faces, None)
    }

    pub fn with_colors(vertices: Vec<Point3<f64>>, faces: Vec<[usize; 3]>, colors: Option<Vec<[u8; 3]>>) -> Result<Self> {
        let n = vertices.len();
        if let Some(v) = vertices.iter().position(|v| !v.coords.iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidMesh(format!("vertex {v} is not finite")));
        }
        for (fi, f) in faces.iter().enumerate() {
            if f.iter().any(|&i| i >= n) {
                return Err(Error::InvalidMesh(format!("face {fi} references a vertex beyond {n}")));
            }
        }
        if let Some(c) = &colors {
            if c.len() != n {
                return Err(Error::InvalidMesh(format!("{} colors for {n} vertices", c.len())));
            }
        }
        Ok(Self { vertices, faces, colors })
    }

    pub fn empty() -> Self {
        Self { vertices: Vec::new(), faces: Vec::new(), colors: None }
    }

    pub fn vertices(&self) -> &[Point3<f64>] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn colors(&self) -> Option<&[[u8; 3]]> {
        self.colors.as_deref()
    }

    pub fn triangle(&self, face: usize) -> [Point3<f64>; 3] {
        let [a, b, c] = self.faces[face];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// Unnormalized face normal; its norm is twice the face area.
    pub fn face_cross(&self, face: usize) -> Vector3<f64> {
        let [a, b, c] = self.triangle(face);
        (b - a).cross(&(c - a))
    }

    pub fn face_area(&self, face: usize) -> f64 {
        0.5 * self.face_cross(face).norm()
    }

    pub fn total_area(&self) -> f64 {
        (0..self.faces.len()).map(|f| self.face_area(f)).sum()
    }

    /// Applies `f` to every vertex, keeping topology and colors.
    pub fn map_vertices(&self, f: impl Fn(&Point3<f64>) -> Point3<f64>) -> Self {
        Self { vertices: self.vertices.iter().map(f).collect(), faces: self.faces.clone(), colors: self.colors.clone() }
    }

    /// Concatenates two meshes into one vertex/face list.
    pub fn merged(&self, other: &TriangleMesh) -> Self {
        let offset = self.vertices.len();
        let mut vertices = self.vertices.clone();
        vertices.extend_from_slice(&other.vertices);
        let mut faces = self.faces.clone();
        faces.extend(other.faces.iter().map(|f| [f[0] + offset, f[1] + offset, f[2] + offset]));
        let colors = match (&self.colors, &other.colors) {
            (Some(a), Some(b)) => Some(a.iter().chain(b).copied().collect()),
            _ => None,
        };
        Self { vertices, faces, colors }
    }

    pub fn vertex_cloud(&self) -> PointCloud {
        PointCloud::from_points(self.vertices.clone())
    }

    /// Axis-aligned box with corners `min` and `max`, 12 outward-wound triangles.
    pub fn cuboid(min: Point3<f64>, max: Point3<f64>) -> Self {
        let v = |x: f64, y: f64, z: f64| Point3::new(x, y, z);
        let vertices = vec![
            v(min.x, min.y, min.z),
            v(max.x, min.y, min.z),
            v(max.x, max.y, min.z),
            v(min.x, max.y, min.z),
            v(min.x, min.y, max.z),
            v(max.x, min.y, max.z),
            v(max.x, max.y, max.z),
            v(min.x, max.y, max.z),
        ];
        let faces = vec![
            [0, 2, 1],
            [0, 3, 2],
            [4, 5, 6],
            [4, 6, 7],
            [0, 1, 5],
            [0, 5, 4],
            [3, 7, 6],
            [3, 6, 2],
            [0, 4, 7],
            [0, 7, 3],
            [1, 2, 6],
            [1, 6, 5],
        ];
        Self { vertices, faces, colors: None }
    }

    /// Cube of side `side` centered at the origin.
    pub fn cube(side: f64) -> Self {
        let h = side / 2.0;
        Self::cuboid(Point3::new(-h, -h, -h), Point3::new(h, h, h))
    }

    /// UV sphere with `rings` latitude bands and `segments`
    /// longitude slices.
    pub fn uv_sphere(radius: f64, rings: usize, segments: usize) -> Self {
        let rings = rings.max(2);
        let segments = segments.max(3);
        let mut vertices = vec![Point3::new(0.0, 0.0, radius)];
        for r in 1..rings {
            let theta = std::f64::consts::PI * r as f64 / rings as f64;
            for s in 0..segments {
                let phi = 2.0 * std::f64::consts::PI * s as f64 / segments as f64;
                vertices.push(Point3::new(radius * theta.sin() * phi.cos(), radius * theta.sin() * phi.sin(), radius * theta.cos()));
            }
        }
        let south = vertices.len();
        vertices.push(Point3::new(0.0, 0.0, -radius));
        let idx = |r: usize, s: usize| 1 + (r - 1) * segments + (s % segments);
        let mut faces = Vec::new();
        for s in 0..segments {
            faces.push([0, idx(1, s), idx(1, s + 1)]);
        }
        for r in 1..rings - 1 {
            for s in 0..segments {
                faces.push([idx(r, s), idx(r + 1, s), idx(r + 1, s + 1)]);
                faces.push([idx(r, s), idx(r + 1, s + 1), idx(r, s + 1)]);
            }
        }
        for s in 0..segments {
            faces.push([south, idx(rings - 1, s + 1), idx(rings - 1, s)]);
        }
        Self { vertices, faces, colors: None }
    }
}

/// Unordered set of 3D points with optional non-negative weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    points: Vec<Point3<f64>>,
    weights: Option<Vec<f64>>,
}

impl PointCloud {
    pub fn new(points: Vec<Point3<f64>>) -> Result<Self> {
        if let Some(i) = points.iter().position(|p| !p.coords.iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidCloud(format!("point {i} is not finite")));
        }
        Ok(Self { points, weights: None })
    }

    pub fn with_weights(points: Vec<Point3<f64>>, weights: Vec<f64>) -> Result<Self> {
        let mut cloud = Self::new(points)?;
        if weights.len() != cloud.points.len() {
            return Err(Error::SizeMismatch(format!("{} weights for {} points", weights.len(), cloud.points.len())));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidCloud("weights must be finite and non-negative".into()));
        }
        if weights.iter().sum::<f64>() <= 0.0 {
            return Err(Error::InvalidCloud("weights sum to zero".into()));
        }
        cloud.weights = Some(weights);
        Ok(cloud)
    }

    /// Builds a cloud from points already known to be finite.
    pub(crate) fn from_points(points: Vec<Point3<f64>>) -> Self {
        debug_assert!(points.iter().all(|p| p.coords.iter().all(|c| c.is_finite())));
        Self { points, weights: None }
    }

    pub fn from_xyz(points: &[[f64; 3]]) -> Result<Self> {
        Self::new(points.iter().map(|p| Point3::new(p[0], p[1], p[2])).collect())
    }

    pub fn points(&self) -> &[Point3<f64>] {
        &self.points
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn into_points(self) -> Vec<Point3<f64>> {
        self.points
    }

    pub fn centroid(&self) -> Option<Point3<f64>> {
        if self.points.is_empty() {
            return None;
        }
        let sum = self.points.iter().fold(Vector3::zeros(), |acc, p| acc + p.coords);
        Some(Point3::from(sum / self.points.len() as f64))
    }

    /// Applies `f` to every point, keeping weights.
    pub fn map(&self, f: impl Fn(&Point3<f64>) -> Point3<f64>) -> Self {
        Self { points: self.points.iter().map(f).collect(), weights: self.weights.clone() }
    }

    /// Points at the given indices, in order. Weights are dropped.
    pub fn select(&self, indices: &[usize]) -> Self {
        Self { points: indices.iter().map(|&i| self.points[i]).collect(), weights: None }
    }

    pub fn union(&self, other: &PointCloud) -> Self {
        let mut points = self.points.clone();
        points.extend_from_slice(&other.points);
        Self { points, weights: None }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_out_of_range_faces() {
        let v = vec![Point3::origin(), Point3::new(1.0, 0.0, 0.0), Point3::new(0.0, 1.0, 0.0)];
        assert!(TriangleMesh::new(v.clone(), vec![[0, 1, 3]]).is_err());
        assert!(TriangleMesh::new(v, vec![[0, 1, 2]]).is_ok());
    }

    #[test]
    fn rejects_non_finite_points() {
        assert!(PointCloud::from_xyz(&[[f64::NAN, 0.0, 0.0]]).is_err());
        assert!(PointCloud::with_weights(vec![Point3::origin()], vec![0.0]).is_err());
    }

    #[test]
    fn cube_area_and_orientation() {
        let cube = TriangleMesh::cube(1.0);
        assert!((cube.total_area() - 6.0).abs() < 1e-12);
        // outward winding: normal points away from the centroid
        for f in 0..cube.faces().len() {
            let [a, b, c] = cube.triangle(f);
            let center = (a.coords + b.coords + c.coords) / 3.0;
            assert!(cube.face_cross(f).dot(&center) > 0.0);
        }
    }

    #[test]
    fn sphere_is_closed_and_outward() {
        let s = TriangleMesh::uv_sphere(1.0, 8, 12);
        for f in 0..s.faces().len() {
            let [a, b, c] = s.triangle(f);
            let center = (a.coords + b.coords + c.coords) / 3.0;
            assert!(s.face_cross(f).dot(&center) > 0.0, "face {f}");
        }
    }
}
