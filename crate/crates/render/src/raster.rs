//! Z-buffer triangle rasterizer.
//!
//! Triangles are clipped against the near plane, projected, and filled by
//! testing pixel centers against the three edge functions (edges inclusive).
//! Depth is camera-space `z`, interpolated perspective-correctly through
//! `1/z`. Back faces are drawn. A pixel keeps the first fragment with the
//! smallest depth, so ties resolve to the earlier face.

use lift3d_core::geom::pose::Pose;
use lift3d_core::TriangleMesh;
use nalgebra::{Point2, Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::camera::Camera;
use crate::image::{BinaryMask, DepthBuffer, Pointmap, RgbImage};

/// Fragments closer than this to the camera plane are clipped away.
pub const NEAR_PLANE: f64 = 1e-4;

/// Flat shading with one directional light; intensity is
/// `ambient + diffuse * |n . l|`, clamped to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Shading {
    /// Direction the light travels, in camera space.
    pub light_dir: [f64; 3],
    pub ambient: f64,
    pub diffuse: f64,
    /// Used when the mesh has no vertex colors.
    pub base_color: [u8; 3],
}

impl Default for Shading {
    fn default() -> Self {
        Self { light_dir: [0.0, 0.0, 1.0], ambient: 0.3, diffuse: 0.7, base_color: [200, 200, 200] }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Render {
    pub depth: DepthBuffer,
    pub mask: BinaryMask,
    pub rgb: RgbImage,
}

impl Render {
    /// Camera-space surface point seen at a pixel, if any.
    pub fn surface_point(&self, camera: &Camera, x: usize, y: usize) -> Option<Point3<f64>> {
        let z = self.depth.get(x, y);
        z.is_finite().then(|| camera.unproject_pixel(x, y, z))
    }

    pub fn pointmap(&self, camera: &Camera) -> Pointmap {
        Pointmap::from_depth(camera, |x, y| self.depth.get(x, y))
    }
}

pub fn rasterize(mesh: &TriangleMesh, pose: &Pose, camera: &Camera) -> Render {
    rasterize_with(mesh, pose, camera, &Shading::default())
}

pub fn rasterize_with(mesh: &TriangleMesh, pose: &Pose, camera: &Camera, shading: &Shading) -> Render {
    let posed: Vec<Point3<f64>> = mesh.vertices().iter().map(|v| pose.transform_point(v)).collect();
    let mut target = Target::new(camera);
    let light = Vector3::from(shading.light_dir).try_normalize(0.0).unwrap_or_else(Vector3::z);
    for face in mesh.faces() {
        let p = face.map(|i| posed[i]);
        let n = (p[1] - p[0]).cross(&(p[2] - p[0]));
        let Some(n) = n.try_normalize(0.0) else { continue };
        let intensity = (shading.ambient + shading.diffuse * n.dot(&light).abs()).clamp(0.0, 1.0);
        let colors: [Vector3<f64>; 3] = match mesh.colors() {
            Some(c) => face.map(|i| Vector3::from(c[i].map(f64::from))),
            None => [Vector3::from(shading.base_color.map(f64::from)); 3],
        };
        let verts: Vec<Vertex> = (0..3).map(|k| Vertex { p: p[k], color: colors[k] }).collect();
        let clipped = clip_near(&verts);
        for k in 1..clipped.len().saturating_sub(1) {
            target.fill(camera, [&clipped[0], &clipped[k], &clipped[k + 1]], intensity);
        }
    }
    target.finish()
}

#[derive(Debug, Clone, Copy)]
struct Vertex {
    p: Point3<f64>,
    color: Vector3<f64>,
}

/// Sutherland-Hodgman against `z >= NEAR_PLANE`.
fn clip_near(poly: &[Vertex]) -> Vec<Vertex> {
    let inside = |v: &Vertex| v.p.z >= NEAR_PLANE;
    let mut out = Vec::with_capacity(4);
    for i in 0..poly.len() {
        let a = &poly[i];
        let b = &poly[(i + 1) % poly.len()];
        if inside(a) {
            out.push(*a);
        }
        if inside(a) != inside(b) {
            let s = (NEAR_PLANE - a.p.z) / (b.p.z - a.p.z);
            out.push(Vertex { p: a.p + (b.p - a.p) * s, color: a.color + (b.color - a.color) * s });
        }
    }
    out
}

fn edge(a: &Point2<f64>, b: &Point2<f64>, c: &Point2<f64>) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

struct Target {
    depth: DepthBuffer,
    rgb: RgbImage,
}

impl Target {
    fn new(camera: &Camera) -> Self {
        Self { depth: DepthBuffer::new(camera.width(), camera.height()), rgb: RgbImage::filled(camera.width(), camera.height(), [0, 0, 0]) }
    }

    fn fill(&mut self, camera: &Camera, v: [&Vertex; 3], intensity: f64) {
        let s = v.map(|v| camera.project(&v.p));
        let area = edge(&s[0], &s[1], &s[2]);
        if !(area.abs() > 1e-12) {
            return;
        }
        let inv_z = v.map(|v| 1.0 / v.p.z);
        let (w, h) = (camera.width() as f64, camera.height() as f64);
        let min_u = s.iter().map(|p| p.x).fold(f64::INFINITY, f64::min);
        let max_u = s.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max);
        let min_v = s.iter().map(|p| p.y).fold(f64::INFINITY, f64::min);
        let max_v = s.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max);
        let x0 = (min_u - 0.5).ceil().max(0.0);
        let x1 = (max_u - 0.5).floor().min(w - 1.0);
        let y0 = (min_v - 0.5).ceil().max(0.0);
        let y1 = (max_v - 0.5).floor().min(h - 1.0);
        if x0 > x1 || y0 > y1 {
            return;
        }
        for y in y0 as usize..=y1 as usize {
            for x in x0 as usize..=x1 as usize {
                let c = Point2::new(x as f64 + 0.5, y as f64 + 0.5);
                let b = [edge(&s[1], &s[2], &c) / area, edge(&s[2], &s[0], &c) / area, edge(&s[0], &s[1], &c) / area];
                if b.iter().any(|&bi| bi < 0.0) {
                    continue;
                }
                let iz = b[0] * inv_z[0] + b[1] * inv_z[1] + b[2] * inv_z[2];
                let z = 1.0 / iz;
                if !(z < self.depth.get(x, y)) {
                    continue;
                }
                self.depth.set(x, y, z);
                let color = (v[0].color * b[0] * inv_z[0] + v[1].color * b[1] * inv_z[1] + v[2].color * b[2] * inv_z[2]) * z;
                self.rgb.set(x, y, color.map(|c| (c * intensity).round().clamp(0.0, 255.0) as u8).into());
            }
        }
    }

    fn finish(self) -> Render {
        let mask = self.depth.mask();
        Render { depth: self.depth, mask, rgb: self.rgb }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use lift3d_core::RotationMatrix;

    fn quad(z: f64, half: f64) -> TriangleMesh {
        TriangleMesh::new(
            vec![Point3::new(-half, -half, z), Point3::new(half, -half, z), Point3::new(half, half, z), Point3::new(-half, half, z)],
            vec![[0, 1, 2], [0, 2, 3]],
        )
        .unwrap()
    }

    #[test]
    fn quad_projects_to_predicted_rectangle() {
        let cam = Camera::centered(100.0, 128, 96).unwrap();
        let r = rasterize(&quad(2.0, 0.5), &Pose::identity(), &cam);
        // analytic: half-width 100 * 0.5 / 2 = 25 px around (64, 48)
        let b = r.mask.bbox().unwrap();
        for (got, want) in [(b.x_min, 39.0), (b.x_max + 1, 89.0), (b.y_min, 23.0), (b.y_max + 1, 73.0)] {
            assert!((got as f64 - want).abs() <= 1.0, "{got} vs {want}");
        }
        assert_eq!(r.mask.count(), b.width() * b.height());
        assert!(r.depth.data().iter().filter(|z| z.is_finite()).all(|&z| (z - 2.0).abs() < 1e-12));
    }

    #[test]
    fn nearer_surface_wins() {
        let cam = Camera::centered(50.0, 40, 40).unwrap();
        let scene = quad(2.0, 1.0).merged(&quad(1.0, 0.2));
        let r = rasterize(&scene, &Pose::identity(), &cam);
        assert_eq!(r.depth.get(20, 20), 1.0);
        assert_eq!(r.depth.get(2, 20), 2.0);
        // same result regardless of face order
        let r2 = rasterize(&quad(1.0, 0.2).merged(&quad(2.0, 1.0)), &Pose::identity(), &cam);
        assert_eq!(r.depth, r2.depth);
    }

    #[test]
    fn behind_camera_and_empty_mesh() {
        let cam = Camera::centered(50.0, 20, 20).unwrap();
        let r = rasterize(&quad(-2.0, 1.0), &Pose::identity(), &cam);
        assert!(r.mask.is_empty());
        let r = rasterize(&TriangleMesh::empty(), &Pose::identity(), &cam);
        assert!(r.mask.is_empty());
        assert!(r.depth.data().iter().all(|z| *z == f64::INFINITY));
    }

    #[test]
    fn perspective_correct_depth_on_slanted_plane() {
        let cam = Camera::centered(80.0, 64, 64).unwrap();
        let tilt =
            Pose::new(RotationMatrix::from_axis_angle(&Vector3::y(), 0.6), Vector3::new(0.0, 0.0, 3.0), Vector3::repeat(1.0)).unwrap();
        let r = rasterize(&quad(0.0, 1.0), &tilt, &cam);
        // oracle: intersect each pixel ray with the plane n . x = n . t
        let n = tilt.rotation().apply(&Vector3::z());
        let d = n.dot(tilt.translation());
        for y in 0..64 {
            for x in 0..64 {
                let z = r.depth.get(x, y);
                if z.is_finite() {
                    let ray = cam.unproject_pixel(x, y, 1.0).coords;
                    assert!((z - d / n.dot(&ray)).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn near_plane_clipping_keeps_visible_part() {
        let cam = Camera::centered(30.0, 32, 32).unwrap();
        // a floor strip from behind the camera to z = 5
        let strip = TriangleMesh::new(
            vec![Point3::new(-1.0, 0.5, -1.0), Point3::new(1.0, 0.5, -1.0), Point3::new(1.0, 0.5, 5.0), Point3::new(-1.0, 0.5, 5.0)],
            vec![[0, 1, 2], [0, 2, 3]],
        )
        .unwrap();
        let r = rasterize(&strip, &Pose::identity(), &cam);
        assert!(!r.mask.is_empty());
        assert!(r.depth.data().iter().all(|&z| z >= NEAR_PLANE));
    }
}
