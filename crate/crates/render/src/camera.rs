use nalgebra::{Point2, Point3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pinhole camera in OpenCV convention: `+z` forward, `+x` right, `+y` down.
/// Pixel `(i, j)` covers `[i, i+1) x [j, j+1)`; its center is at `+0.5`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CameraRepr", into = "CameraRepr")]
pub struct Camera {
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    width: usize,
    height: usize,
}

#[derive(Serialize, Deserialize)]
struct CameraRepr {
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    width: usize,
    height: usize,
}

impl TryFrom<CameraRepr> for Camera {
    type Error = Error;

    fn try_from(r: CameraRepr) -> Result<Self> {
        Camera::new(r.fx, r.fy, r.cx, r.cy, r.width, r.height)
    }
}

impl From<Camera> for CameraRepr {
    fn from(c: Camera) -> Self {
        CameraRepr { fx: c.fx, fy: c.fy, cx: c.cx, cy: c.cy, width: c.width, height: c.height }
    }
}

impl Camera {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: usize, height: usize) -> Result<Self> {
        if !(fx > 0.0 && fy > 0.0 && fx.is_finite() && fy.is_finite()) {
            return Err(Error::InvalidCamera(format!("focal lengths must be positive, got {fx}, {fy}")));
        }
        if !(cx.is_finite() && cy.is_finite()) {
            return Err(Error::InvalidCamera("principal point must be finite".into()));
        }
        if width == 0 || height == 0 {
            return Err(Error::InvalidCamera("image must be at least 1x1".into()));
        }
        Ok(Self { fx, fy, cx, cy, width, height })
    }

    /// Square pixels, principal point at the image center.
    pub fn centered(focal: f64, width: usize, height: usize) -> Result<Self> {
        Self::new(focal, focal, width as f64 / 2.0, height as f64 / 2.0, width, height)
    }

    pub fn fx(&self) -> f64 {
        self.fx
    }

    pub fn fy(&self) -> f64 {
        self.fy
    }

    pub fn cx(&self) -> f64 {
        self.cx
    }

    pub fn cy(&self) -> f64 {
        self.cy
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    /// Continuous image coordinates of a camera-space point with `z > 0`.
    pub fn project(&self, p: &Point3<f64>) -> Point2<f64> {
        Point2::new(self.fx * p.x / p.z + self.cx, self.fy * p.y / p.z + self.cy)
    }

    /// Camera-space point at depth `z` along the ray through `(u, v)`.
    pub fn unproject(&self, u: f64, v: f64, z: f64) -> Point3<f64> {
        Point3::new((u - self.cx) / self.fx * z, (v - self.cy) / self.fy * z, z)
    }

    /// Camera-space point at depth `z` through the center of pixel `(i, j)`.
    pub fn unproject_pixel(&self, i: usize, j: usize, z: f64) -> Point3<f64> {
        self.unproject(i as f64 + 0.5, j as f64 + 0.5, z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn project_unproject_round_trip() {
        let cam = Camera::new(500.0, 400.0, 320.0, 240.0, 640, 480).unwrap();
        let p = Point3::new(0.3, -0.2, 2.5);
        let uv = cam.project(&p);
        assert!((cam.unproject(uv.x, uv.y, p.z) - p).norm() < 1e-12);
        assert_eq!(cam.project(&Point3::new(0.0, 0.0, 1.0)), Point2::new(320.0, 240.0));
    }

    #[test]
    fn rejects_bad_intrinsics() {
        assert!(Camera::new(0.0, 1.0, 0.0, 0.0, 1, 1).is_err());
        assert!(Camera::new(1.0, 1.0, 0.0, 0.0, 0, 1).is_err());
        let repr = CameraRepr { fx: -1.0, fy: 1.0, cx: 0.0, cy: 0.0, width: 4, height: 4 };
        assert!(Camera::try_from(repr).is_err());
    }
}
