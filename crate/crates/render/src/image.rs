use nalgebra::Point3;

use crate::error::{Error, Result};

fn check_dims(width: usize, height: usize, len: usize, what: &str) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidImage(format!("{what} must be at least 1x1")));
    }
    if width * height != len {
        return Err(Error::InvalidImage(format!("{what} {width}x{height} expects {} pixels, got {len}", width * height)));
    }
    Ok(())
}

fn same_dims(a: (usize, usize), b: (usize, usize)) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch(format!("{}x{} vs {}x{}", a.0, a.1, b.0, b.1)));
    }
    Ok(())
}

/// Pixel-aligned bounding box, inclusive on both ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PixelBox {
    pub x_min: usize,
    pub y_min: usize,
    pub x_max: usize,
    pub y_max: usize,
}

impl PixelBox {
    pub fn width(&self) -> usize {
        self.x_max - self.x_min + 1
    }

    pub fn height(&self) -> usize {
        self.y_max - self.y_min + 1
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, data: Vec<bool>) -> Result<Self> {
        check_dims(width, height, data.len(), "mask")?;
        Ok(Self { width, height, data })
    }

    pub fn empty(width: usize, height: usize) -> Self {
        Self { width: width.max(1), height: height.max(1), data: vec![false; width.max(1) * height.max(1)] }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let mut m = Self::empty(width, height);
        for y in 0..m.height {
            for x in 0..m.width {
                m.data[y * m.width + x] = f(x, y);
            }
        }
        m
    }

    /// Axis-aligned rectangle `[x0, x1) x [y0, y1)`, clipped to the image.
    pub fn rect(width: usize, height: usize, x0: usize, y0: usize, x1: usize, y1: usize) -> Self {
        Self::from_fn(width, height, |x, y| (x0..x1).contains(&x) && (y0..y1).contains(&y))
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    /// `false` outside the image.
    pub fn get_signed(&self, x: i64, y: i64) -> bool {
        x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height && self.get(x as usize, y as usize)
    }

    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.data[y * self.width + x] = v;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.data.iter().any(|&b| b)
    }

    fn zip_with(&self, other: &BinaryMask, f: impl Fn(bool, bool) -> bool) -> Result<BinaryMask> {
        same_dims(self.dims(), other.dims())?;
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        Ok(BinaryMask { width: self.width, height: self.height, data })
    }

    pub fn and(&self, other: &BinaryMask) -> Result<BinaryMask> {
        self.zip_with(other, |a, b| a && b)
    }

    pub fn or(&self, other: &BinaryMask) -> Result<BinaryMask> {
        self.zip_with(other, |a, b| a || b)
    }

    pub fn and_not(&self, other: &BinaryMask) -> Result<BinaryMask> {
        self.zip_with(other, |a, b| a && !b)
    }

    pub fn is_subset_of(&self, other: &BinaryMask) -> bool {
        self.dims() == other.dims() && self.data.iter().zip(&other.data).all(|(&a, &b)| !a || b)
    }

    pub fn bbox(&self) -> Option<PixelBox> {
        let mut b: Option<PixelBox> = None;
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(x, y) {
                    let e = b.get_or_insert(PixelBox { x_min: x, y_min: y, x_max: x, y_max: y });
                    e.x_min = e.x_min.min(x);
                    e.x_max = e.x_max.max(x);
                    e.y_max = y;
                }
            }
        }
        b
    }

    /// Content moved by `(dx, dy)` pixels; pixels leaving the frame are dropped.
    pub fn shifted(&self, dx: i64, dy: i64) -> BinaryMask {
        BinaryMask::from_fn(self.width, self.height, |x, y| self.get_signed(x as i64 - dx, y as i64 - dy))
    }

    pub fn iter_set(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.data.iter().enumerate().filter(|(_, &b)| b).map(move |(i, _)| (i % self.width, i / self.width))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RgbImage {
    width: usize,
    height: usize,
    data: Vec<[u8; 3]>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, data: Vec<[u8; 3]>) -> Result<Self> {
        check_dims(width, height, data.len(), "image")?;
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, color: [u8; 3]) -> Self {
        Self { width: width.max(1), height: height.max(1), data: vec![color; width.max(1) * height.max(1)] }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[[u8; 3]] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, c: [u8; 3]) {
        self.data[y * self.width + x] = c;
    }

    /// Copy of `self` with `top` pasted wherever `mask` is set.
    pub fn composite(&self, top: &RgbImage, mask: &BinaryMask) -> Result<RgbImage> {
        same_dims(self.dims(), top.dims())?;
        same_dims(self.dims(), mask.dims())?;
        let data = self.data.iter().zip(&top.data).zip(&mask.data).map(|((&b, &t), &m)| if m { t } else { b }).collect();
        Ok(RgbImage { width: self.width, height: self.height, data })
    }

    pub fn shifted(&self, dx: i64, dy: i64, fill: [u8; 3]) -> RgbImage {
        let mut out = RgbImage::filled(self.width, self.height, fill);
        for y in 0..self.height {
            for x in 0..self.width {
                let (sx, sy) = (x as i64 - dx, y as i64 - dy);
                if sx >= 0 && sy >= 0 && (sx as usize) < self.width && (sy as usize) < self.height {
                    out.set(x, y, self.get(sx as usize, sy as usize));
                }
            }
        }
        out
    }
}

/// Per-pixel nearest-surface depth; `+inf` where nothing was drawn.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthBuffer {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl DepthBuffer {
    pub fn new(width: usize, height: usize) -> Self {
        Self { width: width.max(1), height: height.max(1), data: vec![f64::INFINITY; width.max(1) * height.max(1)] }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, z: f64) {
        self.data[y * self.width + x] = z;
    }

    pub fn mask(&self) -> BinaryMask {
        BinaryMask { width: self.width, height: self.height, data: self.data.iter().map(|z| z.is_finite()).collect() }
    }
}

/// Camera-space 3D point per pixel; `None` marks an invalid pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct Pointmap {
    width: usize,
    height: usize,
    points: Vec<Option<Point3<f64>>>,
}

impl Pointmap {
    /// Valid points must be finite with `z > 0`.
    pub fn new(width: usize, height: usize, points: Vec<Option<Point3<f64>>>) -> Result<Self> {
        check_dims(width, height, points.len(), "pointmap")?;
        if let Some(i) = points.iter().position(|p| p.is_some_and(|p| !(p.z > 0.0 && p.iter().all(|c| c.is_finite())))) {
            return Err(Error::InvalidImage(format!("pointmap pixel {i} is non-finite or has z <= 0")));
        }
        Ok(Self { width, height, points })
    }

    pub fn invalid(width: usize, height: usize) -> Self {
        Self { width: width.max(1), height: height.max(1), points: vec![None; width.max(1) * height.max(1)] }
    }

    /// Pointmap of a scene whose depth at each pixel is `depth(x, y)`;
    /// non-finite or non-positive depths become invalid pixels.
    pub fn from_depth(camera: &crate::camera::Camera, depth: impl Fn(usize, usize) -> f64) -> Self {
        let (w, h) = (camera.width(), camera.height());
        let mut points = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                let z = depth(x, y);
                points.push((z.is_finite() && z > 0.0).then(|| camera.unproject_pixel(x, y, z)));
            }
        }
        Self { width: w, height: h, points }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn points(&self) -> &[Option<Point3<f64>>] {
        &self.points
    }

    pub fn get(&self, x: usize, y: usize) -> Option<Point3<f64>> {
        self.points[y * self.width + x]
    }

    /// Scene depth at a pixel; invalid pixels are infinitely far.
    pub fn depth(&self, x: usize, y: usize) -> f64 {
        self.get(x, y).map_or(f64::INFINITY, |p| p.z)
    }

    pub fn set(&mut self, x: usize, y: usize, p: Option<Point3<f64>>) -> Result<()> {
        if let Some(q) = p {
            if !(q.z > 0.0 && q.iter().all(|c| c.is_finite())) {
                return Err(Error::InvalidImage("pointmap points must be finite with z > 0".into()));
            }
        }
        self.points[y * self.width + x] = p;
        Ok(())
    }

    pub fn valid_mask(&self) -> BinaryMask {
        BinaryMask { width: self.width, height: self.height, data: self.points.iter().map(|p| p.is_some()).collect() }
    }
}
