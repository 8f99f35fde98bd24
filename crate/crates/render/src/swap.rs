//! Object-swap synthesis: place a new mesh where a scene object was,
//! re-render it against the scene depth, and check that the original
//! object had occlusion or support cues worth preserving.

use std::fmt;

use lift3d_core::geom::pose::Pose;
use lift3d_core::geom::rotation::random_rotation;
use lift3d_core::{Aabb3, TriangleMesh};
use nalgebra::{Point3, Vector3};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::camera::Camera;
use crate::error::{Error, Result};
use crate::image::{BinaryMask, Pointmap, RgbImage};
use crate::occlusion::RenderPasteSample;
use crate::raster::{rasterize_with, Shading};

/// Re-rendered samples with less than this visible fraction are dropped.
pub const MIN_VISIBLE_FRACTION: f64 = 0.2;

/// Valid 3D points of `pointmap` under `mask`.
fn masked_points(mask: &BinaryMask, pointmap: &Pointmap) -> Result<Vec<Point3<f64>>> {
    if mask.dims() != pointmap.dims() {
        return Err(Error::DimensionMismatch("mask and pointmap differ in size".into()));
    }
    let pts: Vec<Point3<f64>> = mask.iter_set().filter_map(|(x, y)| pointmap.get(x, y)).collect();
    if pts.is_empty() {
        return Err(Error::NoValidPixels);
    }
    Ok(pts)
}

/// Pose for a replacement mesh: translation at the centroid of the masked
/// scene points, uniformly random rotation, and per-axis scale fitting the
/// rotated mesh's bounding box to the masked points' bounding box.
///
/// The mesh is expected to be centered at its own origin.
pub fn osr_place<R: Rng + ?Sized>(target_mask: &BinaryMask, pointmap: &Pointmap, mesh: &TriangleMesh, rng: &mut R) -> Result<Pose> {
    let pts = masked_points(target_mask, pointmap)?;
    let t = pts.iter().fold(Vector3::zeros(), |a, p| a + p.coords) / pts.len() as f64;
    let rotation = random_rotation(rng);
    let target = Aabb3::from_points(&pts)?.extent();
    let s = fit_scale(mesh, &rotation, &target)?;
    Ok(Pose::new(rotation, t, s)?)
}

/// Per-axis scale `s` such that the world-axis extents of `R (s ⊙ v)` over
/// the mesh vertices match `target`, found by multiplicative updates that
/// keep `s` positive. Flat target extents are floored at 1e-3 of the
/// largest so the result stays a valid pose.
pub fn fit_scale(mesh: &TriangleMesh, rotation: &lift3d_core::RotationMatrix, target: &Vector3<f64>) -> Result<Vector3<f64>> {
    let verts = mesh.vertices();
    if verts.is_empty() {
        return Err(lift3d_core::Error::DegenerateMesh("mesh has no vertices".into()).into());
    }
    let largest = target.max();
    if !(largest > 0.0) {
        return Err(Error::InvalidArgument("target extent is zero".into()));
    }
    let target = target.map(|e| e.max(1e-3 * largest));
    let own = Aabb3::from_points(verts)?.extent();
    if own.iter().any(|&e| !(e > 0.0)) {
        return Err(lift3d_core::Error::DegenerateMesh("mesh is flat along an axis".into()).into());
    }
    let abs_r = rotation.matrix().abs();
    let extent_of = |s: &Vector3<f64>| {
        let world: Vec<Point3<f64>> = verts.iter().map(|v| Point3::from(rotation.apply(&v.coords.component_mul(s)))).collect();
        Aabb3::from_points(&world).map(|b| b.extent())
    };
    // start from the exact solution for a box-shaped mesh when it is positive
    let mut s = Vector3::from_iterator((0..3).map(|k| target.dot(&abs_r.column(k)) / (own[k] * abs_r.column(k).sum())));
    for _ in 0..200 {
        let e = extent_of(&s)?;
        let mut next = s;
        for k in 0..3 {
            let col = abs_r.column(k);
            next[k] *= target.dot(&col) / e.dot(&col);
        }
        let done = (next - s).abs().max() <= 1e-12 * s.max();
        s = next;
        if done {
            break;
        }
    }
    Ok(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OsrReject {
    EmptyRender,
    InsufficientVisibility,
}

impl fmt::Display for OsrReject {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OsrReject::EmptyRender => "empty render",
            OsrReject::InsufficientVisibility => "insufficient visibility",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum OsrOutcome {
    Accepted(Box<RenderPasteSample>),
    Rejected { reason: OsrReject, visible: usize, total: usize },
}

/// Renders `mesh` into the scene with a per-pixel depth test against the
/// scene pointmap and composites the visible pixels over `background`.
pub fn osr_rerender(
    background: &RgbImage,
    scene: &Pointmap,
    mesh: &TriangleMesh,
    pose: &Pose,
    camera: &Camera,
    shading: &Shading,
) -> Result<OsrOutcome> {
    let dims = (camera.width(), camera.height());
    if background.dims() != dims || scene.dims() != dims {
        return Err(Error::DimensionMismatch("background, scene and camera must agree in size".into()));
    }
    let render = rasterize_with(mesh, pose, camera, shading);
    let m_obj = render.mask.clone();
    let m_vis = BinaryMask::from_fn(dims.0, dims.1, |x, y| render.depth.get(x, y) < scene.depth(x, y));
    let (visible, total) = (m_vis.count(), m_obj.count());
    if total == 0 {
        return Ok(OsrOutcome::Rejected { reason: OsrReject::EmptyRender, visible, total });
    }
    // visible / total < 0.2
    if 5 * visible < total {
        return Ok(OsrOutcome::Rejected { reason: OsrReject::InsufficientVisibility, visible, total });
    }
    let image = background.composite(&render.rgb, &m_vis)?;
    let mut pointmap = scene.clone();
    for (x, y) in m_vis.iter_set() {
        pointmap.set(x, y, render.surface_point(camera, x, y))?;
    }
    Ok(OsrOutcome::Accepted(Box::new(RenderPasteSample { image, m_vis, m_obj, pose: *pose, mesh: None, pointmap: Some(pointmap) })))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CueConfig {
    /// The outer sample must be closer than the inner one by this much for
    /// a boundary pixel to count as occluded.
    pub depth_margin: f64,
    /// Distance in pixels from the boundary to the inner and outer samples.
    pub sample_offset: f64,
    /// Height of the support band as a fraction of the mask's row span.
    pub bottom_fraction: f64,
    /// Minimum occluded share of the boundary.
    pub min_occluded_fraction: f64,
    /// Share of downward-facing band pixels that must see nearer background.
    pub support_fraction: f64,
}

impl Default for CueConfig {
    fn default() -> Self {
        Self { depth_margin: 0.02, sample_offset: 2.0, bottom_fraction: 0.1, min_occluded_fraction: 0.1, support_fraction: 0.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CueReport {
    pub physical_support: bool,
    pub occluded_perimeter_fraction: f64,
    pub boundary_pixels: usize,
    pub occluded_pixels: usize,
    pub accept: bool,
}

/// Boundary pixels of `mask` (8-neighborhood) with their outward normals:
/// the normalized sum of offsets toward unset neighbors. Pixels off the
/// image count as unset.
pub fn mask_boundary(mask: &BinaryMask) -> Vec<((usize, usize), Vector3<f64>)> {
    let mut out = Vec::new();
    for (x, y) in mask.iter_set() {
        let mut n = Vector3::zeros();
        let mut boundary = false;
        for dy in -1i64..=1 {
            for dx in -1i64..=1 {
                if (dx, dy) != (0, 0) && !mask.get_signed(x as i64 + dx, y as i64 + dy) {
                    boundary = true;
                    n += Vector3::new(dx as f64, dy as f64, 0.0);
                }
            }
        }
        if boundary {
            out.push(((x, y), n.try_normalize(0.0).unwrap_or_else(Vector3::zeros)));
        }
    }
    out
}

/// Depth-cue check on an existing object's mask: is part of its outline
/// occluded by nearer scene content, or does nearer ground run along its
/// bottom edge?
pub fn osr_cue_check(mask: &BinaryMask, pointmap: &Pointmap, config: &CueConfig) -> Result<CueReport> {
    if mask.dims() != pointmap.dims() {
        return Err(Error::DimensionMismatch("mask and pointmap differ in size".into()));
    }
    let boundary = mask_boundary(mask);
    let Some(bbox) = mask.bbox() else {
        return Err(Error::DegenerateMask);
    };
    if boundary.is_empty() {
        return Err(Error::DegenerateMask);
    }
    let (w, h) = (mask.width() as i64, mask.height() as i64);
    let sample = |x: usize, y: usize, n: &Vector3<f64>, k: f64| -> Option<f64> {
        let sx = (x as f64 + k * n.x).round() as i64;
        let sy = (y as f64 + k * n.y).round() as i64;
        (sx >= 0 && sy >= 0 && sx < w && sy < h).then(|| pointmap.depth(sx as usize, sy as usize))
    };
    let band = ((config.bottom_fraction * bbox.height() as f64).ceil() as usize).max(1);
    let band_start = bbox.y_max + 1 - band.min(bbox.height());

    let mut occluded = 0usize;
    let (mut band_total, mut band_closer) = (0usize, 0usize);
    for &((x, y), n) in &boundary {
        if n == Vector3::zeros() {
            continue;
        }
        let own = pointmap.depth(x, y);
        let inner = sample(x, y, &n, -config.sample_offset).filter(|z| z.is_finite()).unwrap_or(own);
        let Some(outer) = sample(x, y, &n, config.sample_offset) else { continue };
        if !inner.is_finite() {
            continue;
        }
        if outer < inner - config.depth_margin {
            occluded += 1;
        }
        if y >= band_start && n.y > 0.0 {
            band_total += 1;
            if outer < inner {
                band_closer += 1;
            }
        }
    }
    let physical_support = band_total > 0 && band_closer as f64 >= config.support_fraction * band_total as f64;
    let fraction = occluded as f64 / boundary.len() as f64;
    let accept = physical_support || fraction >= config.min_occluded_fraction;
    Ok(CueReport {
        physical_support,
        occluded_perimeter_fraction: fraction,
        boundary_pixels: boundary.len(),
        occluded_pixels: occluded,
        accept,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use lift3d_core::rng::seeded;
    use lift3d_core::RotationMatrix;

    fn cam() -> Camera {
        Camera::centered(60.0, 64, 64).unwrap()
    }

    #[test]
    fn place_on_plane_uses_centroid() {
        let c = cam();
        let pm = Pointmap::from_depth(&c, |_, _| 3.0);
        let mask = BinaryMask::rect(64, 64, 10, 20, 30, 36);
        let pose = osr_place(&mask, &pm, &TriangleMesh::cube(1.0), &mut seeded(1)).unwrap();
        let pts: Vec<_> = mask.iter_set().map(|(x, y)| pm.get(x, y).unwrap()).collect();
        let mean = pts.iter().fold(Vector3::zeros(), |a, p| a + p.coords) / pts.len() as f64;
        assert!((pose.translation() - mean).norm() < 1e-12);
        assert!((pose.translation().z - 3.0).abs() < 1e-12);
        let again = osr_place(&mask, &pm, &TriangleMesh::cube(1.0), &mut seeded(1)).unwrap();
        assert_eq!(pose, again);
    }

    #[test]
    fn place_requires_valid_pixels() {
        let pm = Pointmap::invalid(64, 64);
        let mask = BinaryMask::rect(64, 64, 0, 0, 4, 4);
        assert_eq!(osr_place(&mask, &pm, &TriangleMesh::cube(1.0), &mut seeded(0)), Err(Error::NoValidPixels));
    }

    #[test]
    fn unit_cube_fits_double_box() {
        let s = fit_scale(&TriangleMesh::cube(1.0), &RotationMatrix::identity(), &Vector3::repeat(2.0)).unwrap();
        assert!((s - Vector3::repeat(2.0)).norm() < 1e-12);
    }

    #[test]
    fn rotated_fit_matches_target_extent() {
        let mesh = TriangleMesh::cuboid(Point3::new(-1.0, -0.5, -0.2), Point3::new(1.0, 0.5, 0.2));
        let r = RotationMatrix::from_axis_angle(&Vector3::new(0.2, 1.0, 0.3), 0.4);
        let target = Vector3::new(1.5, 1.2, 0.9);
        let s = fit_scale(&mesh, &r, &target).unwrap();
        let world: Vec<_> = mesh.vertices().iter().map(|v| Point3::from(r.apply(&v.coords.component_mul(&s)))).collect();
        let e = Aabb3::from_points(&world).unwrap().extent();
        assert!((e - target).norm() < 1e-6, "{e:?}");
    }

    fn quad(z: f64, half: f64) -> TriangleMesh {
        TriangleMesh::new(
            vec![Point3::new(-half, -half, z), Point3::new(half, -half, z), Point3::new(half, half, z), Point3::new(-half, half, z)],
            vec![[0, 1, 2], [0, 2, 3]],
        )
        .unwrap()
    }

    #[test]
    fn rerender_far_scene_is_fully_visible() {
        let c = cam();
        let scene = Pointmap::from_depth(&c, |_, _| 10.0);
        let bg = RgbImage::filled(64, 64, [5, 5, 5]);
        let out = osr_rerender(&bg, &scene, &quad(2.0, 0.5), &Pose::identity(), &c, &Shading::default()).unwrap();
        let OsrOutcome::Accepted(s) = out else { panic!("rejected") };
        assert_eq!(s.m_vis, s.m_obj);
        let pm = s.pointmap.unwrap();
        for (x, y) in s.m_vis.iter_set() {
            assert!((pm.depth(x, y) - 2.0).abs() < 1e-12);
        }
        for (i, (&px, &m)) in s.image.data().iter().zip(s.m_obj.data()).enumerate() {
            if !m {
                assert_eq!(px, bg.data()[i]);
            }
        }
    }

    #[test]
    fn rerender_left_wall_occludes_left_half() {
        let c = cam();
        let scene = Pointmap::from_depth(&c, |x, _| if x < 32 { 1.0 } else { 10.0 });
        let bg = RgbImage::filled(64, 64, [0, 0, 0]);
        let out = osr_rerender(&bg, &scene, &quad(2.0, 0.5), &Pose::identity(), &c, &Shading::default()).unwrap();
        let OsrOutcome::Accepted(s) = out else { panic!("rejected") };
        let right = BinaryMask::from_fn(64, 64, |x, y| x >= 32 && s.m_obj.get(x, y));
        assert_eq!(s.m_vis, right);
    }

    #[test]
    fn rerender_visibility_floor() {
        let c = cam();
        let bg = RgbImage::filled(64, 64, [0, 0, 0]);
        let mesh = quad(2.0, 0.5);
        let full = crate::raster::rasterize(&mesh, &Pose::identity(), &c).mask;
        let b = full.bbox().unwrap();
        // occlude all but the rightmost `keep` columns of the render
        let run = |keep: usize| {
            let cut = b.x_max + 1 - keep;
            let scene = Pointmap::from_depth(&c, |x, _| if x < cut { 1.0 } else { 10.0 });
            osr_rerender(&bg, &scene, &mesh, &Pose::identity(), &c, &Shading::default()).unwrap()
        };
        // 85% hidden
        let hidden = run((b.width() as f64 * 0.15).round() as usize);
        assert!(matches!(hidden, OsrOutcome::Rejected { reason: OsrReject::InsufficientVisibility, .. }));
        // exactly one fifth visible is kept
        assert_eq!(b.width() % 5, 0, "choose a render width divisible by 5");
        assert!(matches!(run(b.width() / 5), OsrOutcome::Accepted(_)));
        assert!(matches!(run(b.width() / 5 - 1), OsrOutcome::Rejected { .. }));
    }

    #[test]
    fn cue_support_from_ground() {
        // object at depth 5 standing on ground that is nearer below it
        let mask = BinaryMask::rect(40, 40, 10, 10, 30, 30);
        let pm = Pointmap::new(
            40,
            40,
            (0..1600)
                .map(|i| {
                    let (x, y) = (i % 40, i / 40);
                    let z = if mask.get(x, y) {
                        5.0
                    } else if y >= 30 {
                        4.0
                    } else {
                        20.0
                    };
                    Some(Point3::new(0.0, 0.0, z))
                })
                .collect(),
        )
        .unwrap();
        let r = osr_cue_check(&mask, &pm, &CueConfig::default()).unwrap();
        assert!(r.physical_support);
        assert!(r.accept);
    }

    #[test]
    fn cue_floating_object_rejected() {
        let mask = BinaryMask::rect(40, 40, 10, 10, 30, 30);
        let pm = Pointmap::from_depth(&cam_sized(40), |x, y| if mask.get(x, y) { 5.0 } else { 20.0 });
        let r = osr_cue_check(&mask, &pm, &CueConfig::default()).unwrap();
        assert!(!r.physical_support);
        assert_eq!(r.occluded_perimeter_fraction, 0.0);
        assert!(!r.accept);
    }

    fn cam_sized(n: usize) -> Camera {
        Camera::centered(50.0, n, n).unwrap()
    }

    #[test]
    fn cue_partial_occlusion_threshold() {
        let mask = BinaryMask::rect(40, 40, 10, 10, 30, 30);
        let boundary = mask_boundary(&mask);
        assert_eq!(boundary.len(), 76);
        // nearer foreground to the left of the object covers the left edge
        let check = |rows: usize| {
            let pm = Pointmap::from_depth(&cam_sized(40), |x, y| {
                if mask.get(x, y) {
                    5.0
                } else if x < 10 && (10..10 + rows).contains(&y) {
                    1.0
                } else {
                    20.0
                }
            });
            osr_cue_check(&mask, &pm, &CueConfig::default()).unwrap()
        };
        let r = check(13);
        assert!(r.occluded_perimeter_fraction >= 0.15 - 1e-12, "{}", r.occluded_perimeter_fraction);
        assert!(r.accept && !r.physical_support);
        // find the smallest occluder reaching the 10% rule and check both sides of it
        let first = (1..=20).find(|&k| check(k).accept).unwrap();
        let at = check(first);
        let below = check(first - 1);
        assert!(10 * at.occluded_pixels >= at.boundary_pixels);
        assert!(10 * below.occluded_pixels < below.boundary_pixels);
        assert!(!below.accept);
    }

    #[test]
    fn cue_needs_boundary() {
        let pm = Pointmap::from_depth(&cam_sized(8), |_, _| 1.0);
        assert_eq!(osr_cue_check(&BinaryMask::empty(8, 8), &pm, &CueConfig::default()), Err(Error::DegenerateMask));
    }
}
