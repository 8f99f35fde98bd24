//! Render-and-compare layout refinement.
//!
//! A pose is perturbed in 12 unconstrained coordinates (a 6D rotation
//! offset applied on the left of the initial rotation, a translation
//! offset, and a log-scale offset) and scored by the mask IoU between the
//! rendered silhouette and a target mask. The search is derivative-free;
//! [`accept_refinement`] keeps the result only if it strictly beats the
//! initial pose.

mod cma;
mod pattern;

use lift3d_core::geom::pose::Pose;
use lift3d_core::geom::rotation::{rot6d_to_matrix, Rotation6D};
use lift3d_core::{Aabb3, TriangleMesh};
use lift3d_render::raster::rasterize;
use lift3d_render::{BinaryMask, Camera, Error, Result};
use nalgebra::{SVector, Vector3};
use serde::{Deserialize, Serialize};

pub const DIM: usize = 12;
pub type Params = SVector<f64, DIM>;

/// `|a ∧ b| / |a ∨ b|`, zero when both are empty.
pub fn mask_iou_2d(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    if a.dims() != b.dims() {
        return Err(Error::DimensionMismatch(format!("{:?} vs {:?}", a.dims(), b.dims())));
    }
    let (mut inter, mut union) = (0usize, 0usize);
    for (&x, &y) in a.data().iter().zip(b.data()) {
        inter += (x && y) as usize;
        union += (x || y) as usize;
    }
    Ok(if union == 0 { 0.0 } else { inter as f64 / union as f64 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Optimizer {
    #[default]
    PatternSearch,
    CmaEs,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefineConfig {
    pub optimizer: Optimizer,
    pub max_evaluations: usize,
    /// Initial step on each 6D rotation component.
    pub rotation_step: f64,
    /// Initial translation step as a fraction of the posed object's
    /// bounding-box diagonal.
    pub translation_step: f64,
    /// Initial step on each log-scale component.
    pub log_scale_step: f64,
    /// Pattern search stops once its step shrinks below this (in units of
    /// the initial steps).
    pub min_step: f64,
    /// Before searching, shift the pose so the rendered silhouette's
    /// centroid and area match the target's (each try counts as an
    /// evaluation).
    pub moment_init: bool,
    pub seed: u64,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self {
            optimizer: Optimizer::PatternSearch,
            max_evaluations: 500,
            rotation_step: 0.1,
            translation_step: 0.1,
            log_scale_step: 0.1,
            min_step: 1e-3,
            moment_init: true,
            seed: 0,
        }
    }
}

impl RefineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_evaluations == 0 {
            return Err(Error::InvalidArgument("max_evaluations must be at least 1".into()));
        }
        let steps = [self.rotation_step, self.translation_step, self.log_scale_step, self.min_step];
        if steps.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::InvalidArgument("step sizes must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub evaluation: usize,
    pub iou: f64,
    pub best_iou: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefineResult {
    pub pose: Pose,
    pub iou: f64,
    pub initial_iou: f64,
    pub trace: Vec<TraceEntry>,
}

/// Maps search coordinates to poses around an initial pose.
struct Parameterization {
    init: Pose,
    steps: Params,
}

impl Parameterization {
    fn new(mesh: &TriangleMesh, init: &Pose, config: &RefineConfig) -> Result<Self> {
        let extent = Aabb3::from_points(mesh.vertices())?.extent().component_mul(init.scale());
        let size = extent.norm().max(f64::MIN_POSITIVE);
        let mut steps = Params::zeros();
        for k in 0..6 {
            steps[k] = config.rotation_step;
        }
        for k in 6..9 {
            steps[k] = config.translation_step * size;
        }
        for k in 9..12 {
            steps[k] = config.log_scale_step;
        }
        Ok(Self { init: *init, steps })
    }

    fn pose(&self, x: &Params) -> Option<Pose> {
        let d = x.component_mul(&self.steps);
        let r6 = Rotation6D([1.0 + d[0], d[1], d[2], d[3], 1.0 + d[4], d[5]]);
        let delta = rot6d_to_matrix(&r6).ok()?;
        let t = self.init.translation() + Vector3::new(d[6], d[7], d[8]);
        let s = self.init.scale().component_mul(&Vector3::new(d[9].exp(), d[10].exp(), d[11].exp()));
        Pose::new(delta.compose(self.init.rotation()), t, s).ok()
    }
}

/// Objective with evaluation budget and best-so-far bookkeeping.
pub(crate) struct Objective<'a> {
    mesh: &'a TriangleMesh,
    target: &'a BinaryMask,
    camera: &'a Camera,
    param: Parameterization,
    budget: usize,
    pub(crate) trace: Vec<TraceEntry>,
    pub(crate) best: (f64, Params),
}

impl Objective<'_> {
    pub(crate) fn exhausted(&self) -> bool {
        self.trace.len() >= self.budget || self.best.0 >= 1.0
    }

    /// IoU at `x`, or `None` once the budget is spent.
    pub(crate) fn eval(&mut self, x: &Params) -> Option<f64> {
        if self.trace.len() >= self.budget {
            return None;
        }
        let iou = match self.param.pose(x) {
            Some(p) => mask_iou_2d(&rasterize(self.mesh, &p, self.camera).mask, self.target).unwrap_or(0.0),
            None => 0.0,
        };
        if iou > self.best.0 {
            self.best = (iou, *x);
        }
        self.trace.push(TraceEntry { evaluation: self.trace.len(), iou, best_iou: self.best.0 });
        Some(iou)
    }
}

/// First and zeroth image moments of a mask: centroid and pixel count.
fn moments(mask: &BinaryMask) -> Option<(f64, f64, f64)> {
    let (mut sx, mut sy, mut n) = (0.0, 0.0, 0.0);
    for (x, y) in mask.iter_set() {
        sx += x as f64 + 0.5;
        sy += y as f64 + 0.5;
        n += 1.0;
    }
    (n > 0.0).then(|| (sx / n, sy / n, n))
}

/// Moves the best pose so its silhouette centroid lands on the target's
/// centroid and its area matches, by sliding along the viewing ray.
fn match_moments(obj: &mut Objective<'_>) {
    let Some((tu, tv, ta)) = moments(obj.target) else { return };
    for _ in 0..3 {
        if obj.exhausted() {
            return;
        }
        let x = obj.best.1;
        let Some(pose) = obj.param.pose(&x) else { return };
        let Some((u, v, a)) = moments(&rasterize(obj.mesh, &pose, obj.camera).mask) else { return };
        let t = pose.translation();
        // new depth from the area ratio, then place the centroid ray at it
        let z = t.z * (a / ta).sqrt();
        let cam = obj.camera;
        let shift_x = (tu - u) / cam.fx() * t.z;
        let shift_y = (tv - v) / cam.fy() * t.z;
        let lateral = Vector3::new(t.x + shift_x, t.y + shift_y, t.z);
        let target_t = lateral * (z / t.z);
        let offset = target_t - obj.param.init.translation();
        let mut cand = x;
        for k in 0..3 {
            cand[6 + k] = offset[k] / obj.param.steps[6 + k];
        }
        let before = obj.best.0;
        if obj.eval(&cand).is_none() || obj.best.0 <= before {
            return;
        }
    }
}

/// Maximizes silhouette IoU against `target`, starting from `init`.
/// Returns the best pose seen; exits early at IoU 1.
pub fn refine_layout(
    mesh: &TriangleMesh,
    init: &Pose,
    target: &BinaryMask,
    camera: &Camera,
    config: &RefineConfig,
) -> Result<RefineResult> {
    config.validate()?;
    if target.dims() != (camera.width(), camera.height()) {
        return Err(Error::DimensionMismatch("target mask must match the camera".into()));
    }
    if target.is_empty() {
        return Err(Error::EmptyTarget);
    }
    let mut obj = Objective {
        mesh,
        target,
        camera,
        param: Parameterization::new(mesh, init, config)?,
        budget: config.max_evaluations,
        trace: Vec::new(),
        best: (f64::NEG_INFINITY, Params::zeros()),
    };
    let initial_iou = obj.eval(&Params::zeros()).unwrap_or(0.0);
    if config.moment_init {
        match_moments(&mut obj);
    }
    match config.optimizer {
        Optimizer::PatternSearch => pattern::search(&mut obj, config.min_step),
        Optimizer::CmaEs => cma::search(&mut obj, config.seed),
    }
    let (iou, x) = obj.best;
    let pose = if x == Params::zeros() { *init } else { obj.param.pose(&x).unwrap_or(*init) };
    Ok(RefineResult { pose, iou, initial_iou, trace: obj.trace })
}

/// `refined` if its silhouette IoU strictly exceeds that of `init`,
/// otherwise `init`.
pub fn accept_refinement(init: &Pose, refined: &Pose, mesh: &TriangleMesh, target: &BinaryMask, camera: &Camera) -> Result<Pose> {
    let score = |p: &Pose| mask_iou_2d(&rasterize(mesh, p, camera).mask, target);
    Ok(if score(refined)? > score(init)? { *refined } else { *init })
}

#[cfg(test)]
mod tests {
    use super::*;
    use lift3d_core::RotationMatrix;

    fn cam() -> Camera {
        Camera::centered(100.0, 96, 96).unwrap()
    }

    fn at(x: f64, y: f64, z: f64) -> Pose {
        Pose::new(RotationMatrix::from_axis_angle(&Vector3::new(1.0, 1.0, 0.2), 0.5), Vector3::new(x, y, z), Vector3::new(1.0, 0.8, 0.6))
            .unwrap()
    }

    #[test]
    fn iou_examples() {
        let a = BinaryMask::rect(10, 10, 0, 0, 4, 4);
        assert_eq!(mask_iou_2d(&a, &a).unwrap(), 1.0);
        assert_eq!(mask_iou_2d(&a, &BinaryMask::rect(10, 10, 5, 5, 9, 9)).unwrap(), 0.0);
        assert_eq!(mask_iou_2d(&a, &BinaryMask::rect(10, 10, 2, 0, 6, 4)).unwrap(), 1.0 / 3.0);
        assert_eq!(mask_iou_2d(&BinaryMask::empty(3, 3), &BinaryMask::empty(3, 3)).unwrap(), 0.0);
        assert!(mask_iou_2d(&a, &BinaryMask::empty(3, 3)).is_err());
    }

    #[test]
    fn exact_init_exits_immediately() {
        let mesh = TriangleMesh::cube(1.0);
        let pose = at(0.0, 0.0, 5.0);
        let target = rasterize(&mesh, &pose, &cam()).mask;
        let r = refine_layout(&mesh, &pose, &target, &cam(), &RefineConfig::default()).unwrap();
        assert_eq!(r.pose, pose);
        assert_eq!(r.iou, 1.0);
        assert_eq!(r.trace.len(), 1);
    }

    #[test]
    fn shifted_cube_is_recovered_by_both_optimizers() {
        let mesh = TriangleMesh::cube(1.0);
        let truth = at(0.0, 0.0, 5.0);
        let target = rasterize(&mesh, &truth, &cam()).mask;
        // 10 px at depth 5 with f = 100
        let init = at(0.5, 0.0, 5.0);
        for optimizer in [Optimizer::PatternSearch, Optimizer::CmaEs] {
            let config = RefineConfig { optimizer, seed: 3, ..Default::default() };
            let r = refine_layout(&mesh, &init, &target, &cam(), &config).unwrap();
            assert!(r.iou >= 0.95, "{optimizer:?}: {}", r.iou);
            assert!(r.trace.len() <= 500);
            assert!(r.trace.windows(2).all(|w| w[1].best_iou >= w[0].best_iou));
            assert_eq!(r.trace.last().unwrap().best_iou, r.iou);
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let mesh = TriangleMesh::cube(1.0);
        let target = rasterize(&mesh, &at(0.1, 0.0, 5.0), &cam()).mask;
        let config = RefineConfig { optimizer: Optimizer::CmaEs, max_evaluations: 60, seed: 9, ..Default::default() };
        let a = refine_layout(&mesh, &at(0.4, 0.2, 5.0), &target, &cam(), &config).unwrap();
        let b = refine_layout(&mesh, &at(0.4, 0.2, 5.0), &target, &cam(), &config).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn empty_target_and_bad_config() {
        let mesh = TriangleMesh::cube(1.0);
        let empty = BinaryMask::empty(96, 96);
        assert_eq!(refine_layout(&mesh, &Pose::identity(), &empty, &cam(), &RefineConfig::default()), Err(Error::EmptyTarget));
        let target = BinaryMask::rect(96, 96, 0, 0, 5, 5);
        let bad = RefineConfig { max_evaluations: 0, ..Default::default() };
        assert!(refine_layout(&mesh, &Pose::identity(), &target, &cam(), &bad).is_err());
    }

    #[test]
    fn acceptance_is_strict() {
        let mesh = TriangleMesh::cube(1.0);
        let truth = at(0.0, 0.0, 5.0);
        let target = rasterize(&mesh, &truth, &cam()).mask;
        let worse = at(0.6, 0.0, 5.0);
        let same = worse;
        assert_eq!(accept_refinement(&worse, &same, &mesh, &target, &cam()).unwrap(), worse);
        assert_eq!(accept_refinement(&truth, &worse, &mesh, &target, &cam()).unwrap(), truth);
        assert_eq!(accept_refinement(&worse, &truth, &mesh, &target, &cam()).unwrap(), truth);
        // equal IoU from a mirrored offset keeps the initial pose
        let mirrored = at(-0.6, 0.0, 5.0);
        let iou = |p: &Pose| mask_iou_2d(&rasterize(&mesh, p, &cam()).mask, &target).unwrap();
        if iou(&mirrored) == iou(&worse) {
            assert_eq!(accept_refinement(&worse, &mirrored, &mesh, &target, &cam()).unwrap(), worse);
        }
    }
}
