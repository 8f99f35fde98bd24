//! Shape and layout metrics.
//!
//! Shape metrics expect both clouds normalized into `[-1, 1]^3` and aligned;
//! [`eval::eval_shape`] does both. Layout metrics work on posed clouds in
//! camera coordinates.

pub mod emd;
pub mod eval;
pub mod layout;
pub mod shape;

pub use emd::{emd_approx, emd_exact, min_cost_assignment, SinkhornConfig, SinkhornResult};
pub use eval::{eval_layout, eval_shape, eval_shape_detailed, LayoutEvalConfig, LayoutReport, ShapeEvalConfig, ShapeReport};
pub use layout::{aabb_iou_3d, add_s, add_s_at, diameter, BoxIou, ADD_S_THRESHOLD};
pub use shape::{chamfer, fscore, voxel_iou, FScore, F1_THRESHOLD, VOXEL_RESOLUTION};
