//! Geometry carriers, rigid registration and the shape/layout metric suite.
//!
//! Point coordinates are `f64` throughout. Rotations follow the column-vector
//! convention (`x' = R x`), are right-handed and are stored row-major when
//! serialized. Poses apply per-axis scale first, then rotation, then
//! translation.

pub mod align;
pub mod error;
pub mod geom;
pub mod io;
pub mod metrics;
pub mod rng;

pub use error::{Error, Result};
pub use geom::{
    aabb::Aabb3,
    mesh::{PointCloud, TriangleMesh},
    pose::Pose,
    rotation::{Rot6dStats, Rotation6D, RotationMatrix},
    voxel::VoxelGrid,
};
