pub mod aabb;
pub mod mesh;
pub mod normalize;
pub mod pose;
pub mod quality;
pub mod rotation;
pub mod sample;
pub mod voxel;

pub use normalize::{normalize_unit_cube, SimilarityTransform};
pub use quality::{mesh_quality_filter, QualityConfig, QualityVerdict};
pub use rotation::{matrix_to_rot6d, random_rotation, rot6d_to_matrix, rotation_angle_deg};
pub use sample::{sample_surface, sample_surface_with_faces};
pub use voxel::{voxelize, voxelize_with, VoxelMode};
