//! Nearest-neighbour search and rigid registration.

pub mod icp;
pub mod kabsch;
pub mod kdtree;

pub use icp::{icp, icp_from, icp_rotation_error, IcpConfig, IcpResult};
pub use kabsch::{kabsch, RigidTransform};
pub use kdtree::{brute_force_nearest, nearest_neighbors, KdTree, Neighbor};
