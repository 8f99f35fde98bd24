use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::aabb::Aabb3;
use crate::geom::mesh::PointCloud;

pub const DEFAULT_RESOLUTION: usize = 64;

/// Dense occupancy grid over an axis-aligned domain, stored as a bitset in
/// x-major order (`index = (i * res + j) * res + k`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoxelGrid {
    resolution: usize,
    domain: Aabb3,
    bits: Vec<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VoxelMode {
    /// Points outside the domain are an error.
    #[default]
    Strict,
    /// Points outside the domain are clamped into the boundary cells.
    Lenient,
}

impl VoxelGrid {
    pub fn empty(resolution: usize, domain: Aabb3) -> Result<Self> {
        if resolution == 0 {
            return Err(Error::InvalidArgument("voxel resolution must be positive".into()));
        }
        let cells = resolution.checked_pow(3).ok_or_else(|| Error::InvalidArgument("voxel resolution too large".into()))?;
        Ok(Self { resolution, domain, bits: vec![0; cells.div_ceil(64)] })
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn domain(&self) -> &Aabb3 {
        &self.domain
    }

    fn flat(&self, [i, j, k]: [usize; 3]) -> usize {
        (i * self.resolution + j) * self.resolution + k
    }

    pub fn get(&self, cell: [usize; 3]) -> bool {
        let f = self.flat(cell);
        self.bits[f / 64] >> (f % 64) & 1 == 1
    }

    pub fn set(&mut self, cell: [usize; 3]) {
        let f = self.flat(cell);
        self.bits[f / 64] |= 1 << (f % 64);
    }

    pub fn count(&self) -> usize {
        self.bits.iter().map(|w| w.count_ones() as usize).sum()
    }

    fn check_compatible(&self, other: &VoxelGrid) -> Result<()> {
        if self.resolution != other.resolution || self.domain != other.domain {
            return Err(Error::SizeMismatch("voxel grids differ in resolution or domain".into()));
        }
        Ok(())
    }

    pub fn intersection_count(&self, other: &VoxelGrid) -> Result<usize> {
        self.check_compatible(other)?;
        Ok(self.bits.iter().zip(&other.bits).map(|(a, b)| (a & b).count_ones() as usize).sum())
    }

    pub fn union_count(&self, other: &VoxelGrid) -> Result<usize> {
        self.check_compatible(other)?;
        Ok(self.bits.iter().zip(&other.bits).map(|(a, b)| (a | b).count_ones() as usize).sum())
    }

    /// True when every occupied cell of `self` is occupied in `other`.
    pub fn is_subset_of(&self, other: &VoxelGrid) -> bool {
        self.check_compatible(other).is_ok() && self.bits.iter().zip(&other.bits).all(|(a, b)| a & !b == 0)
    }

    /// Cell index along one axis: `floor((x - min) / (max - min) * res)`,
    /// clamped to `[0, res - 1]`.
    pub fn axis_index(&self, axis: usize, x: f64) -> usize {
        let (lo, hi) = (self.domain.min[axis], self.domain.max[axis]);
        let f = ((x - lo) / (hi - lo) * self.resolution as f64).floor();
        f.clamp(0.0, (self.resolution - 1) as f64) as usize
    }

    pub fn occupied_cells(&self) -> impl Iterator<Item = [usize; 3]> + '_ {
        let r = self.resolution;
        (0..r * r * r).filter(|f| self.bits[f / 64] >> (f % 64) & 1 == 1).map(move |f| [f / (r * r), (f / r) % r, f % r])
    }
}

/// Occupancy of `points` over `[-1, 1]^3` in strict mode.
pub fn voxelize(points: &PointCloud, resolution: usize) -> Result<VoxelGrid> {
    voxelize_with(points, resolution, Aabb3::unit_domain(), VoxelMode::Strict)
}

pub fn voxelize_with(points: &PointCloud, resolution: usize, domain: Aabb3, mode: VoxelMode) -> Result<VoxelGrid> {
    let mut grid = VoxelGrid::empty(resolution, domain)?;
    for (index, p) in points.points().iter().enumerate() {
        if mode == VoxelMode::Strict && !domain.contains(p) {
            return Err(Error::OutOfDomain { index });
        }
        let cell = [grid.axis_index(0, p.x), grid.axis_index(1, p.y), grid.axis_index(2, p.z)];
        grid.set(cell);
    }
    Ok(grid)
}
