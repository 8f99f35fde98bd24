//! Heuristic filters that flag meshes unsuitable as training targets:
//! near-zero volume, flat sheets, and disconnected fragments floating far
//! from the main body.

use std::collections::HashMap;

use nalgebra::{Matrix3, Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::geom::aabb::Aabb3;
use crate::geom::mesh::TriangleMesh;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityConfig {
    /// Minimum bounding-box volume after scaling the longest axis to 1.
    pub min_volume: f64,
    /// Minimum spread of face-normal directions (see [`normal_variance`]).
    pub min_normal_variance: f64,
    /// A component is an outlier when its centroid lies farther than this
    /// many main-component diagonals from the main centroid.
    pub outlier_factor: f64,
}

impl Default for QualityConfig {
    fn default() -> Self {
        Self { min_volume: 1e-4, min_normal_variance: 1e-3, outlier_factor: 1.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum QualityVerdict {
    Pass,
    Reject(String),
}

pub const REASON_FLAT: &str = "simplistic: flat";
pub const REASON_SMALL: &str = "simplistic: small volume";
pub const REASON_OUTLIER: &str = "structural outlier";
pub const REASON_EMPTY: &str = "empty mesh";

pub fn mesh_quality_filter(mesh: &TriangleMesh, config: &QualityConfig) -> QualityVerdict {
    if mesh.total_area() <= 0.0 {
        return QualityVerdict::Reject(REASON_EMPTY.into());
    }
    if normal_variance(mesh) < config.min_normal_variance {
        return QualityVerdict::Reject(REASON_FLAT.into());
    }
    if normalized_volume(mesh) < config.min_volume {
        return QualityVerdict::Reject(REASON_SMALL.into());
    }
    if has_structural_outlier(mesh, config.outlier_factor) {
        return QualityVerdict::Reject(REASON_OUTLIER.into());
    }
    QualityVerdict::Pass
}

/// `1 - λ_max` of the area-weighted scatter matrix of unit face normals.
/// Zero for a planar sheet regardless of winding; `2/3` for a cube.
pub fn normal_variance(mesh: &TriangleMesh) -> f64 {
    let mut scatter = Matrix3::zeros();
    let mut total = 0.0;
    for f in 0..mesh.faces().len() {
        let cross = mesh.face_cross(f);
        let len = cross.norm();
        if len == 0.0 {
            continue;
        }
        let n = cross / len;
        scatter += n * n.transpose() * len;
        total += len;
    }
    if total == 0.0 {
        return 0.0;
    }
    let eig = (scatter / total).symmetric_eigenvalues();
    1.0 - eig.max()
}

/// Bounding-box volume after scaling the longest axis to unit length.
pub fn normalized_volume(mesh: &TriangleMesh) -> f64 {
    let Ok(b) = Aabb3::from_points(mesh.vertices()) else {
        return 0.0;
    };
    let e = b.extent();
    let longest = e.max();
    if longest <= 0.0 {
        return 0.0;
    }
    (e / longest).product()
}

struct Component {
    area: f64,
    weighted_centroid: Vector3<f64>,
    faces: Vec<usize>,
}

/// Face-connected components, with vertices welded by exact position.
fn components(mesh: &TriangleMesh) -> Vec<Component> {
    let mut weld: HashMap<[u64; 3], usize> = HashMap::new();
    let ids: Vec<usize> = mesh
        .vertices()
        .iter()
        .map(|v| {
            let key = [v.x.to_bits(), v.y.to_bits(), v.z.to_bits()];
            let next = weld.len();
            *weld.entry(key).or_insert(next)
        })
        .collect();
    let mut parent: Vec<usize> = (0..weld.len()).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for f in mesh.faces() {
        let a = find(&mut parent, ids[f[0]]);
        for &v in &f[1..] {
            let b = find(&mut parent, ids[v]);
            if a != b {
                parent[b] = a;
            }
        }
    }
    let mut by_root: HashMap<usize, usize> = HashMap::new();
    let mut out: Vec<Component> = Vec::new();
    for (fi, f) in mesh.faces().iter().enumerate() {
        let root = find(&mut parent, ids[f[0]]);
        let slot = *by_root.entry(root).or_insert_with(|| {
            out.push(Component { area: 0.0, weighted_centroid: Vector3::zeros(), faces: Vec::new() });
            out.len() - 1
        });
        let [a, b, c] = mesh.triangle(fi);
        let area = mesh.face_area(fi);
        let comp = &mut out[slot];
        comp.area += area;
        comp.weighted_centroid += (a.coords + b.coords + c.coords) / 3.0 * area;
        comp.faces.push(fi);
    }
    out
}

fn has_structural_outlier(mesh: &TriangleMesh, factor: f64) -> bool {
    let comps = components(mesh);
    if comps.len() < 2 {
        return false;
    }
    let main = comps.iter().enumerate().max_by(|a, b| a.1.area.total_cmp(&b.1.area).then(b.0.cmp(&a.0))).map(|(i, _)| i).unwrap();
    let main_centroid = comps[main].weighted_centroid / comps[main].area;
    let main_points: Vec<Point3<f64>> = comps[main].faces.iter().flat_map(|&f| mesh.triangle(f)).collect();
    let diag = Aabb3::from_points(&main_points).map(|b| b.diagonal()).unwrap_or(0.0);
    comps.iter().enumerate().any(|(i, c)| {
        if i == main {
            return false;
        }
        let centroid = if c.area > 0.0 {
            c.weighted_centroid / c.area
        } else {
            // zero-area fragment: use its vertex mean
            let pts: Vec<Vector3<f64>> = c.faces.iter().flat_map(|&f| mesh.triangle(f)).map(|p| p.coords).collect();
            pts.iter().sum::<Vector3<f64>>() / pts.len() as f64
        };
        (centroid - main_centroid).norm() > factor * diag
    })
}
