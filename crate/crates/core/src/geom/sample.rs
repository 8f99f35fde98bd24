use nalgebra::Point3;
use rand::Rng;

use crate::error::{Error, Result};
use crate::geom::mesh::{PointCloud, TriangleMesh};
use crate::rng::seeded;

/// Area-uniform surface samples. Faces are picked with probability
/// proportional to their area, then a point is drawn uniformly inside the
/// triangle.
pub fn sample_surface(mesh: &TriangleMesh, n: usize, seed: u64) -> Result<PointCloud> {
    sample_surface_with_faces(mesh, n, seed).map(|(cloud, _)| cloud)
}

/// Same as [`sample_surface`], also returning the face index of each sample.
pub fn sample_surface_with_faces(mesh: &TriangleMesh, n: usize, seed: u64) -> Result<(PointCloud, Vec<usize>)> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample count must be at least 1".into()));
    }
    let mut cdf = Vec::with_capacity(mesh.faces().len());
    let mut total = 0.0;
    for f in 0..mesh.faces().len() {
        total += mesh.face_area(f);
        cdf.push(total);
    }
    if !(total > 0.0) {
        return Err(Error::DegenerateMesh("zero total surface area".into()));
    }

    let mut rng = seeded(seed);
    let mut points = Vec::with_capacity(n);
    let mut faces = Vec::with_capacity(n);
    for _ in 0..n {
        let target = rng.random::<f64>() * total;
        // first face whose cumulative area exceeds the target; zero-area
        // faces are never selected
        let face = cdf.partition_point(|&c| c <= target).min(cdf.len() - 1);
        let [a, b, c] = mesh.triangle(face);
        let r1 = rng.random::<f64>().sqrt();
        let r2: f64 = rng.random();
        let (wa, wb, wc) = (1.0 - r1, r1 * (1.0 - r2), r1 * r2);
        points.push(Point3::from(a.coords * wa + b.coords * wb + c.coords * wc));
        faces.push(face);
    }
    Ok((PointCloud::new(points)?, faces))
}
