use nalgebra::Point3;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geom::mesh::PointCloud;

const LEAF_SIZE: usize = 8;
/// Queries below this count run on the calling thread.
const PAR_THRESHOLD: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub distance: f64,
}

#[derive(Debug, Clone)]
enum Node {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: f64, left: usize, right: usize },
}

/// Static 3D KD-tree returning exact nearest neighbours. Ties between
/// equidistant points resolve to the lowest index.
#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<Point3<f64>>,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

#[inline]
fn dist2(a: &Point3<f64>, b: &Point3<f64>) -> f64 {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    let dz = a.z - b.z;
    dx * dx + dy * dy + dz * dz
}

impl KdTree {
    pub fn build(points: &[Point3<f64>]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyCloud);
        }
        let mut tree = KdTree {
            points: points.to_vec(),
            order: (0..points.len()).collect(),
            nodes: Vec::with_capacity(2 * points.len() / LEAF_SIZE + 1),
        };
        tree.build_node(0, points.len());
        Ok(tree)
    }

    fn build_node(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for &i in &self.order[start..end] {
            let p = &self.points[i];
            for a in 0..3 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        let axis = (0..3).max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b]))).unwrap();
        if hi[axis] - lo[axis] == 0.0 {
            // all points coincide
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let mid = (start + end) / 2;
        let points = &self.points;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| points[a][axis].total_cmp(&points[b][axis]));
        let value = self.points[self.order[mid]][axis];
        self.nodes.push(Node::Leaf { start, end });
        let left = self.build_node(start, mid);
        let right = self.build_node(mid, end);
        self.nodes[id] = Node::Split { axis, value, left, right };
        id
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn nearest(&self, query: &Point3<f64>) -> Neighbor {
        let mut best = (f64::INFINITY, usize::MAX);
        self.search(0, query, &mut best);
        Neighbor { index: best.1, distance: best.0.sqrt() }
    }

    fn search(&self, node: usize, q: &Point3<f64>, best: &mut (f64, usize)) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let d = dist2(&self.points[i], q);
                    if d < best.0 || (d == best.0 && i < best.1) {
                        *best = (d, i);
                    }
                }
            }
            Node::Split { axis, value, left, right } => {
                // left holds coordinates <= value, right holds >= value
                let diff = q[axis] - value;
                let (near, far) = if diff <= 0.0 { (left, right) } else { (right, left) };
                self.search(near, q, best);
                // equality keeps ties reachable for lowest-index resolution
                if diff * diff <= best.0 {
                    self.search(far, q, best);
                }
            }
        }
    }
}

/// Exact nearest neighbour in `target` for every query point.
pub fn nearest_neighbors(query: &PointCloud, target: &PointCloud) -> Result<Vec<Neighbor>> {
    let tree = KdTree::build(target.points())?;
    Ok(query_all(&tree, query.points()))
}

pub(crate) fn query_all(tree: &KdTree, queries: &[Point3<f64>]) -> Vec<Neighbor> {
    if queries.len() < PAR_THRESHOLD {
        queries.iter().map(|q| tree.nearest(q)).collect()
    } else {
        queries.par_iter().map(|q| tree.nearest(q)).collect()
    }
}

/// O(n·m) reference implementation with the same tie rule.
pub fn brute_force_nearest(query: &PointCloud, target: &PointCloud) -> Result<Vec<Neighbor>> {
    if target.is_empty() {
        return Err(Error::EmptyCloud);
    }
    Ok(query
        .points()
        .iter()
        .map(|q| {
            let mut best = (f64::INFINITY, usize::MAX);
            for (i, p) in target.points().iter().enumerate() {
                let d = dist2(p, q);
                if d < best.0 {
                    best = (d, i);
                }
            }
            Neighbor { index: best.1, distance: best.0.sqrt() }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use rand::Rng;

    fn random_cloud(n: usize, seed: u64) -> PointCloud {
        let mut rng = seeded(seed);
        let pts: Vec<[f64; 3]> = (0..n).map(|_| std::array::from_fn(|_| rng.random_range(-1.0..1.0))).collect();
        PointCloud::from_xyz(&pts).unwrap()
    }

    #[test]
    fn self_query_is_zero() {
        let c = random_cloud(200, 1);
        for (i, n) in nearest_neighbors(&c, &c).unwrap().iter().enumerate() {
            assert_eq!(n.distance, 0.0);
            assert_eq!(n.index, i);
        }
    }

    #[test]
    fn small_example() {
        let q = PointCloud::from_xyz(&[[0.0; 3]]).unwrap();
        let t = PointCloud::from_xyz(&[[1.0, 0.0, 0.0], [0.0, 2.0, 0.0]]).unwrap();
        assert_eq!(nearest_neighbors(&q, &t).unwrap(), vec![Neighbor { index: 0, distance: 1.0 }]);
    }

    #[test]
    fn matches_brute_force() {
        for seed in 0..5 {
            let q = random_cloud(1000, seed);
            let t = random_cloud(1000, seed + 100);
            assert_eq!(nearest_neighbors(&q, &t).unwrap(), brute_force_nearest(&q, &t).unwrap());
        }
    }

    #[test]
    fn ties_resolve_to_lowest_index() {
        // lattice with many equidistant candidates and duplicates
        let mut pts = Vec::new();
        for x in -3..=3 {
            for y in -3..=3 {
                for z in -3..=3 {
                    pts.push([x as f64, y as f64, z as f64]);
                }
            }
        }
        pts.extend(pts.clone());
        let t = PointCloud::from_xyz(&pts).unwrap();
        let q = PointCloud::from_xyz(&[[0.5, 0.5, 0.5], [0.5, 0.0, 0.0], [1.0, 1.0, 1.0], [0.0, 0.0, 0.5]]).unwrap();
        assert_eq!(nearest_neighbors(&q, &t).unwrap(), brute_force_nearest(&q, &t).unwrap());
    }

    #[test]
    fn empty_target_errors() {
        let q = random_cloud(3, 0);
        assert_eq!(nearest_neighbors(&q, &PointCloud::new(vec![]).unwrap()).unwrap_err(), Error::EmptyCloud);
    }
}
