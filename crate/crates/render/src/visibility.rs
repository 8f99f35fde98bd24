//! Depth-guided visibility for multi-view feature aggregation.
//!
//! Each view observes the same `N` points at normalized image coordinates
//! with a predicted depth and a feature vector. Per view, a min-depth
//! buffer over a grid gives a reference surface depth; points within `tau`
//! of that surface are visible. Features are averaged over the views in
//! which a point is visible.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One view's observations of the shared point set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewPoints {
    /// Normalized image coordinates in `[-1, 1]^2`, `(x, y)`.
    pub coords: Vec<[f64; 2]>,
    pub depths: Vec<f64>,
    pub features: Vec<Vec<f64>>,
    /// Reference depth per grid cell, row-major; replaces the min-depth
    /// buffer when present. Non-finite cells count as infinitely far.
    pub reference_depth: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregation {
    /// `visible[view][point]`.
    pub visible: Vec<Vec<bool>>,
    /// Visibility normalized across views: `weights[view][point]`.
    pub weights: Vec<Vec<f64>>,
    /// Weighted feature sum per point; zeros when no view sees the point.
    pub features: Vec<Vec<f64>>,
}

/// Grid cell of a normalized coordinate.
pub fn grid_cell(coord: [f64; 2], width: usize, height: usize) -> (usize, usize) {
    let cell = |u: f64, n: usize| (((u + 1.0) / 2.0 * n as f64).floor().max(0.0) as usize).min(n - 1);
    (cell(coord[0], width), cell(coord[1], height))
}

/// Min-depth buffer `D_surf` of one view; `+inf` in empty cells.
pub fn surface_depth(view: &ViewPoints, width: usize, height: usize) -> Vec<f64> {
    let mut grid = vec![f64::INFINITY; width * height];
    for (c, &d) in view.coords.iter().zip(&view.depths) {
        let (x, y) = grid_cell(*c, width, height);
        let cell = &mut grid[y * width + x];
        *cell = cell.min(d);
    }
    grid
}

pub fn depth_visibility_aggregate(views: &[ViewPoints], grid: (usize, usize), tau: f64) -> Result<Aggregation> {
    let (width, height) = grid;
    if width == 0 || height == 0 {
        return Err(Error::InvalidArgument("grid must be at least 1x1".into()));
    }
    if !(tau > 0.0) {
        return Err(Error::InvalidArgument("tau must be positive".into()));
    }
    let n = views.first().map_or(0, |v| v.coords.len());
    let channels = views.first().and_then(|v| v.features.first()).map_or(0, Vec::len);
    for v in views {
        if v.coords.len() != n || v.depths.len() != n || v.features.len() != n {
            return Err(Error::DimensionMismatch("every view must observe the same number of points".into()));
        }
        if v.features.iter().any(|f| f.len() != channels) {
            return Err(Error::DimensionMismatch("feature vectors must have equal length".into()));
        }
        if v.coords.iter().flatten().any(|u| !(-1.0..=1.0).contains(u)) {
            return Err(Error::InvalidArgument("coordinates must lie in [-1, 1]".into()));
        }
        if v.reference_depth.as_ref().is_some_and(|r| r.len() != width * height) {
            return Err(Error::DimensionMismatch("reference depth must cover the grid".into()));
        }
    }
    if n == 0 {
        return Ok(Aggregation { visible: vec![Vec::new(); views.len()], weights: vec![Vec::new(); views.len()], features: Vec::new() });
    }

    let visible: Vec<Vec<bool>> = views
        .iter()
        .map(|v| {
            let surf = match &v.reference_depth {
                Some(r) => r.iter().map(|&d| if d.is_finite() { d } else { f64::INFINITY }).collect(),
                None => surface_depth(v, width, height),
            };
            v.coords
                .iter()
                .zip(&v.depths)
                .map(|(c, &d)| {
                    let (x, y) = grid_cell(*c, width, height);
                    surf[y * width + x] > d - tau
                })
                .collect()
        })
        .collect();

    let counts: Vec<usize> = (0..n).map(|i| visible.iter().filter(|v| v[i]).count()).collect();
    let weights: Vec<Vec<f64>> =
        visible.iter().map(|v| (0..n).map(|i| if v[i] { 1.0 / counts[i] as f64 } else { 0.0 }).collect()).collect();
    let features = (0..n)
        .map(|i| {
            let mut acc = vec![0.0; channels];
            for (view, w) in views.iter().zip(&weights) {
                if w[i] > 0.0 {
                    for (a, f) in acc.iter_mut().zip(&view.features[i]) {
                        *a += w[i] * f;
                    }
                }
            }
            acc
        })
        .collect();
    Ok(Aggregation { visible, weights, features })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn view(coords: Vec<[f64; 2]>, depths: Vec<f64>, features: Vec<Vec<f64>>) -> ViewPoints {
        ViewPoints { coords, depths, features, reference_depth: None }
    }

    #[test]
    fn single_point_is_identity() {
        let v = view(vec![[0.3, -0.7]], vec![4.0], vec![vec![1.5, -2.0, 0.25]]);
        let a = depth_visibility_aggregate(&[v], (8, 8), 0.1).unwrap();
        assert_eq!(a.features, vec![vec![1.5, -2.0, 0.25]]);
        assert_eq!(a.weights, vec![vec![1.0]]);
    }

    #[test]
    fn nearer_point_hides_farther_in_same_cell() {
        let v = view(vec![[0.1, 0.1], [0.11, 0.12]], vec![1.0, 2.0], vec![vec![1.0], vec![2.0]]);
        let a = depth_visibility_aggregate(std::slice::from_ref(&v), (4, 4), 0.1).unwrap();
        assert_eq!(a.visible, vec![vec![true, false]]);
        assert_eq!(a.features, vec![vec![1.0], vec![0.0]]);
        let all = depth_visibility_aggregate(&[v], (4, 4), f64::INFINITY).unwrap();
        assert_eq!(all.visible, vec![vec![true, true]]);
    }

    #[test]
    fn weights_normalize_across_views() {
        // point 1 is occluded in view b only
        let a = view(vec![[-0.9, -0.9], [0.9, 0.9]], vec![1.0, 1.0], vec![vec![2.0], vec![4.0]]);
        let b = view(vec![[0.5, 0.5], [0.51, 0.51]], vec![1.0, 3.0], vec![vec![6.0], vec![8.0]]);
        let r = depth_visibility_aggregate(&[a, b], (4, 4), 0.5).unwrap();
        assert_eq!(r.weights, vec![vec![0.5, 1.0], vec![0.5, 0.0]]);
        assert_eq!(r.features, vec![vec![4.0], vec![4.0]]);
        for i in 0..2 {
            assert_eq!(r.weights.iter().map(|w| w[i]).sum::<f64>(), 1.0);
        }
    }

    #[test]
    fn reference_depth_overrides_buffer() {
        let mut v = view(vec![[0.0, 0.0]], vec![5.0], vec![vec![1.0]]);
        v.reference_depth = Some(vec![2.0; 4]);
        let r = depth_visibility_aggregate(&[v], (2, 2), 0.1).unwrap();
        assert_eq!(r.visible, vec![vec![false]]);
    }

    #[test]
    fn empty_and_invalid_inputs() {
        assert!(depth_visibility_aggregate(&[], (4, 4), 0.1).unwrap().features.is_empty());
        let v = view(vec![[2.0, 0.0]], vec![1.0], vec![vec![0.0]]);
        assert!(depth_visibility_aggregate(&[v], (4, 4), 0.1).is_err());
        let v = view(vec![[0.0, 0.0]], vec![1.0], vec![vec![0.0]]);
        assert!(depth_visibility_aggregate(&[v], (4, 4), 0.0).is_err());
    }

    #[test]
    fn cell_mapping_edges() {
        assert_eq!(grid_cell([-1.0, -1.0], 4, 4), (0, 0));
        assert_eq!(grid_cell([1.0, 1.0], 4, 4), (3, 3));
        assert_eq!(grid_cell([0.0, -0.5], 4, 4), (2, 1));
    }
}
