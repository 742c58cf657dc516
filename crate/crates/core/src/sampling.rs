//! Collocation sets on the unit square.

use crate::error::{Error, Result};
use crate::problem::Point;

/// Interior points, boundary points and the boundary distance matrix.
#[derive(Clone, Debug)]
pub struct CollocationSet {
    pub interior: Vec<Point>,
    pub boundary: Vec<Point>,
    boundary_dist: Vec<f64>,
}

fn is_on_boundary(p: Point) -> bool {
    p.iter().any(|&c| c == 0.0 || c == 1.0)
}

impl CollocationSet {
    /// Builds a set from explicit point lists and fills the distance matrix.
    pub fn new(interior: Vec<Point>, boundary: Vec<Point>) -> Result<Self> {
        if let Some(p) = interior.iter().find(|p| !p.iter().all(|&c| c > 0.0 && c < 1.0)) {
            return Err(Error::InvalidParameter(format!("interior point {p:?} not strictly inside the unit square")));
        }
        if let Some(p) = boundary.iter().find(|&&p| !is_on_boundary(p) || p.iter().any(|&c| !(0.0..=1.0).contains(&c))) {
            return Err(Error::InvalidParameter(format!("boundary point {p:?} not on the boundary")));
        }
        let m = boundary.len();
        let mut boundary_dist = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..i {
                let d = distance(boundary[i], boundary[j]);
                if d == 0.0 {
                    return Err(Error::CoincidentPoints(j, i));
                }
                boundary_dist[i * m + j] = d;
                boundary_dist[j * m + i] = d;
            }
        }
        Ok(Self {
            interior,
            boundary,
            boundary_dist,
        })
    }

    /// Splits one point cloud into strict-interior and boundary points.
    pub fn from_points(points: &[Point]) -> Result<Self> {
        let (boundary, interior): (Vec<Point>, Vec<Point>) = points.iter().partition(|&&p| is_on_boundary(p));
        Self::new(interior, boundary)
    }

    /// Interior points of one grid with boundary points of another.
    pub fn split(interior_n: usize, boundary_n: usize) -> Result<Self> {
        let interior = tensor_grid(interior_n)?.interior;
        let boundary = tensor_grid(boundary_n)?.boundary;
        Self::new(interior, boundary)
    }

    pub fn n_interior(&self) -> usize {
        self.interior.len()
    }

    pub fn n_boundary(&self) -> usize {
        self.boundary.len()
    }

    /// `|z_i - z_j|` for boundary points `i` and `j`.
    pub fn boundary_dist(&self, i: usize, j: usize) -> f64 {
        self.boundary_dist[i * self.boundary.len() + j]
    }

    /// Row-major `m̄ × m̄` distance matrix.
    pub fn boundary_dist_matrix(&self) -> &[f64] {
        &self.boundary_dist
    }
}

pub fn distance(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn grid_points(n: usize) -> Vec<Point> {
    let coord = move |i: usize| i as f64 / (n - 1) as f64;
    (0..n)
        .flat_map(|j| (0..n).map(move |i| [coord(i), coord(j)]))
        .collect()
}

/// The uniform `n × n` grid `{(i/(n-1), j/(n-1))}` split into interior and boundary.
pub fn tensor_grid(n: usize) -> Result<CollocationSet> {
    if n < 2 {
        return Err(Error::GridTooSmall(n));
    }
    CollocationSet::from_points(&grid_points(n))
}

/// Nodes of the per-cube `r`-point tensor grids over all dyadic cubes of
/// side `2^-k`, with shared faces merged: a `(2^k (r-1) + 1)²` grid.
pub fn dyadic_grid(k: u32, r: usize) -> Result<Vec<Point>> {
    if r < 2 {
        return Err(Error::GridTooSmall(r));
    }
    let per_axis = (1usize << k) * (r - 1) + 1;
    Ok(grid_points(per_axis))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tensor_grid_counts() {
        let g = tensor_grid(5).unwrap();
        assert_eq!((g.n_interior(), g.n_boundary()), (9, 16));
        let g = tensor_grid(2).unwrap();
        assert_eq!((g.n_interior(), g.n_boundary()), (0, 4));
        let g = tensor_grid(30).unwrap();
        assert_eq!((g.n_interior(), g.n_boundary()), (784, 116));
    }

    #[test]
    fn rejects_small_grids() {
        assert!(matches!(tensor_grid(1), Err(Error::GridTooSmall(1))));
        assert!(matches!(dyadic_grid(3, 1), Err(Error::GridTooSmall(1))));
    }

    #[test]
    fn dyadic_grid_sizes() {
        assert_eq!(dyadic_grid(0, 2).unwrap().len(), 4);
        let g = dyadic_grid(1, 2).unwrap();
        assert_eq!(g.len(), 9);
        assert!(g.contains(&[0.5, 0.5]));
        assert_eq!(dyadic_grid(2, 3).unwrap().len(), 81);
    }

    #[test]
    fn dyadic_grids_nest_for_r2() {
        for k in 0..4 {
            let coarse = dyadic_grid(k, 2).unwrap();
            let fine = dyadic_grid(k + 1, 2).unwrap();
            assert!(coarse.iter().all(|p| fine.contains(p)));
        }
    }

    #[test]
    fn distance_matrix_is_symmetric() {
        let g = tensor_grid(6).unwrap();
        let m = g.n_boundary();
        for i in 0..m {
            assert_eq!(g.boundary_dist(i, i), 0.0);
            for j in 0..m {
                assert_eq!(g.boundary_dist(i, j), g.boundary_dist(j, i));
                if i != j {
                    assert!(g.boundary_dist(i, j) > 0.0);
                }
            }
        }
        let (a, b) = (g.boundary[3], g.boundary[11]);
        let d = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
        assert!((g.boundary_dist(3, 11) - d).abs() < 1e-15);
    }

    #[test]
    fn coincident_boundary_points_rejected() {
        let err = CollocationSet::new(vec![], vec![[0.0, 0.5], [0.0, 0.5]]).unwrap_err();
        assert!(matches!(err, Error::CoincidentPoints(0, 1)));
    }

    #[test]
    fn misplaced_points_rejected() {
        assert!(CollocationSet::new(vec![[0.0, 0.5]], vec![]).is_err());
        assert!(CollocationSet::new(vec![], vec![[0.5, 0.5]]).is_err());
    }
}
