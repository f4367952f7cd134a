use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform grid on the Goursat triangle `0 <= y <= x <= 1` times `[0, t0]`.
///
/// Kernels are computed in the characteristic coordinates
/// `xi = (x + y) / 2`, `eta = (x - y) / 2`, on a rectangular `(xi, eta)`
/// array with spacing `h = dx / 2` whose infeasible corner
/// (`eta > xi` or `xi + eta > 1`) is masked out. Every `(x_i, y_j)` node of
/// the spatial grid is the `(xi, eta)` node `(i + j, i - j)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TriangleTimeGrid {
    /// Spatial nodes on `[0, 1]`, shared with the state grid.
    pub n_x: usize,
    pub n_t: usize,
    pub t0: f64,
}

impl TriangleTimeGrid {
    pub fn new(n_x: usize, n_t: usize, t0: f64) -> Result<Self> {
        if n_x < 3 {
            return Err(Error::InvalidGrid(format!("need at least 3 spatial nodes, got {n_x}")));
        }
        if n_t != 1 && n_t < 5 {
            return Err(Error::InvalidGrid(format!(
                "need 1 (time-independent) or at least 5 time nodes for 4th-order differences, got {n_t}"
            )));
        }
        if !(t0 > 0.0 && t0 < 1.0) {
            return Err(Error::InvalidGrid(format!("t0 must lie in (0, 1), got {t0}")));
        }
        Ok(Self { n_x, n_t, t0 })
    }

    pub fn n_xi(&self) -> usize {
        2 * (self.n_x - 1) + 1
    }

    pub fn n_eta(&self) -> usize {
        self.n_x
    }

    pub fn dx(&self) -> f64 {
        1.0 / (self.n_x - 1) as f64
    }

    /// Spacing of the characteristic grid.
    pub fn h(&self) -> f64 {
        0.5 * self.dx()
    }

    pub fn dt(&self) -> f64 {
        if self.n_t == 1 {
            0.0
        } else {
            self.t0 / (self.n_t - 1) as f64
        }
    }

    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.dx()
    }

    pub fn t(&self, l: usize) -> f64 {
        l as f64 * self.dt()
    }

    pub fn x_nodes(&self) -> Vec<f64> {
        (0..self.n_x).map(|i| self.x(i)).collect()
    }

    pub fn t_nodes(&self) -> Vec<f64> {
        (0..self.n_t).map(|l| self.t(l)).collect()
    }

    /// Upper `eta` index admitted at column `a` of the characteristic grid.
    pub fn eta_limit(&self, a: usize) -> usize {
        let m = self.n_x - 1;
        a.min(2 * m - a)
    }

    /// Number of `(x_i, y_j)` nodes with `j <= i`.
    pub fn triangle_len(&self) -> usize {
        self.n_x * (self.n_x + 1) / 2
    }

    #[inline]
    pub fn tri_index(i: usize, j: usize) -> usize {
        debug_assert!(j <= i);
        i * (i + 1) / 2 + j
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_degenerate_grids() {
        assert!(TriangleTimeGrid::new(2, 5, 0.5).is_err());
        assert!(TriangleTimeGrid::new(11, 3, 0.5).is_err());
        assert!(TriangleTimeGrid::new(11, 5, 1.0).is_err());
        assert!(TriangleTimeGrid::new(11, 1, 0.5).is_ok());
    }

    #[test]
    fn characteristic_grid_covers_the_triangle() {
        let g = TriangleTimeGrid::new(6, 1, 0.5).unwrap();
        let h = g.h();
        let mut seen = 0;
        for a in 0..g.n_xi() {
            for b in 0..=g.eta_limit(a) {
                let (xi, eta) = (a as f64 * h, b as f64 * h);
                let (x, y) = (xi + eta, xi - eta);
                assert!((0.0..=1.0 + 1e-12).contains(&x) && y >= -1e-12 && y <= x + 1e-12);
                if (a + b) % 2 == 0 {
                    seen += 1;
                }
            }
        }
        // every spatial (x_i, y_j) node appears exactly once
        assert_eq!(seen, g.triangle_len());
    }
}
