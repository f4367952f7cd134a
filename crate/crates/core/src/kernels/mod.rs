//! Gain kernels of the backstepping transform.
//!
//! The forward kernel pair `(k, k_c)` solves
//!
//! ```text
//! k_xx   = k_yy   + beta k   + beta_c k_c + p1 k_t   + p2 k_c,t
//! k_c,xx = k_c,yy - beta_c k + beta k_c   + q1 k_c,t + q2 k_t
//! ```
//!
//! on `0 <= y <= x <= 1`, with `k(x,x,t) = -1/2 int_0^x beta(s,s,t) ds`,
//! `k_c(x,x,t) = +1/2 int_0^x beta_c(s,s,t) ds` and either `k = k_c = 0` on
//! `y = 0` (Dirichlet) or `k_y = k_c,y = 0` on `y = 0` (Neumann). The
//! inverse pair `(l, l_c)` solves the same system with `beta(x, y, t)`
//! replaced by `-beta(y, x, t)` (likewise `beta_c`).
//!
//! In `xi = (x+y)/2`, `eta = (x-y)/2` the principal part becomes `G_xi,eta`
//! and the problem turns into Volterra integral equations solved by
//! successive approximation; see [`solver`].

mod dominance;
pub(crate) mod io;
mod solver;

pub use dominance::{audit_dominance, exponential_bound_ratio, DominanceReport, TermBound};
pub use io::{read_kernel, write_kernel, KernelMeta};
pub use solver::{solve_inverse_kernel, solve_kernel, solve_kernel_dirichlet, solve_kernel_neumann, SolveOptions};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::grid::TriangleTimeGrid;
use crate::problem::BoundaryKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Forward,
    Inverse,
}

/// One term `(G_n, G_c,n)` of the successive-approximation series, sampled on
/// the spatial triangle (packed like [`KernelField`]).
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesTerm {
    pub g: Vec<f64>,
    pub g_c: Vec<f64>,
}

/// Kernel pair sampled on the triangle at every time node.
///
/// Values are packed per time slice in row-major triangle order
/// (`(i, j)` with `j <= i`), see [`TriangleTimeGrid::tri_index`].
#[derive(Debug, Clone, PartialEq)]
pub struct KernelField {
    pub kind: KernelKind,
    pub boundary: BoundaryKind,
    pub grid: TriangleTimeGrid,
    pub(crate) k: Vec<f64>,
    pub(crate) k_c: Vec<f64>,
    pub series_terms: Option<Vec<SeriesTerm>>,
    pub n_iterations: usize,
    pub converged: bool,
    pub sup_norm_last_term: f64,
}

impl KernelField {
    pub fn zeros(kind: KernelKind, boundary: BoundaryKind, grid: TriangleTimeGrid) -> Self {
        let len = grid.triangle_len() * grid.n_t;
        Self {
            kind,
            boundary,
            grid,
            k: vec![0.0; len],
            k_c: vec![0.0; len],
            series_terms: None,
            n_iterations: 0,
            converged: true,
            sup_norm_last_term: 0.0,
        }
    }

    /// Samples a closed-form kernel pair `f(x, y, t) -> (k, k_c)`.
    pub fn from_fn<F>(kind: KernelKind, boundary: BoundaryKind, grid: TriangleTimeGrid, f: F) -> Self
    where
        F: Fn(f64, f64, f64) -> (f64, f64),
    {
        let mut field = Self::zeros(kind, boundary, grid);
        for l in 0..grid.n_t {
            for i in 0..grid.n_x {
                for j in 0..=i {
                    let (k, kc) = f(grid.x(i), grid.x(j), grid.t(l));
                    let idx = field.index(i, j, l);
                    field.k[idx] = k;
                    field.k_c[idx] = kc;
                }
            }
        }
        field
    }

    #[inline]
    fn index(&self, i: usize, j: usize, l: usize) -> usize {
        l * self.grid.triangle_len() + TriangleTimeGrid::tri_index(i, j)
    }

    /// `k(x_i, y_j, t_l)`, `j <= i`.
    #[inline]
    pub fn k(&self, i: usize, j: usize, l: usize) -> f64 {
        self.k[self.index(i, j, l)]
    }

    #[inline]
    pub fn k_c(&self, i: usize, j: usize, l: usize) -> f64 {
        self.k_c[self.index(i, j, l)]
    }

    pub fn set(&mut self, i: usize, j: usize, l: usize, k: f64, k_c: f64) {
        let idx = self.index(i, j, l);
        self.k[idx] = k;
        self.k_c[idx] = k_c;
    }

    pub fn sup_abs(&self) -> (f64, f64) {
        let sup = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        (sup(&self.k), sup(&self.k_c))
    }

    /// Kernel at time `t`, interpolated between time nodes with a cubic
    /// through the four nearest nodes (linear with two or three nodes).
    pub fn slice_at(&self, t: f64) -> KernelSlice {
        let n = self.grid.triangle_len();
        let (nodes, weights) = interpolation_weights(&self.grid, t);
        let mut k = vec![0.0; n];
        let mut k_c = vec![0.0; n];
        for (&l, &w) in nodes.iter().zip(&weights) {
            let base = l * n;
            for idx in 0..n {
                k[idx] += w * self.k[base + idx];
                k_c[idx] += w * self.k_c[base + idx];
            }
        }
        KernelSlice {
            n_x: self.grid.n_x,
            k,
            k_c,
        }
    }

    /// Feedback gains `k(1, y_j, t) - i k_c(1, y_j, t)` for every node `y_j`.
    pub fn boundary_gains(&self, t: f64) -> Vec<Complex64> {
        let g = self.grid;
        let last = g.n_x - 1;
        let (nodes, weights) = interpolation_weights(&g, t);
        (0..g.n_x)
            .map(|j| {
                nodes.iter().zip(&weights).fold(Complex64::new(0.0, 0.0), |acc, (&l, &w)| {
                    acc + w * Complex64::new(self.k(last, j, l), -self.k_c(last, j, l))
                })
            })
            .collect()
    }
}

fn interpolation_weights(grid: &TriangleTimeGrid, t: f64) -> (Vec<usize>, Vec<f64>) {
    let n_t = grid.n_t;
    if n_t == 1 {
        return (vec![0], vec![1.0]);
    }
    let dt = grid.dt();
    let s = (t / dt).clamp(0.0, (n_t - 1) as f64);
    let stencil = n_t.min(4);
    // left-most node of the stencil, centred on the interval containing s
    let cell = (s.floor() as usize).min(n_t - 2);
    let start = cell.saturating_sub((stencil - 2) / 2).min(n_t - stencil);
    let nodes: Vec<usize> = (start..start + stencil).collect();
    let weights = nodes
        .iter()
        .map(|&l| {
            nodes
                .iter()
                .filter(|&&m| m != l)
                .map(|&m| (s - m as f64) / (l as f64 - m as f64))
                .product()
        })
        .collect();
    (nodes, weights)
}

/// Kernel pair at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSlice {
    pub n_x: usize,
    pub k: Vec<f64>,
    pub k_c: Vec<f64>,
}

impl KernelSlice {
    #[inline]
    pub fn k(&self, i: usize, j: usize) -> f64 {
        self.k[TriangleTimeGrid::tri_index(i, j)]
    }

    #[inline]
    pub fn k_c(&self, i: usize, j: usize) -> f64 {
        self.k_c[TriangleTimeGrid::tri_index(i, j)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolation_reproduces_cubics_in_time() {
        let grid = TriangleTimeGrid::new(4, 9, 0.8).unwrap();
        let f = |t: f64| 1.0 - 2.0 * t + 3.0 * t * t - 0.5 * t * t * t;
        let field = KernelField::from_fn(KernelKind::Forward, BoundaryKind::Dirichlet, grid, |_, y, t| {
            (f(t) * y, -f(t))
        });
        for t in [0.0, 0.013, 0.31, 0.5, 0.79, 0.8] {
            let s = field.slice_at(t);
            assert!((s.k(3, 3) - f(t)).abs() < 1e-13, "t={t}");
            assert!((s.k_c(2, 1) + f(t)).abs() < 1e-13, "t={t}");
        }
    }

    #[test]
    fn single_slice_is_time_independent() {
        let grid = TriangleTimeGrid::new(4, 1, 0.8).unwrap();
        let field = KernelField::from_fn(KernelKind::Forward, BoundaryKind::Dirichlet, grid, |x, y, _| (x + y, x));
        let s = field.slice_at(0.5);
        assert_eq!(s.k(2, 1), field.k(2, 1, 0));
    }

    #[test]
    fn boundary_gains_match_slice() {
        let grid = TriangleTimeGrid::new(6, 7, 0.6).unwrap();
        let field = KernelField::from_fn(KernelKind::Forward, BoundaryKind::Neumann, grid, |x, y, t| {
            ((x * y + t).sin(), x - y * t)
        });
        let t = 0.237;
        let slice = field.slice_at(t);
        for (j, g) in field.boundary_gains(t).iter().enumerate() {
            assert!((g.re - slice.k(5, j)).abs() < 1e-14);
            assert!((g.im + slice.k_c(5, j)).abs() < 1e-14);
        }
    }
}
