//! Successive approximation in characteristic coordinates.
//!
//! With `G(xi, eta, t) = k(xi + eta, xi - eta, t)` and `delta`, `delta_c`
//! the coefficients `beta`, `beta_c` in the same coordinates, write
//!
//! ```text
//! F   = (delta + p1 d/dt) G   + (delta_c + p2 d/dt) G_c
//! F_c = (delta + q1 d/dt) G_c + (-delta_c + q2 d/dt) G
//! ```
//!
//! Dirichlet kernels satisfy
//!
//! ```text
//! G(xi, eta) = -1/2 int_eta^xi delta(s, 0) ds + int_eta^xi int_0^eta F
//! ```
//!
//! and Neumann kernels add `-int_0^eta delta(s, 0) ds` and
//! `2 int_0^eta int_0^s F(s, r) dr ds`, the value of `G` on `y = 0` obtained
//! from `G_xi = G_eta` there. `G_c` is analogous with `+` signs on the
//! `delta_c` source terms. Each iterate `G_{n+1}` is the integral operator
//! applied to `G_n`, starting from the source terms `G_0`.
//!
//! Inner integrals use cumulative trapezoid sums, so one iteration costs
//! `O(n_xi * n_eta * n_t)`. Time derivatives of iterates use 4th-order finite
//! differences on the time grid.

use log::debug;
use num_complex::Complex64;
use rayon::prelude::*;

use super::dominance::{DominanceReport, TermAuditor};
use super::{KernelField, KernelKind, SeriesTerm};
use crate::error::{Error, Result};
use crate::grid::TriangleTimeGrid;
use crate::problem::{beta_pair, time_coefficients, BoundaryKind, NormalizedPlant, TargetSpec};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Stop once the sup-norm of the latest term pair drops below this.
    pub tol: f64,
    pub max_iter: usize,
    /// Keep every series term (needed by [`super::audit_dominance`]).
    pub retain_terms: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 40,
            retain_terms: false,
        }
    }
}

pub fn solve_kernel_dirichlet(
    np: &NormalizedPlant,
    tgt: &TargetSpec,
    grid: &TriangleTimeGrid,
    opts: &SolveOptions,
) -> Result<(KernelField, DominanceReport)> {
    solve(np, tgt, grid, opts, KernelKind::Forward, BoundaryKind::Dirichlet)
}

pub fn solve_kernel_neumann(
    np: &NormalizedPlant,
    tgt: &TargetSpec,
    grid: &TriangleTimeGrid,
    opts: &SolveOptions,
) -> Result<(KernelField, DominanceReport)> {
    solve(np, tgt, grid, opts, KernelKind::Forward, BoundaryKind::Neumann)
}

/// Forward kernel for the plant's own boundary kind.
pub fn solve_kernel(
    np: &NormalizedPlant,
    tgt: &TargetSpec,
    grid: &TriangleTimeGrid,
    opts: &SolveOptions,
) -> Result<(KernelField, DominanceReport)> {
    solve(np, tgt, grid, opts, KernelKind::Forward, np.boundary)
}

/// Kernel `(l, l_c)` of the inverse transform, for the plant's boundary kind.
pub fn solve_inverse_kernel(
    np: &NormalizedPlant,
    tgt: &TargetSpec,
    grid: &TriangleTimeGrid,
    opts: &SolveOptions,
) -> Result<(KernelField, DominanceReport)> {
    solve(np, tgt, grid, opts, KernelKind::Inverse, np.boundary)
}

/// `delta`, `delta_c` on the characteristic grid, one rectangular
/// `n_xi x n_eta` array per time slice.
pub(crate) struct DeltaTables {
    pub delta: Vec<Vec<f64>>,
    pub delta_c: Vec<Vec<f64>>,
}

impl DeltaTables {
    pub fn build(
        np: &NormalizedPlant,
        tgt: &TargetSpec,
        grid: &TriangleTimeGrid,
        kind: KernelKind,
    ) -> Result<Self> {
        // every x and y on the characteristic grid is a multiple of h
        let n_fine = grid.n_xi();
        let coords: Vec<f64> = (0..n_fine).map(|m| m as f64 / (n_fine - 1) as f64).collect();
        let ts = grid.t_nodes();
        let b = np.sample_b(&coords, &ts)?;
        let f = tgt.sample_f(&coords, &ts)?;
        let (n_xi, n_eta) = (grid.n_xi(), grid.n_eta());
        let mut delta = vec![vec![0.0; n_xi * n_eta]; grid.n_t];
        let mut delta_c = vec![vec![0.0; n_xi * n_eta]; grid.n_t];
        for l in 0..grid.n_t {
            for a in 0..n_xi {
                for bi in 0..=grid.eta_limit(a) {
                    let (x, y) = (a + bi, a - bi);
                    let diff: Complex64 = match kind {
                        KernelKind::Forward => b[l][y] - f[l][x],
                        // inverse kernel: -beta(y, x, t)
                        KernelKind::Inverse => -(b[l][x] - f[l][y]),
                    };
                    let (d, dc) = beta_pair(np.a_r, np.a_i, diff.re, diff.im);
                    delta[l][a * n_eta + bi] = d;
                    delta_c[l][a * n_eta + bi] = dc;
                }
            }
        }
        Ok(Self { delta, delta_c })
    }

    /// Smallest `N >= 1` with `|delta|, |delta_c| <= N / (1 - t)` on the grid.
    pub fn dominance_constant(&self, grid: &TriangleTimeGrid) -> f64 {
        let mut n = 1.0f64;
        for l in 0..grid.n_t {
            let weight = 1.0 - grid.t(l);
            for (d, dc) in self.delta[l].iter().zip(&self.delta_c[l]) {
                n = n.max(d.abs() * weight).max(dc.abs() * weight);
            }
        }
        n
    }
}

fn check_preconditions(np: &NormalizedPlant, tgt: &TargetSpec, grid: &TriangleTimeGrid, opts: &SolveOptions) -> Result<()> {
    if !np.b.analytic_in_t || !tgt.f.analytic_in_t {
        return Err(Error::NotAnalytic);
    }
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidGrid(format!("tolerance must be positive, got {}", opts.tol)));
    }
    if grid.t0 > np.t0 + 1e-12 {
        return Err(Error::InvalidGrid(format!(
            "kernel horizon {} exceeds the plant horizon t0 = {}",
            grid.t0, np.t0
        )));
    }
    if grid.n_t == 1 {
        let time_dependent = np.b.depends_on(crate::expr::Var::T) || tgt.f.depends_on(crate::expr::Var::T);
        if time_dependent {
            return Err(Error::InvalidGrid(
                "coefficients depend on t; a single time node is not enough".into(),
            ));
        }
    }
    Ok(())
}

fn solve(
    np: &NormalizedPlant,
    tgt: &TargetSpec,
    grid: &TriangleTimeGrid,
    opts: &SolveOptions,
    kind: KernelKind,
    boundary: BoundaryKind,
) -> Result<(KernelField, DominanceReport)> {
    check_preconditions(np, tgt, grid, opts)?;
    let tables = DeltaTables::build(np, tgt, grid, kind)?;
    let (p1, p2, q1, q2) = time_coefficients(np.a_r, np.a_i);
    let sweep = Sweep {
        grid: *grid,
        boundary,
        p1,
        p2,
        q1,
        q2,
    };
    let n_dominance = tables.dominance_constant(grid);
    let mut auditor = TermAuditor::new(*grid, n_dominance);

    let (mut term, mut term_c) = sweep.source_terms(&tables);
    let mut sum = term.clone();
    let mut sum_c = term_c.clone();
    let mut retained = opts.retain_terms.then(Vec::new);

    let mut iterations = 0;
    let mut last_sup;
    loop {
        auditor.record(iterations, &term, &term_c);
        if let Some(r) = retained.as_mut() {
            r.push(sweep.to_triangle_term(&term, &term_c));
        }
        last_sup = sweep.sup_norm(&term, &term_c);
        debug!("kernel term {iterations}: sup = {last_sup:e}");
        if last_sup < opts.tol || iterations >= opts.max_iter {
            break;
        }
        let (next, next_c) = sweep.apply_operator(&tables, &term, &term_c);
        term = next;
        term_c = next_c;
        iterations += 1;
        for l in 0..grid.n_t {
            for (s, v) in sum[l].iter_mut().zip(&term[l]) {
                *s += v;
            }
            for (s, v) in sum_c[l].iter_mut().zip(&term_c[l]) {
                *s += v;
            }
        }
    }

    let mut field = KernelField::zeros(kind, boundary, *grid);
    let n_eta = grid.n_eta();
    for l in 0..grid.n_t {
        for i in 0..grid.n_x {
            for j in 0..=i {
                let cell = (i + j) * n_eta + (i - j);
                field.set(i, j, l, sum[l][cell], sum_c[l][cell]);
            }
        }
    }
    field.n_iterations = iterations;
    field.converged = last_sup < opts.tol;
    field.sup_norm_last_term = last_sup;
    field.series_terms = retained;
    Ok((field, auditor.finish()))
}

type Slices = Vec<Vec<f64>>;

struct Sweep {
    grid: TriangleTimeGrid,
    boundary: BoundaryKind,
    p1: f64,
    p2: f64,
    q1: f64,
    q2: f64,
}

impl Sweep {
    fn source_terms(&self, tables: &DeltaTables) -> (Slices, Slices) {
        let g = &self.grid;
        let (n_xi, n_eta, h) = (g.n_xi(), g.n_eta(), g.h());
        let per_slice = |l: usize| {
            // running integrals of delta, delta_c along the diagonal eta = 0
            let mut q = vec![0.0; n_xi];
            let mut qc = vec![0.0; n_xi];
            for a in 1..n_xi {
                let (prev, cur) = ((a - 1) * n_eta, a * n_eta);
                q[a] = q[a - 1] + 0.5 * h * (tables.delta[l][prev] + tables.delta[l][cur]);
                qc[a] = qc[a - 1] + 0.5 * h * (tables.delta_c[l][prev] + tables.delta_c[l][cur]);
            }
            let mut g0 = vec![0.0; n_xi * n_eta];
            let mut gc0 = vec![0.0; n_xi * n_eta];
            for a in 0..n_xi {
                for b in 0..=g.eta_limit(a) {
                    let (v, vc) = match self.boundary {
                        BoundaryKind::Dirichlet => (-0.5 * (q[a] - q[b]), 0.5 * (qc[a] - qc[b])),
                        BoundaryKind::Neumann => (-0.5 * (q[a] + q[b]), 0.5 * (qc[a] + qc[b])),
                    };
                    g0[a * n_eta + b] = v;
                    gc0[a * n_eta + b] = vc;
                }
            }
            (g0, gc0)
        };
        (0..g.n_t).into_par_iter().map(per_slice).unzip()
    }

    /// One application of the integral operator: `(G_n, G_c,n) -> (G_{n+1}, G_c,n+1)`.
    fn apply_operator(&self, tables: &DeltaTables, term: &Slices, term_c: &Slices) -> (Slices, Slices) {
        let g = &self.grid;
        (0..g.n_t)
            .into_par_iter()
            .map(|l| {
                let dt = time_derivative(term, l, g.dt());
                let dt_c = time_derivative(term_c, l, g.dt());
                let (delta, delta_c) = (&tables.delta[l], &tables.delta_c[l]);
                let len = term[l].len();
                let mut f = vec![0.0; len];
                let mut f_c = vec![0.0; len];
                for idx in 0..len {
                    let (gv, gc) = (term[l][idx], term_c[l][idx]);
                    let (gt, gct) = (dt.as_ref().map_or(0.0, |d| d[idx]), dt_c.as_ref().map_or(0.0, |d| d[idx]));
                    f[idx] = delta[idx] * gv + delta_c[idx] * gc + self.p1 * gt + self.p2 * gct;
                    f_c[idx] = delta[idx] * gc - delta_c[idx] * gv + self.q1 * gct + self.q2 * gt;
                }
                (self.integrate(&f), self.integrate(&f_c))
            })
            .unzip()
    }

    /// `int_eta^xi int_0^eta F ds dtau`, plus `2 int_0^eta int_0^tau F ds dtau`
    /// for Neumann kernels.
    fn integrate(&self, f: &[f64]) -> Vec<f64> {
        let g = &self.grid;
        let (n_xi, n_eta, h) = (g.n_xi(), g.n_eta(), g.h());
        // inner[a, b] = int_0^{eta_b} F(xi_a, s) ds
        let mut inner = vec![0.0; n_xi * n_eta];
        for a in 0..n_xi {
            let row = a * n_eta;
            for b in 1..=g.eta_limit(a) {
                inner[row + b] = inner[row + b - 1] + 0.5 * h * (f[row + b - 1] + f[row + b]);
            }
        }
        let mut out = vec![0.0; n_xi * n_eta];
        for b in 0..n_eta {
            // sweep xi from the edge y = 0 (xi = eta) outwards
            let mut acc = 0.0;
            let mut a = b + 1;
            while a < n_xi && b <= g.eta_limit(a) {
                acc += 0.5 * h * (inner[(a - 1) * n_eta + b] + inner[a * n_eta + b]);
                out[a * n_eta + b] = acc;
                a += 1;
            }
        }
        if self.boundary == BoundaryKind::Neumann {
            let mut edge = vec![0.0; n_eta];
            for b in 1..n_eta {
                let diag = |c: usize| inner[c * n_eta + c];
                edge[b] = edge[b - 1] + h * (diag(b - 1) + diag(b));
            }
            for a in 0..n_xi {
                for b in 0..=g.eta_limit(a) {
                    out[a * n_eta + b] += edge[b];
                }
            }
        }
        out
    }

    fn sup_norm(&self, term: &Slices, term_c: &Slices) -> f64 {
        term.iter()
            .chain(term_c)
            .flat_map(|s| s.iter())
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }

    fn to_triangle_term(&self, term: &Slices, term_c: &Slices) -> SeriesTerm {
        let g = &self.grid;
        let n_eta = g.n_eta();
        let mut out = SeriesTerm {
            g: Vec::with_capacity(g.triangle_len() * g.n_t),
            g_c: Vec::with_capacity(g.triangle_len() * g.n_t),
        };
        for l in 0..g.n_t {
            for i in 0..g.n_x {
                for j in 0..=i {
                    let cell = (i + j) * n_eta + (i - j);
                    out.g.push(term[l][cell]);
                    out.g_c.push(term_c[l][cell]);
                }
            }
        }
        out
    }
}

/// Fourth-order finite-difference `d/dt` of slice `l`; `None` when there is a
/// single time node.
fn time_derivative(slices: &Slices, l: usize, dt: f64) -> Option<Vec<f64>> {
    let n_t = slices.len();
    if n_t == 1 {
        return None;
    }
    let scale = 1.0 / (12.0 * dt);
    let combine = |coeffs: &[(usize, f64)], sign: f64| -> Vec<f64> {
        let len = slices[0].len();
        (0..len)
            .map(|idx| sign * scale * coeffs.iter().map(|&(m, c)| c * slices[m][idx]).sum::<f64>())
            .collect()
    };
    let last = n_t - 1;
    Some(match l {
        0 => combine(&[(0, -25.0), (1, 48.0), (2, -36.0), (3, 16.0), (4, -3.0)], 1.0),
        1 => combine(&[(0, -3.0), (1, -10.0), (2, 18.0), (3, -6.0), (4, 1.0)], 1.0),
        _ if l == last => combine(
            &[(last, -25.0), (last - 1, 48.0), (last - 2, -36.0), (last - 3, 16.0), (last - 4, -3.0)],
            -1.0,
        ),
        _ if l == last - 1 => combine(
            &[(last, -3.0), (last - 1, -10.0), (last - 2, 18.0), (last - 3, -6.0), (last - 4, 1.0)],
            -1.0,
        ),
        _ => combine(&[(l - 2, 1.0), (l - 1, -8.0), (l + 1, 8.0), (l + 2, -1.0)], 1.0),
    })
}
