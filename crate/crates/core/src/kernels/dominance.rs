//! Majorant bounds for the successive-approximation series.
//!
//! With `N >= 1` such that `|delta|, |delta_c| <= N / (1 - t)`, every term
//! obeys `|G_n| <= 4^n (xi eta)^n N^(n+1) / n! * (1 - t)^-(n+1)`, and the sum
//! is bounded by `M exp(M (x^2 - y^2))` with `M = N / (1 - t0)`.

use serde::{Deserialize, Serialize};

use super::solver::DeltaTables;
use super::KernelField;
use crate::error::{Error, Result};
use crate::grid::TriangleTimeGrid;
use crate::problem::{NormalizedPlant, TargetSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermBound {
    pub n: usize,
    /// Sup over the grid of `max(|G_n|, |G_c,n|)`.
    pub sup_abs: f64,
    /// Theoretical bound evaluated where the sup is attained.
    pub bound_at_sup: f64,
    /// Largest `|G_n| / bound` over the grid; at most 1 when the bound holds.
    pub worst_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominanceReport {
    pub n_const: f64,
    /// `N / (1 - t0)`.
    pub m_const: f64,
    pub per_term_bounds: Vec<TermBound>,
    pub all_satisfied: bool,
}

fn ln_factorial(n: usize) -> f64 {
    (1..=n).map(|k| (k as f64).ln()).sum()
}

/// Log of the term-`n` bound at `xi * eta = prod`, time `t`.
fn ln_bound(n: usize, prod: f64, t: f64, n_const: f64) -> f64 {
    let n_f = n as f64;
    let ln_prod = if n == 0 { 0.0 } else { n_f * prod.ln() };
    n_f * 4f64.ln() + ln_prod + (n_f + 1.0) * n_const.ln() - ln_factorial(n) - (n_f + 1.0) * (1.0 - t).ln()
}

/// Accumulates per-term statistics while the solver runs.
pub(crate) struct TermAuditor {
    grid: TriangleTimeGrid,
    n_const: f64,
    terms: Vec<TermBound>,
}

impl TermAuditor {
    pub fn new(grid: TriangleTimeGrid, n_const: f64) -> Self {
        Self {
            grid,
            n_const,
            terms: Vec::new(),
        }
    }

    /// Records a term stored on the characteristic grid.
    pub fn record(&mut self, n: usize, term: &[Vec<f64>], term_c: &[Vec<f64>]) {
        let g = self.grid;
        let (n_eta, h) = (g.n_eta(), g.h());
        let points = (0..g.n_t).flat_map(move |l| {
            (0..g.n_xi()).flat_map(move |a| (0..=g.eta_limit(a)).map(move |b| (l, a, b)))
        });
        let stats = scan(points.map(|(l, a, b)| {
            let idx = a * n_eta + b;
            let value = term[l][idx].abs().max(term_c[l][idx].abs());
            (value, (a as f64 * h) * (b as f64 * h), g.t(l))
        }), n, self.n_const);
        self.terms.push(stats);
    }

    pub fn finish(self) -> DominanceReport {
        report(self.n_const, self.grid.t0, self.terms)
    }
}

fn scan(points: impl Iterator<Item = (f64, f64, f64)>, n: usize, n_const: f64) -> TermBound {
    let mut out = TermBound {
        n,
        sup_abs: 0.0,
        bound_at_sup: 0.0,
        worst_ratio: 0.0,
    };
    for (value, prod, t) in points {
        if value == 0.0 {
            continue;
        }
        let ln_b = ln_bound(n, prod, t, n_const);
        let ratio = if ln_b == f64::NEG_INFINITY {
            f64::INFINITY
        } else {
            (value.ln() - ln_b).exp()
        };
        out.worst_ratio = out.worst_ratio.max(ratio);
        if value > out.sup_abs {
            out.sup_abs = value;
            out.bound_at_sup = ln_b.exp();
        }
    }
    out
}

fn report(n_const: f64, t0: f64, terms: Vec<TermBound>) -> DominanceReport {
    // a tiny relative allowance for rounding in the term values themselves
    let all_satisfied = terms.iter().all(|t| t.worst_ratio <= 1.0 + 1e-12);
    DominanceReport {
        n_const,
        m_const: n_const / (1.0 - t0),
        per_term_bounds: terms,
        all_satisfied,
    }
}

/// Re-checks the dominance bounds from the series terms retained on `field`.
pub fn audit_dominance(field: &KernelField, np: &NormalizedPlant, tgt: &TargetSpec) -> Result<DominanceReport> {
    let terms = field.series_terms.as_ref().ok_or(Error::MissingSeriesTerms)?;
    let g = field.grid;
    let n_const = DeltaTables::build(np, tgt, &g, field.kind)?.dominance_constant(&g);
    let per_term = terms
        .iter()
        .enumerate()
        .map(|(n, term)| {
            let points = (0..g.n_t).flat_map(move |l| (0..g.n_x).flat_map(move |i| (0..=i).map(move |j| (l, i, j))));
            scan(
                points.map(|(l, i, j)| {
                    let idx = l * g.triangle_len() + TriangleTimeGrid::tri_index(i, j);
                    let (x, y) = (g.x(i), g.x(j));
                    let prod = 0.25 * (x * x - y * y);
                    (term.g[idx].abs().max(term.g_c[idx].abs()), prod, g.t(l))
                }),
                n,
                n_const,
            )
        })
        .collect();
    Ok(report(n_const, g.t0, per_term))
}

/// `max over the grid of |k| exp(-M (x^2 - y^2)) / M`, and the same for `k_c`.
/// Both are at most 1 when the exponential bound holds.
pub fn exponential_bound_ratio(field: &KernelField, m_const: f64) -> (f64, f64) {
    let g = field.grid;
    let mut worst = (0.0f64, 0.0f64);
    for l in 0..g.n_t {
        for i in 0..g.n_x {
            for j in 0..=i {
                let (x, y) = (g.x(i), g.x(j));
                let weight = (-m_const * (x * x - y * y)).exp() / m_const;
                worst.0 = worst.0.max(field.k(i, j, l).abs() * weight);
                worst.1 = worst.1.max(field.k_c(i, j, l).abs() * weight);
            }
        }
    }
    worst
}
