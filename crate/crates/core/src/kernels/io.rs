//! Kernel files: a CSV table `x,y,t,k,k_c` over the triangle nodes plus a
//! JSON metadata sidecar. Floats are written with 17 significant digits so a
//! write/read cycle is bit-exact.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DominanceReport, KernelField, KernelKind};
use crate::error::{Error, Result};
use crate::grid::TriangleTimeGrid;
use crate::problem::BoundaryKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelMeta {
    pub kind: KernelKind,
    pub boundary: BoundaryKind,
    pub n_x: usize,
    pub n_t: usize,
    pub t0: f64,
    pub n_iterations: usize,
    pub converged: bool,
    pub sup_norm_last_term: f64,
    #[serde(default)]
    pub n_const: Option<f64>,
    #[serde(default)]
    pub m_const: Option<f64>,
}

pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_kernel(
    field: &KernelField,
    dominance: Option<&DominanceReport>,
    csv_path: &Path,
    meta_path: &Path,
) -> Result<()> {
    let g = field.grid;
    let mut out = String::with_capacity(g.triangle_len() * g.n_t * 5 * 24);
    out.push_str("x,y,t,k,k_c\n");
    for l in 0..g.n_t {
        for i in 0..g.n_x {
            for j in 0..=i {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{}",
                    fmt_f64(g.x(i)),
                    fmt_f64(g.x(j)),
                    fmt_f64(g.t(l)),
                    fmt_f64(field.k(i, j, l)),
                    fmt_f64(field.k_c(i, j, l))
                );
            }
        }
    }
    fs::write(csv_path, out)?;
    let meta = KernelMeta {
        kind: field.kind,
        boundary: field.boundary,
        n_x: g.n_x,
        n_t: g.n_t,
        t0: g.t0,
        n_iterations: field.n_iterations,
        converged: field.converged,
        sup_norm_last_term: field.sup_norm_last_term,
        n_const: dominance.map(|d| d.n_const),
        m_const: dominance.map(|d| d.m_const),
    };
    fs::write(meta_path, serde_json::to_string_pretty(&meta)?)?;
    Ok(())
}

pub fn read_kernel(csv_path: &Path, meta_path: &Path) -> Result<(KernelField, KernelMeta)> {
    let meta: KernelMeta = serde_json::from_str(&fs::read_to_string(meta_path)?)?;
    let grid = TriangleTimeGrid::new(meta.n_x, meta.n_t, meta.t0)?;
    let mut field = KernelField::zeros(meta.kind, meta.boundary, grid);
    field.n_iterations = meta.n_iterations;
    field.converged = meta.converged;
    field.sup_norm_last_term = meta.sup_norm_last_term;

    let text = fs::read_to_string(csv_path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some("x,y,t,k,k_c") => {}
        other => return Err(Error::KernelFormat(format!("unexpected header {other:?}"))),
    }
    let expected = grid.triangle_len() * grid.n_t;
    let mut count = 0;
    for l in 0..grid.n_t {
        for i in 0..grid.n_x {
            for j in 0..=i {
                let line = lines
                    .next()
                    .ok_or_else(|| Error::KernelFormat(format!("expected {expected} rows, found {count}")))?;
                let values = line
                    .split(',')
                    .map(|s| s.trim().parse::<f64>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|e| Error::KernelFormat(format!("row {}: {e}", count + 2)))?;
                if values.len() != 5 {
                    return Err(Error::KernelFormat(format!("row {}: expected 5 columns", count + 2)));
                }
                let coords = [grid.x(i), grid.x(j), grid.t(l)];
                if values[..3].iter().zip(coords).any(|(v, c)| (v - c).abs() > 1e-12) {
                    return Err(Error::KernelFormat(format!(
                        "row {}: node ({}, {}, {}) does not match the grid",
                        count + 2,
                        values[0],
                        values[1],
                        values[2]
                    )));
                }
                field.set(i, j, l, values[3], values[4]);
                count += 1;
            }
        }
    }
    if lines.any(|l| !l.trim().is_empty()) {
        return Err(Error::KernelFormat(format!("more than {expected} rows")));
    }
    Ok((field, meta))
}
