//! Finite-difference residuals of the kernel equations and of the target
//! system.
//!
//! In complex form, with `K = k - i k_c`, the forward kernel satisfies
//! `a (K_xx - K_yy) = (b(y, t) - f(x, t)) K + K_t` and the inverse kernel
//! `a (L_xx - L_yy) = (f(y, t) - b(x, t)) L + L_t`. Writing
//! `E = K_xx - K_yy - ((b - f) K + K_t) / a`, the real equation for `k` has
//! residual `Re E` and the one for `k_c` has residual `-Im E`.

use std::collections::BTreeMap;

use cgle_core::sim::SimulationTrace;
use cgle_core::{BoundaryKind, KernelField, KernelKind, NormalizedPlant, StateField, TargetSpec};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{OracleError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelEquation {
    DirichletForward,
    NeumannForward,
    Inverse,
}

/// Sup and L2 residuals plus a per-equation breakdown of sup residuals.
///
/// Kernel reports use the keys `k_equation`, `k_c_equation`, `diagonal_bc`,
/// `edge_bc` and `corner`; target reports use `rho_equation`,
/// `iota_equation`, `boundary_x1` and `boundary_x0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub max_abs_residual: f64,
    pub l2_residual: f64,
    pub grid_h: f64,
    pub breakdown: BTreeMap<String, f64>,
}

impl ResidualReport {
    pub fn get(&self, key: &str) -> f64 {
        self.breakdown.get(key).copied().unwrap_or(f64::NAN)
    }
}

fn kernel_value(field: &KernelField, i: usize, j: usize, l: usize) -> Complex64 {
    Complex64::new(field.k(i, j, l), -field.k_c(i, j, l))
}

/// Second-order time derivative on the kernel's time nodes.
fn kernel_dt(field: &KernelField, i: usize, j: usize, l: usize) -> Complex64 {
    let n_t = field.grid.n_t;
    if n_t == 1 {
        return Complex64::new(0.0, 0.0);
    }
    let dt = field.grid.t0 / (n_t - 1) as f64;
    let v = |m: usize| kernel_value(field, i, j, m);
    if l == 0 {
        (-3.0 * v(0) + 4.0 * v(1) - v(2)) / (2.0 * dt)
    } else if l == n_t - 1 {
        (3.0 * v(l) - 4.0 * v(l - 1) + v(l - 2)) / (2.0 * dt)
    } else {
        (v(l + 1) - v(l - 1)) / (2.0 * dt)
    }
}

/// `int_0^x g(s) ds` by composite Simpson with `panels` (even) panels.
fn simpson<F: Fn(f64) -> Result<Complex64>>(g: F, x: f64, panels: usize) -> Result<Complex64> {
    if x == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let h = x / panels as f64;
    let mut sum = g(0.0)? + g(x)?;
    for m in 1..panels {
        let w = if m % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * g(m as f64 * h)?;
    }
    Ok(sum * h / 3.0)
}

pub fn kernel_pde_residual(
    field: &KernelField,
    np: &NormalizedPlant,
    tgt: &TargetSpec,
    which: KernelEquation,
) -> Result<ResidualReport> {
    let g = field.grid;
    if g.n_x < 5 {
        return Err(OracleError::TooCoarse(format!("need >= 5 nodes per axis, got {}", g.n_x)));
    }
    let inverse = which == KernelEquation::Inverse;
    if inverse != (field.kind == KernelKind::Inverse) {
        return Err(OracleError::Incompatible(format!("{:?} residual of a {:?} kernel", which, field.kind)));
    }
    let edge = match which {
        KernelEquation::DirichletForward => BoundaryKind::Dirichlet,
        KernelEquation::NeumannForward => BoundaryKind::Neumann,
        KernelEquation::Inverse => field.boundary,
    };
    let n = g.n_x;
    let dx = 1.0 / (n - 1) as f64;
    let a = Complex64::new(np.a_r, np.a_i);
    let xs: Vec<f64> = (0..n).map(|i| i as f64 * dx).collect();

    let (mut sup_k, mut sup_kc, mut sum_sq, mut count) = (0.0f64, 0.0f64, 0.0, 0usize);
    let (mut diag, mut edge_res, mut corner) = (0.0f64, 0.0f64, 0.0f64);
    for l in 0..g.n_t {
        let t = g.t0 * if g.n_t == 1 { 0.0 } else { l as f64 / (g.n_t - 1) as f64 };
        let b = xs.iter().map(|&x| np.b.eval(x, t)).collect::<Result<Vec<_>, _>>()?;
        let f = xs.iter().map(|&x| tgt.f.eval(x, t)).collect::<Result<Vec<_>, _>>()?;
        let v = |i: usize, j: usize| kernel_value(field, i, j, l);
        for i in 2..n - 1 {
            for j in 1..i {
                let k_xx = (v(i + 1, j) - 2.0 * v(i, j) + v(i - 1, j)) / (dx * dx);
                let k_yy = (v(i, j + 1) - 2.0 * v(i, j) + v(i, j - 1)) / (dx * dx);
                let coeff = if inverse { f[j] - b[i] } else { b[j] - f[i] };
                let e = k_xx - k_yy - (coeff * v(i, j) + kernel_dt(field, i, j, l)) / a;
                sup_k = sup_k.max(e.re.abs());
                sup_kc = sup_kc.max(e.im.abs());
                sum_sq += e.norm_sqr();
                count += 1;
            }
        }
        // diagonal data: K(x, x) = -+ 1/2 int_0^x (b - f)(s, s) / a ds
        let sign = if inverse { 0.5 } else { -0.5 };
        for i in 0..n {
            let integral = simpson(
                |s| Ok((np.b.eval(s, t)? - tgt.f.eval(s, t)?) / a),
                xs[i],
                128,
            )?;
            diag = diag.max((v(i, i) - sign * integral).norm());
        }
        corner = corner.max(v(0, 0).norm());
        for i in 0..n {
            let r = match edge {
                BoundaryKind::Dirichlet => v(i, 0).norm(),
                BoundaryKind::Neumann if i >= 2 => ((-3.0 * v(i, 0) + 4.0 * v(i, 1) - v(i, 2)) / (2.0 * dx)).norm(),
                BoundaryKind::Neumann => 0.0,
            };
            edge_res = edge_res.max(r);
        }
    }
    let l2 = if count == 0 { 0.0 } else { (sum_sq / count as f64 * 0.5).sqrt() };
    let breakdown = BTreeMap::from([
        ("k_equation".to_string(), sup_k),
        ("k_c_equation".to_string(), sup_kc),
        ("diagonal_bc".to_string(), diag),
        ("edge_bc".to_string(), edge_res),
        ("corner".to_string(), corner),
    ]);
    Ok(ResidualReport {
        max_abs_residual: sup_k.max(sup_kc),
        l2_residual: l2,
        grid_h: dx,
        breakdown,
    })
}

fn value(s: &StateField, i: usize) -> Complex64 {
    Complex64::new(s.rho[i], s.iota[i])
}

/// Residual of `w_t = a w_xx + f(x, t) w` along the snapshots of a
/// transformed trace, by centred differences in `t` and `x`.
///
/// The first 10% of the run is skipped: initial data matching only the
/// boundary values leave an initial layer that the difference quotients do
/// not resolve. Boundary values are checked on every snapshot.
pub fn target_residual(transformed: &SimulationTrace, np: &NormalizedPlant, tgt: &TargetSpec) -> Result<ResidualReport> {
    let (first, last) = match transformed.snapshots.as_deref() {
        Some([a, .., b]) => (a.time, b.time),
        _ => (0.0, 0.0),
    };
    target_residual_from(transformed, np, tgt, first + 0.1 * (last - first))
}

/// [`target_residual`] with the PDE residual taken only at snapshots with
/// `time >= t_start`.
pub fn target_residual_from(
    transformed: &SimulationTrace,
    np: &NormalizedPlant,
    tgt: &TargetSpec,
    t_start: f64,
) -> Result<ResidualReport> {
    let snaps = transformed
        .snapshots
        .as_ref()
        .ok_or_else(|| OracleError::InsufficientSnapshots("trace has no snapshots".into()))?;
    if snaps.len() < 3 {
        return Err(OracleError::InsufficientSnapshots(format!("got {}", snaps.len())));
    }
    let step = snaps[1].time - snaps[0].time;
    if !(step > 0.0) || snaps.windows(2).any(|w| ((w[1].time - w[0].time) - step).abs() > 1e-9 * step.max(1.0)) {
        return Err(OracleError::InsufficientSnapshots("snapshots are not equally spaced in time".into()));
    }
    let n = snaps[0].rho.len();
    if n < 3 || snaps.iter().any(|s| s.rho.len() != n || s.iota.len() != n) {
        return Err(OracleError::Incompatible("snapshots differ in size".into()));
    }
    let dx = 1.0 / (n - 1) as f64;
    let a = Complex64::new(np.a_r, np.a_i);

    let (mut sup_r, mut sup_i, mut sum_sq, mut count) = (0.0f64, 0.0f64, 0.0, 0usize);
    for m in 1..snaps.len() - 1 {
        if snaps[m].time < t_start - 1e-12 {
            continue;
        }
        let (prev, cur, next) = (&snaps[m - 1], &snaps[m], &snaps[m + 1]);
        for i in 1..n - 1 {
            let x = i as f64 * dx;
            let w_t = (value(next, i) - value(prev, i)) / (2.0 * step);
            let w_xx = (value(cur, i + 1) - 2.0 * value(cur, i) + value(cur, i - 1)) / (dx * dx);
            let e = w_t - a * w_xx - tgt.f.eval(x, cur.time)? * value(cur, i);
            sup_r = sup_r.max(e.re.abs());
            sup_i = sup_i.max(e.im.abs());
            sum_sq += e.norm_sqr();
            count += 1;
        }
    }
    let (mut at_one, mut at_zero) = (0.0f64, 0.0f64);
    for s in snaps {
        at_one = at_one.max(value(s, n - 1).norm());
        let r = match np.boundary {
            BoundaryKind::Dirichlet => value(s, 0).norm(),
            BoundaryKind::Neumann => ((-3.0 * value(s, 0) + 4.0 * value(s, 1) - value(s, 2)) / (2.0 * dx)).norm(),
        };
        at_zero = at_zero.max(r);
    }
    let breakdown = BTreeMap::from([
        ("rho_equation".to_string(), sup_r),
        ("iota_equation".to_string(), sup_i),
        ("boundary_x1".to_string(), at_one),
        ("boundary_x0".to_string(), at_zero),
    ]);
    Ok(ResidualReport {
        max_abs_residual: sup_r.max(sup_i),
        l2_residual: if count == 0 { 0.0 } else { (sum_sq / count as f64).sqrt() },
        grid_h: dx,
        breakdown,
    })
}
