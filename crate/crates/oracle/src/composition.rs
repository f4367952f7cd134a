//! Round trip `(I - L)(I - K) s = s` for the forward/inverse kernel pair.

use cgle_core::{KernelField, KernelKind, StateField};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{OracleError, Result};

/// Kernel at `(i, j)` and time `t`, linear between time nodes.
fn kernel_at(field: &KernelField, i: usize, j: usize, t: f64) -> Complex64 {
    let g = field.grid;
    let at = |l: usize| Complex64::new(field.k(i, j, l), -field.k_c(i, j, l));
    if g.n_t == 1 {
        return at(0);
    }
    let s = (t / g.t0 * (g.n_t - 1) as f64).clamp(0.0, (g.n_t - 1) as f64);
    let l = (s.floor() as usize).min(g.n_t - 2);
    let frac = s - l as f64;
    at(l) * (1.0 - frac) + at(l + 1) * frac
}

/// `v(x_i) - int_0^{x_i} K(x_i, y) v(y) dy`, trapezoid rule.
fn volterra(field: &KernelField, v: &[Complex64], t: f64) -> Vec<Complex64> {
    let n = v.len();
    let dx = 1.0 / (n - 1) as f64;
    (0..n)
        .map(|i| {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..=i {
                let w = if j == 0 || j == i { 0.5 } else { 1.0 };
                acc += w * kernel_at(field, i, j, t) * v[j];
            }
            if i == 0 {
                v[0]
            } else {
                v[i] - dx * acc
            }
        })
        .collect()
}

/// Sup over probes of `sup_x |(K^-1 K s)(x) - s(x)|`.
pub fn composition_identity(forward: &KernelField, inverse: &KernelField, probes: &[StateField]) -> Result<f64> {
    if forward.kind != KernelKind::Forward || inverse.kind != KernelKind::Inverse {
        return Err(OracleError::Incompatible("need a forward and an inverse kernel".into()));
    }
    if forward.grid != inverse.grid {
        return Err(OracleError::Incompatible("forward and inverse kernels live on different grids".into()));
    }
    let mut worst = 0.0f64;
    for p in probes {
        if p.rho.len() != forward.grid.n_x || p.iota.len() != forward.grid.n_x {
            return Err(OracleError::Incompatible(format!(
                "probe has {} nodes, kernels have {}",
                p.rho.len(),
                forward.grid.n_x
            )));
        }
        let s: Vec<Complex64> = p.rho.iter().zip(&p.iota).map(|(&r, &i)| Complex64::new(r, i)).collect();
        let back = volterra(inverse, &volterra(forward, &s, p.time), p.time);
        worst = back.iter().zip(&s).fold(worst, |m, (a, b)| m.max((a - b).norm()));
    }
    Ok(worst)
}

/// Smooth random states `sum_m c_m sin(m pi x / 2 + phi_m)` at `t = 0`.
pub fn random_probes(n_x: usize, count: usize, seed: u64) -> Vec<StateField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let modes: Vec<(f64, f64, f64, f64)> = (1..=4)
                .map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(0.0..6.3), rng.gen_range(-1.0..1.0), rng.gen_range(0.0..6.3)))
                .collect();
            StateField::from_fn(n_x, 0.0, |x| {
                modes.iter().enumerate().fold((0.0, 0.0), |(r, i), (m, &(cr, pr, ci, pi))| {
                    let arg = (m + 1) as f64 * std::f64::consts::FRAC_PI_2 * x;
                    (r + cr * (arg + pr).sin(), i + ci * (arg + pi).sin())
                })
            })
        })
        .collect()
}
