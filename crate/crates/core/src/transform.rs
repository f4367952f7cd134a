//! Backstepping transform, its inverse, and the boundary feedback law.
//!
//! ```text
//! rho~(x)  = rho(x)  - int_0^x [  k(x,y) rho(y) + k_c(x,y) iota(y) ] dy
//! iota~(x) = iota(x) - int_0^x [ -k_c(x,y) rho(y) + k(x,y) iota(y) ] dy
//! ```
//!
//! All integrals use the composite trapezoid rule on the state grid, the
//! same rule the simulator uses to close the loop, so `rho~(1) = 0` holds to
//! rounding on closed-loop states.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{KernelField, KernelKind, KernelSlice};

/// Real and imaginary parts of the state on the uniform grid over `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateField {
    pub rho: Vec<f64>,
    pub iota: Vec<f64>,
    pub time: f64,
}

impl StateField {
    pub fn new(rho: Vec<f64>, iota: Vec<f64>, time: f64) -> Result<Self> {
        if rho.len() != iota.len() || rho.len() < 2 {
            return Err(Error::GridMismatch(format!(
                "rho and iota need equal lengths >= 2, got {} and {}",
                rho.len(),
                iota.len()
            )));
        }
        Ok(Self { rho, iota, time })
    }

    pub fn zeros(n_x: usize, time: f64) -> Self {
        Self {
            rho: vec![0.0; n_x],
            iota: vec![0.0; n_x],
            time,
        }
    }

    pub fn from_fn<F: Fn(f64) -> (f64, f64)>(n_x: usize, time: f64, f: F) -> Self {
        let dx = 1.0 / (n_x - 1) as f64;
        let (rho, iota) = (0..n_x).map(|i| f(i as f64 * dx)).unzip();
        Self { rho, iota, time }
    }

    pub fn n_x(&self) -> usize {
        self.rho.len()
    }

    pub fn dx(&self) -> f64 {
        1.0 / (self.n_x() - 1) as f64
    }

    pub fn value(&self, i: usize) -> Complex64 {
        Complex64::new(self.rho[i], self.iota[i])
    }

    pub fn sup_abs(&self) -> f64 {
        (0..self.n_x()).fold(0.0f64, |m, i| m.max(self.value(i).norm()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlInput {
    pub p_r: f64,
    pub p_i: f64,
    pub time: f64,
}

fn check_compatible(state: &StateField, field: &KernelField) -> Result<()> {
    if state.n_x() != field.grid.n_x {
        return Err(Error::GridMismatch(format!(
            "state has {} nodes, kernel has {}",
            state.n_x(),
            field.grid.n_x
        )));
    }
    if state.time < -1e-12 || state.time > field.grid.t0 + 1e-12 {
        return Err(Error::GridMismatch(format!(
            "state time {} outside kernel horizon [0, {}]",
            state.time, field.grid.t0
        )));
    }
    Ok(())
}

/// Applies `v - int_0^x K(x, y) v(y) dy` with the kernel at one instant.
pub fn volterra_apply(state: &StateField, kernel: &KernelSlice) -> StateField {
    let n = state.n_x();
    let dx = state.dx();
    let mut rho = vec![0.0; n];
    let mut iota = vec![0.0; n];
    for i in 0..n {
        let (mut ir, mut ii) = (0.0, 0.0);
        for j in 0..=i {
            let w = if j == 0 || j == i { 0.5 * dx } else { dx };
            let (k, kc) = (kernel.k(i, j), kernel.k_c(i, j));
            let (r, c) = (state.rho[j], state.iota[j]);
            ir += w * (k * r + kc * c);
            ii += w * (-kc * r + k * c);
        }
        if i == 0 {
            ir = 0.0;
            ii = 0.0;
        }
        rho[i] = state.rho[i] - ir;
        iota[i] = state.iota[i] - ii;
    }
    StateField {
        rho,
        iota,
        time: state.time,
    }
}

pub fn apply_k(state: &StateField, field: &KernelField) -> Result<StateField> {
    if field.kind != KernelKind::Forward {
        return Err(Error::GridMismatch("apply_k needs a forward kernel".into()));
    }
    check_compatible(state, field)?;
    Ok(volterra_apply(state, &field.slice_at(state.time)))
}

pub fn apply_k_inverse(state: &StateField, inverse_field: &KernelField) -> Result<StateField> {
    if inverse_field.kind != KernelKind::Inverse {
        return Err(Error::GridMismatch("apply_k_inverse needs an inverse kernel".into()));
    }
    check_compatible(state, inverse_field)?;
    Ok(volterra_apply(state, &inverse_field.slice_at(state.time)))
}

/// `p = int_0^1 (k(1,y) - i k_c(1,y)) u(y) dy` as a complex number.
pub fn feedback(state: &StateField, kernel: &KernelSlice) -> Complex64 {
    let n = state.n_x();
    let dx = state.dx();
    let last = n - 1;
    let mut p = Complex64::new(0.0, 0.0);
    for j in 0..n {
        let w = if j == 0 || j == last { 0.5 * dx } else { dx };
        let gain = Complex64::new(kernel.k(last, j), -kernel.k_c(last, j));
        p += w * gain * state.value(j);
    }
    p
}

pub fn control_input(state: &StateField, field: &KernelField) -> Result<ControlInput> {
    check_compatible(state, field)?;
    let p = feedback(state, &field.slice_at(state.time));
    Ok(ControlInput {
        p_r: p.re,
        p_i: p.im,
        time: state.time,
    })
}
