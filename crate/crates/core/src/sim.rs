//! Time stepping of the plant `u_t = a u_xx + b(x, t) u` with `u = rho + i iota`.
//!
//! Space uses second-order centred differences on a uniform grid; time uses
//! the theta scheme (Crank-Nicolson or backward Euler) on the complex
//! tridiagonal system. At `x = 0` the state is pinned to zero (Dirichlet) or
//! reflected through a ghost node (Neumann). At `x = 1` the state equals the
//! control input, which in closed loop depends on the new state itself:
//! `u(1) = int_0^1 K(1, y, t) u(y) dy`. That implicit condition is solved
//! exactly by superposition `u = u_A + s u_B`, where `u_A` takes boundary
//! value 0 and `u_B` is the homogeneous response to boundary value 1.
//!
//! Crank-Nicolson runs start with backward-Euler half steps (Rannacher
//! startup) to damp the non-smooth components of projected initial data.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::kernels::io::fmt_f64;
use crate::kernels::KernelField;
use crate::problem::{BoundaryKind, NormalizedPlant, TargetSpec};
use crate::transform::{apply_k, ControlInput, StateField};

const BLOW_UP: f64 = 1e12;
const STARTUP_STEPS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    CrankNicolson,
    BackwardEuler,
}

impl Scheme {
    fn theta(self) -> f64 {
        match self {
            Scheme::CrankNicolson => 0.5,
            Scheme::BackwardEuler => 1.0,
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "cranknicolson" | "cn" => Ok(Scheme::CrankNicolson),
            "backwardeuler" | "be" => Ok(Scheme::BackwardEuler),
            other => Err(Error::InvalidScenario(format!("unknown scheme `{other}`"))),
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Scheme::CrankNicolson => "crank_nicolson",
            Scheme::BackwardEuler => "backward_euler",
        })
    }
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub np: NormalizedPlant,
    pub tgt: TargetSpec,
    /// Forward kernel; `None` runs the open loop with `p = 0`.
    pub kernel: Option<KernelField>,
    pub initial_rho: Expr,
    pub initial_iota: Expr,
    pub n_x: usize,
    pub dt: f64,
    pub t_end: f64,
    pub scheme: Scheme,
    /// Keep every `snapshot_stride`-th state (0 keeps none).
    pub snapshot_stride: usize,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.n_x < 3 {
            return Err(Error::InvalidScenario(format!("n_x must be >= 3, got {}", self.n_x)));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidScenario(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end > 0.0) || self.t_end > self.np.t0 + 1e-12 {
            return Err(Error::InvalidScenario(format!(
                "t_end must lie in (0, t0 = {}], got {}",
                self.np.t0, self.t_end
            )));
        }
        if let Some(k) = &self.kernel {
            if k.grid.n_x != self.n_x {
                return Err(Error::GridMismatch(format!(
                    "kernel has {} nodes, scenario has {}",
                    k.grid.n_x, self.n_x
                )));
            }
            if k.grid.t0 + 1e-12 < self.t_end {
                return Err(Error::GridMismatch(format!(
                    "kernel horizon {} ends before t_end {}",
                    k.grid.t0, self.t_end
                )));
            }
            if k.boundary != self.np.boundary {
                return Err(Error::GridMismatch(format!(
                    "{} kernel for a {} plant",
                    k.boundary, self.np.boundary
                )));
            }
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        ((self.t_end / self.dt) - 1e-9).ceil().max(1.0) as usize
    }

    pub fn closed_loop(&self) -> bool {
        self.kernel.is_some()
    }

    /// Initial data, with `s x^2` added so that `u(1)` equals the initial
    /// control value (zero in open loop).
    pub fn initial_state(&self) -> Result<StateField> {
        let n = self.n_x;
        let dx = 1.0 / (n - 1) as f64;
        let mut u = Vec::with_capacity(n);
        for i in 0..n {
            let x = i as f64 * dx;
            u.push(Complex64::new(self.initial_rho.eval(x, 0.0)?, self.initial_iota.eval(x, 0.0)?));
        }
        if self.np.boundary == BoundaryKind::Dirichlet && u[0].norm() > 1e-12 {
            return Err(Error::InvalidScenario(format!(
                "initial data must vanish at x = 0 for a Dirichlet plant, got {}",
                u[0]
            )));
        }
        let q: Vec<Complex64> = (0..n).map(|i| Complex64::new((i as f64 * dx).powi(2), 0.0)).collect();
        let weights = trapezoid_weights(n);
        let (pu, pq) = match &self.kernel {
            Some(k) => {
                let gains = k.boundary_gains(0.0);
                (apply_gains(&gains, &weights, &u), apply_gains(&gains, &weights, &q))
            }
            None => (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)),
        };
        let s = (pu - u[n - 1]) / (1.0 - pq);
        for (ui, qi) in u.iter_mut().zip(&q) {
            *ui += s * qi;
        }
        Ok(from_complex(&u, 0.0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationTrace {
    pub times: Vec<f64>,
    pub l2_norms: Vec<f64>,
    pub h1_norms: Vec<f64>,
    pub inputs: Vec<ControlInput>,
    pub fitted_decay_rate: f64,
    #[serde(skip)]
    pub snapshots: Option<Vec<StateField>>,
}

fn trapezoid_weights(n: usize) -> Vec<f64> {
    let dx = 1.0 / (n - 1) as f64;
    (0..n)
        .map(|j| if j == 0 || j == n - 1 { 0.5 * dx } else { dx })
        .collect()
}

fn apply_gains(gains: &[Complex64], weights: &[f64], u: &[Complex64]) -> Complex64 {
    gains
        .iter()
        .zip(weights)
        .zip(u)
        .fold(Complex64::new(0.0, 0.0), |acc, ((g, w), v)| acc + g * *w * v)
}

fn to_complex(state: &StateField) -> Vec<Complex64> {
    (0..state.n_x()).map(|i| state.value(i)).collect()
}

fn from_complex(u: &[Complex64], time: f64) -> StateField {
    StateField {
        rho: u.iter().map(|v| v.re).collect(),
        iota: u.iter().map(|v| v.im).collect(),
        time,
    }
}

/// `||u||_{L2}` by the trapezoid rule.
pub fn l2_norm(state: &StateField) -> f64 {
    let w = trapezoid_weights(state.n_x());
    (0..state.n_x())
        .map(|i| w[i] * state.value(i).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// `sqrt(||u||^2 + ||u_x||^2)` with centred differences and one-sided
/// second-order differences at the ends.
pub fn h1_norm(state: &StateField) -> f64 {
    let n = state.n_x();
    let dx = state.dx();
    let u = to_complex(state);
    let w = trapezoid_weights(n);
    let mut semi = 0.0;
    for i in 0..n {
        let d = if n < 3 {
            (u[1] - u[0]) / dx
        } else if i == 0 {
            (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * dx)
        } else if i == n - 1 {
            (3.0 * u[n - 1] - 4.0 * u[n - 2] + u[n - 3]) / (2.0 * dx)
        } else {
            (u[i + 1] - u[i - 1]) / (2.0 * dx)
        };
        semi += w[i] * d.norm_sqr();
    }
    let l2 = l2_norm(state);
    (l2 * l2 + semi).sqrt()
}

/// `-slope` of the least-squares line through `(t, ln l2)` over the trailing
/// half of the samples. Zero samples are skipped.
pub fn fit_decay_rate(times: &[f64], l2_norms: &[f64]) -> f64 {
    let start = times.len() / 2;
    let points: Vec<(f64, f64)> = times[start..]
        .iter()
        .zip(&l2_norms[start..])
        .filter(|(_, &v)| v > 0.0)
        .map(|(&t, &v)| (t, v.ln()))
        .collect();
    if points.len() < 2 {
        return 0.0;
    }
    let n = points.len() as f64;
    let (mt, my) = points.iter().fold((0.0, 0.0), |(a, b), (t, y)| (a + t / n, b + y / n));
    let (mut sty, mut stt) = (0.0, 0.0);
    for (t, y) in &points {
        sty += (t - mt) * (y - my);
        stt += (t - mt) * (t - mt);
    }
    if stt == 0.0 {
        0.0
    } else {
        -sty / stt
    }
}

struct Stepper<'a> {
    sc: &'a Scenario,
    n: usize,
    dx: f64,
    a: Complex64,
    weights: Vec<f64>,
}

impl<'a> Stepper<'a> {
    fn new(sc: &'a Scenario) -> Self {
        let n = sc.n_x;
        Self {
            sc,
            n,
            dx: 1.0 / (n - 1) as f64,
            a: sc.np.a(),
            weights: trapezoid_weights(n),
        }
    }

    fn sample_b(&self, t: f64) -> Result<Vec<Complex64>> {
        (0..self.n).map(|i| self.sc.np.b.eval(i as f64 * self.dx, t)).collect()
    }

    /// `(A u)_i` for rows that carry the PDE.
    fn apply_operator(&self, u: &[Complex64], b: &[Complex64], i: usize) -> Complex64 {
        let r = self.a / (self.dx * self.dx);
        if i == 0 {
            // Neumann ghost node u_{-1} = u_1
            r * 2.0 * (u[1] - u[0]) + b[0] * u[0]
        } else {
            r * (u[i - 1] - 2.0 * u[i] + u[i + 1]) + b[i] * u[i]
        }
    }

    /// One theta-scheme step from `t` to `t + dt`.
    fn advance(&self, u: &[Complex64], t: f64, dt: f64, theta: f64) -> Result<Vec<Complex64>> {
        let n = self.n;
        let t_new = t + dt;
        let b_old = self.sample_b(t)?;
        let b_new = self.sample_b(t_new)?;
        let r = self.a / (self.dx * self.dx);
        let zero = Complex64::new(0.0, 0.0);
        let one = Complex64::new(1.0, 0.0);

        let mut sub = vec![zero; n];
        let mut diag = vec![one; n];
        let mut sup = vec![zero; n];
        let mut rhs = vec![zero; n];
        let first_pde_row = match self.sc.np.boundary {
            BoundaryKind::Dirichlet => 1,
            BoundaryKind::Neumann => 0,
        };
        for i in first_pde_row..n - 1 {
            let explicit = if theta < 1.0 {
                (1.0 - theta) * dt * self.apply_operator(u, &b_old, i)
            } else {
                zero
            };
            rhs[i] = u[i] + explicit;
            let c = theta * dt;
            diag[i] = one - c * (-2.0 * r + b_new[i]);
            if i == 0 {
                sup[0] = -c * 2.0 * r;
            } else {
                sub[i] = -c * r;
                sup[i] = -c * r;
            }
        }

        let factor = Tridiagonal::factor(&sub, &diag, &sup, t_new)?;
        let u_a = factor.solve(&rhs);
        let Some(kernel) = &self.sc.kernel else {
            return Ok(u_a);
        };
        let mut unit = vec![zero; n];
        unit[n - 1] = one;
        let u_b = factor.solve(&unit);
        let gains = kernel.boundary_gains(t_new);
        let pa = apply_gains(&gains, &self.weights, &u_a);
        let pb = apply_gains(&gains, &self.weights, &u_b);
        let denom = one - pb;
        if denom.norm() < 1e-14 {
            return Err(Error::SingularSystem { row: n - 1, time: t_new });
        }
        let s = pa / denom;
        Ok(u_a.iter().zip(&u_b).map(|(x, y)| x + s * y).collect())
    }

    fn input(&self, u: &[Complex64], t: f64) -> ControlInput {
        let p = match &self.sc.kernel {
            Some(k) => apply_gains(&k.boundary_gains(t), &self.weights, u),
            None => Complex64::new(0.0, 0.0),
        };
        ControlInput { p_r: p.re, p_i: p.im, time: t }
    }
}

/// Complex tridiagonal LU factorization (Thomas algorithm).
struct Tridiagonal {
    sub: Vec<Complex64>,
    c_prime: Vec<Complex64>,
    pivots: Vec<Complex64>,
}

impl Tridiagonal {
    fn factor(sub: &[Complex64], diag: &[Complex64], sup: &[Complex64], time: f64) -> Result<Self> {
        let n = diag.len();
        let mut c_prime = vec![Complex64::new(0.0, 0.0); n];
        let mut pivots = vec![Complex64::new(0.0, 0.0); n];
        for i in 0..n {
            let pivot = if i == 0 { diag[0] } else { diag[i] - sub[i] * c_prime[i - 1] };
            if !(pivot.norm() > 1e-300) || !pivot.is_finite() {
                return Err(Error::SingularSystem { row: i, time });
            }
            pivots[i] = pivot;
            c_prime[i] = sup[i] / pivot;
        }
        Ok(Self {
            sub: sub.to_vec(),
            c_prime,
            pivots,
        })
    }

    fn solve(&self, rhs: &[Complex64]) -> Vec<Complex64> {
        let n = rhs.len();
        let mut y = vec![Complex64::new(0.0, 0.0); n];
        for i in 0..n {
            let prev = if i == 0 { Complex64::new(0.0, 0.0) } else { self.sub[i] * y[i - 1] };
            y[i] = (rhs[i] - prev) / self.pivots[i];
        }
        for i in (0..n - 1).rev() {
            y[i] = y[i] - self.c_prime[i] * y[i + 1];
        }
        y
    }
}

fn guard(u: &[Complex64], time: f64) -> Result<()> {
    let sup = u.iter().fold(0.0f64, |m, v| m.max(v.norm()));
    if !(sup <= BLOW_UP) {
        return Err(Error::BlowUp { time, sup });
    }
    Ok(())
}

/// Advances `state` from time `t` by one step of `sc.dt` with `sc.scheme`.
pub fn step(state: &StateField, sc: &Scenario, t: f64) -> Result<StateField> {
    sc.validate()?;
    if state.n_x() != sc.n_x {
        return Err(Error::GridMismatch(format!(
            "state has {} nodes, scenario has {}",
            state.n_x(),
            sc.n_x
        )));
    }
    let stepper = Stepper::new(sc);
    let u = stepper.advance(&to_complex(state), t, sc.dt, sc.scheme.theta())?;
    guard(&u, t + sc.dt)?;
    Ok(from_complex(&u, t + sc.dt))
}

pub fn run(sc: &Scenario) -> Result<SimulationTrace> {
    sc.validate()?;
    let stepper = Stepper::new(sc);
    let initial = sc.initial_state()?;
    let mut u = to_complex(&initial);
    let n_steps = sc.n_steps();

    let mut trace = SimulationTrace {
        times: Vec::with_capacity(n_steps + 1),
        l2_norms: Vec::with_capacity(n_steps + 1),
        h1_norms: Vec::with_capacity(n_steps + 1),
        inputs: Vec::with_capacity(n_steps + 1),
        fitted_decay_rate: 0.0,
        snapshots: (sc.snapshot_stride > 0).then(Vec::new),
    };
    let record = |u: &[Complex64], step: usize, t: f64, trace: &mut SimulationTrace| {
        let state = from_complex(u, t);
        trace.times.push(t);
        trace.l2_norms.push(l2_norm(&state));
        trace.h1_norms.push(h1_norm(&state));
        trace.inputs.push(stepper.input(u, t));
        if let Some(snaps) = trace.snapshots.as_mut() {
            if step % sc.snapshot_stride == 0 {
                snaps.push(state);
            }
        }
    };
    record(&u, 0, 0.0, &mut trace);

    for s in 0..n_steps {
        let t = s as f64 * sc.dt;
        u = if sc.scheme == Scheme::CrankNicolson && s < STARTUP_STEPS {
            let half = 0.5 * sc.dt;
            let mid = stepper.advance(&u, t, half, 1.0)?;
            stepper.advance(&mid, t + half, half, 1.0)?
        } else {
            stepper.advance(&u, t, sc.dt, sc.scheme.theta())?
        };
        let t_new = (s + 1) as f64 * sc.dt;
        guard(&u, t_new)?;
        record(&u, s + 1, t_new, &mut trace);
    }
    trace.fitted_decay_rate = fit_decay_rate(&trace.times, &trace.l2_norms);
    Ok(trace)
}

/// Maps every snapshot through the forward transform. The `inputs` of the
/// result hold the transformed boundary values `(rho~(1), iota~(1))`.
pub fn transformed_trace(trace: &SimulationTrace, field: &KernelField) -> Result<SimulationTrace> {
    let snaps = trace.snapshots.as_ref().ok_or(Error::MissingSnapshots)?;
    let mapped = snaps.iter().map(|s| apply_k(s, field)).collect::<Result<Vec<_>>>()?;
    let times: Vec<f64> = mapped.iter().map(|s| s.time).collect();
    let l2_norms: Vec<f64> = mapped.iter().map(l2_norm).collect();
    let h1_norms = mapped.iter().map(h1_norm).collect();
    let inputs = mapped
        .iter()
        .map(|s| {
            let last = s.n_x() - 1;
            ControlInput {
                p_r: s.rho[last],
                p_i: s.iota[last],
                time: s.time,
            }
        })
        .collect();
    Ok(SimulationTrace {
        fitted_decay_rate: fit_decay_rate(&times, &l2_norms),
        times,
        l2_norms,
        h1_norms,
        inputs,
        snapshots: Some(mapped),
    })
}

/// Columns `time,l2,h1,p_R,p_I`.
pub fn write_trace_csv(trace: &SimulationTrace, path: &Path) -> Result<()> {
    let mut out = String::from("time,l2,h1,p_R,p_I\n");
    for i in 0..trace.times.len() {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            fmt_f64(trace.times[i]),
            fmt_f64(trace.l2_norms[i]),
            fmt_f64(trace.h1_norms[i]),
            fmt_f64(trace.inputs[i].p_r),
            fmt_f64(trace.inputs[i].p_i)
        );
    }
    fs::write(path, out)?;
    Ok(())
}

/// Columns `time,x,rho,iota`.
pub fn write_snapshots_csv(trace: &SimulationTrace, path: &Path) -> Result<()> {
    let snaps = trace.snapshots.as_ref().ok_or(Error::MissingSnapshots)?;
    let mut out = String::from("time,x,rho,iota\n");
    for s in snaps {
        let dx = s.dx();
        for i in 0..s.n_x() {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                fmt_f64(s.time),
                fmt_f64(i as f64 * dx),
                fmt_f64(s.rho[i]),
                fmt_f64(s.iota[i])
            );
        }
    }
    fs::write(path, out)?;
    Ok(())
}
