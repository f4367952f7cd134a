//! Simulating the gauge-transformed, normalized plant and mapping back must
//! agree with a direct simulation of the advective plant on `[0, L]`.

use cgle_core::expr::Expr;
use cgle_core::problem::{gauge_transform, normalize};
use cgle_core::sim::run;
use cgle_core::{BoundaryKind, CoefficientFn, PlantSpec, Scenario, Scheme, TargetSpec};
use num_complex::Complex64;

const LENGTH: f64 = 2.0;
const HORIZON: f64 = 0.5;
const T_END: f64 = 0.8;

fn a2(x: f64, t: f64) -> Complex64 {
    Complex64::new(3.0 + x.sin(), 0.5 * t.cos())
}

fn a3(x: f64) -> f64 {
    2.0 + x
}

fn u0(x: f64) -> f64 {
    (std::f64::consts::PI * x / LENGTH).sin() * (1.0 + 0.5 * x)
}

/// Crank-Nicolson for `u_t = u_xx + a3 u_x + a2 u` with zero Dirichlet data.
fn direct(n: usize, steps: usize) -> Vec<Complex64> {
    let dx = LENGTH / (n - 1) as f64;
    let dt = T_END * HORIZON / steps as f64;
    let xs: Vec<f64> = (0..n).map(|i| i as f64 * dx).collect();
    let mut u: Vec<Complex64> = xs.iter().map(|&x| Complex64::new(u0(x), 0.0)).collect();
    let lower = |x: f64| 1.0 / (dx * dx) - a3(x) / (2.0 * dx);
    let upper = |x: f64| 1.0 / (dx * dx) + a3(x) / (2.0 * dx);
    for s in 0..steps {
        let (t, t_new) = (s as f64 * dt, (s + 1) as f64 * dt);
        let zero = Complex64::new(0.0, 0.0);
        let mut sub = vec![zero; n];
        let mut diag = vec![Complex64::new(1.0, 0.0); n];
        let mut sup = vec![zero; n];
        let mut rhs = vec![zero; n];
        for i in 1..n - 1 {
            let x = xs[i];
            let op = lower(x) * u[i - 1] + (a2(x, t) - 2.0 / (dx * dx)) * u[i] + upper(x) * u[i + 1];
            rhs[i] = u[i] + 0.5 * dt * op;
            sub[i] = Complex64::new(-0.5 * dt * lower(x), 0.0);
            sup[i] = Complex64::new(-0.5 * dt * upper(x), 0.0);
            diag[i] = 1.0 - 0.5 * dt * (a2(x, t_new) - 2.0 / (dx * dx));
        }
        for i in 1..n {
            let m = sub[i] / diag[i - 1];
            diag[i] = diag[i] - m * sup[i - 1];
            rhs[i] = rhs[i] - m * rhs[i - 1];
        }
        u[n - 1] = rhs[n - 1] / diag[n - 1];
        for i in (0..n - 1).rev() {
            u[i] = (rhs[i] - sup[i] * u[i + 1]) / diag[i];
        }
    }
    u
}

/// Normalized simulation mapped back to the original variable and grid.
fn via_normalized(n: usize, steps: usize) -> Vec<Complex64> {
    let plant = PlantSpec::new(
        Complex64::new(1.0, 0.0),
        CoefficientFn::parse("3 + sin(x)", "0.5*cos(t)", true).unwrap(),
        CoefficientFn::parse("2 + x", "0", true).unwrap(),
        LENGTH,
        HORIZON,
        BoundaryKind::Dirichlet,
        0.9,
    )
    .unwrap();
    let np = normalize(&gauge_transform(&plant).unwrap()).unwrap();
    let multiplier = np.multiplier.clone().unwrap();
    // v = u / m with m = exp(-(2 xt + xt^2 / 2) / 2), xt = L (1 - x)
    let initial = Expr::parse("sin(pi*(1-x)) * (1 + (1-x)) * exp((4*(1-x) + 2*(1-x)^2) / 2)").unwrap();
    let sc = Scenario {
        np,
        tgt: TargetSpec::damped(0.0).unwrap(),
        kernel: None,
        initial_rho: initial,
        initial_iota: Expr::constant(0.0),
        n_x: n,
        dt: T_END / steps as f64,
        t_end: T_END,
        scheme: Scheme::CrankNicolson,
        snapshot_stride: steps,
    };
    let trace = run(&sc).unwrap();
    let last = trace.snapshots.unwrap().pop().unwrap();
    let dx = LENGTH / (n - 1) as f64;
    (0..n)
        .map(|i| {
            let xt = i as f64 * dx;
            multiplier.eval(xt).unwrap() * last.value(n - 1 - i)
        })
        .collect()
}

fn max_diff(n: usize, steps: usize) -> f64 {
    let a = direct(n, steps);
    let b = via_normalized(n, steps);
    a.iter().zip(&b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

#[test]
fn normalized_run_reproduces_original_coordinates() {
    let coarse = max_diff(51, 100);
    let fine = max_diff(101, 200);
    let scale = direct(101, 200).iter().map(|v| v.norm()).fold(0.0, f64::max);
    assert!(fine < 1e-3 * scale, "fine {fine} vs scale {scale}");
    let ratio = coarse / fine;
    assert!((3.0..5.0).contains(&ratio), "ratio {ratio}");
}
