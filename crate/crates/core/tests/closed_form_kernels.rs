//! Constant-coefficient kernels against their Bessel-function closed forms.

use cgle_core::kernels::{solve_inverse_kernel, solve_kernel, SolveOptions};
use cgle_core::{BoundaryKind, CoefficientFn, KernelField, NormalizedPlant, TargetSpec, TriangleTimeGrid};
use num_complex::Complex64;

/// `I_1(z) / z` written as a power series in `w = z^2 / 4` (negative `w`
/// gives `J_1(z) / z`).
fn i1_over_z(w: f64) -> f64 {
    let (mut term, mut sum) = (0.5, 0.5);
    for m in 1..200 {
        term *= w / (m as f64 * (m + 1) as f64);
        sum += term;
        if term.abs() < 1e-18 * sum.abs() {
            break;
        }
    }
    sum
}

fn plant(a: Complex64, lambda: f64, boundary: BoundaryKind) -> NormalizedPlant {
    // b = lambda * a so that beta = b / a = lambda
    NormalizedPlant::from_coefficients(a, CoefficientFn::constant(a * lambda), boundary, 0.5).unwrap()
}

fn max_error(field: &KernelField, exact: impl Fn(f64, f64) -> f64) -> (f64, f64) {
    let g = field.grid;
    let (mut ek, mut ekc) = (0.0f64, 0.0f64);
    for i in 0..g.n_x {
        for j in 0..=i {
            ek = ek.max((field.k(i, j, 0) - exact(g.x(i), g.x(j))).abs());
            ekc = ekc.max(field.k_c(i, j, 0).abs());
        }
    }
    (ek, ekc)
}

fn forward_error(a: Complex64, lambda: f64, boundary: BoundaryKind, n_x: usize) -> (f64, f64) {
    let np = plant(a, lambda, boundary);
    let tgt = TargetSpec::damped(0.0).unwrap();
    let grid = TriangleTimeGrid::new(n_x, 1, 0.5).unwrap();
    let (field, _) = solve_kernel(&np, &tgt, &grid, &SolveOptions::default()).unwrap();
    assert!(field.converged);
    max_error(&field, |x, y| {
        let lead = match boundary {
            BoundaryKind::Dirichlet => y,
            BoundaryKind::Neumann => x,
        };
        -lambda * lead * i1_over_z(lambda * (x * x - y * y) / 4.0)
    })
}

#[test]
fn dirichlet_matches_bessel_closed_form() {
    for lambda in [1.0, 5.0, 10.0] {
        let (coarse, _) = forward_error(Complex64::new(1.0, 0.0), lambda, BoundaryKind::Dirichlet, 41);
        let (fine, kc) = forward_error(Complex64::new(1.0, 0.0), lambda, BoundaryKind::Dirichlet, 81);
        assert!(fine < 1e-3 * lambda, "lambda={lambda}: {fine}");
        assert!(coarse / fine > 3.0, "lambda={lambda}: ratio {}", coarse / fine);
        assert!(kc < 1e-12);
    }
}

#[test]
fn neumann_matches_bessel_closed_form() {
    for lambda in [1.0, 5.0, 10.0] {
        let (coarse, _) = forward_error(Complex64::new(1.0, 0.0), lambda, BoundaryKind::Neumann, 41);
        let (fine, _) = forward_error(Complex64::new(1.0, 0.0), lambda, BoundaryKind::Neumann, 81);
        assert!(fine < 1e-3 * lambda, "lambda={lambda}: {fine}");
        assert!(coarse / fine > 3.0, "lambda={lambda}: ratio {}", coarse / fine);
    }
}

#[test]
fn complex_diffusivity_with_real_beta() {
    let (err, kc) = forward_error(Complex64::new(1.0, 0.5), 5.0, BoundaryKind::Dirichlet, 81);
    assert!(err < 5e-3, "{err}");
    assert!(kc < 1e-12, "{kc}");
}

#[test]
fn inverse_kernels_match_oscillatory_closed_form() {
    for boundary in [BoundaryKind::Dirichlet, BoundaryKind::Neumann] {
        let lambda = 10.0;
        let np = plant(Complex64::new(1.0, 0.0), lambda, boundary);
        let tgt = TargetSpec::damped(0.0).unwrap();
        let grid = TriangleTimeGrid::new(81, 1, 0.5).unwrap();
        let (field, _) = solve_inverse_kernel(&np, &tgt, &grid, &SolveOptions::default()).unwrap();
        let (err, _) = max_error(&field, |x, y| {
            let lead = match boundary {
                BoundaryKind::Dirichlet => y,
                BoundaryKind::Neumann => x,
            };
            lambda * lead * i1_over_z(-lambda * (x * x - y * y) / 4.0)
        });
        assert!(err < 1e-2, "{boundary}: {err}");
    }
}

