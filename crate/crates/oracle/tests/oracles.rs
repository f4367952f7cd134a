//! The oracles must bless correct data and flag corrupted data.

use cgle_core::expr::Expr;
use cgle_core::kernels::{solve_inverse_kernel, solve_kernel, SolveOptions};
use cgle_core::sim::{run, transformed_trace, SimulationTrace};
use cgle_core::{
    BoundaryKind, CoefficientFn, KernelField, KernelKind, NormalizedPlant, Scenario, Scheme, StateField, TargetSpec,
    TriangleTimeGrid,
};
use cgle_oracle::*;
use num_complex::Complex64;

fn constant_plant(b: f64, boundary: BoundaryKind) -> NormalizedPlant {
    NormalizedPlant::from_coefficients(
        Complex64::new(1.0, 0.0),
        CoefficientFn::constant(Complex64::new(b, 0.0)),
        boundary,
        0.8,
    )
    .unwrap()
}

fn varying_plant(boundary: BoundaryKind) -> NormalizedPlant {
    NormalizedPlant::from_coefficients(
        Complex64::new(1.0, 0.5),
        CoefficientFn::parse("8 + 2*x + t", "x*t", true).unwrap(),
        boundary,
        0.8,
    )
    .unwrap()
}

#[test]
fn zero_kernel_without_reaction_has_zero_residual() {
    let np = constant_plant(-3.0, BoundaryKind::Dirichlet);
    let tgt = TargetSpec::damped(3.0).unwrap();
    let grid = TriangleTimeGrid::new(11, 5, 0.8).unwrap();
    let zero = KernelField::zeros(KernelKind::Forward, BoundaryKind::Dirichlet, grid);
    let r = kernel_pde_residual(&zero, &np, &tgt, KernelEquation::DirichletForward).unwrap();
    assert_eq!(r.max_abs_residual, 0.0);
    assert!(r.breakdown.values().all(|&v| v == 0.0));
}

#[test]
fn bessel_kernels_have_second_order_residuals() {
    let lambda = 10.0;
    let np = constant_plant(lambda, BoundaryKind::Dirichlet);
    let tgt = TargetSpec::damped(0.0).unwrap();
    for (which, boundary) in [
        (KernelEquation::DirichletForward, BoundaryKind::Dirichlet),
        (KernelEquation::NeumannForward, BoundaryKind::Neumann),
    ] {
        let residual = |n: usize| {
            let grid = TriangleTimeGrid::new(n, 1, 0.8).unwrap();
            let field = KernelField::from_fn(KernelKind::Forward, boundary, grid, |x, y, _| {
                let k = match boundary {
                    BoundaryKind::Dirichlet => bessel_kernel(lambda, x, y),
                    BoundaryKind::Neumann => bessel_kernel_neumann(lambda, x, y),
                };
                (k.unwrap(), 0.0)
            });
            kernel_pde_residual(&field, &np, &tgt, which).unwrap()
        };
        let (coarse, fine) = (residual(41), residual(81));
        let ratio = coarse.max_abs_residual / fine.max_abs_residual;
        assert!((3.0..=5.0).contains(&ratio), "{which:?}: ratio {ratio}");
        assert!(fine.get("diagonal_bc") < 1e-12);
        assert!(fine.get("edge_bc") < 1e-2, "{which:?}: {}", fine.get("edge_bc"));
    }
}

#[test]
fn corrupted_diagonal_is_detected() {
    let np = varying_plant(BoundaryKind::Dirichlet);
    let tgt = TargetSpec::damped(2.0).unwrap();
    let grid = TriangleTimeGrid::new(41, 9, 0.8).unwrap();
    let (mut field, _) = solve_kernel(&np, &tgt, &grid, &SolveOptions::default()).unwrap();
    let clean = kernel_pde_residual(&field, &np, &tgt, KernelEquation::DirichletForward).unwrap();
    for l in 0..grid.n_t {
        for i in 0..grid.n_x {
            field.set(i, i, l, field.k(i, i, l) + 1e-3, field.k_c(i, i, l));
        }
    }
    let bad = kernel_pde_residual(&field, &np, &tgt, KernelEquation::DirichletForward).unwrap();
    assert!(bad.get("diagonal_bc") >= 9e-4);
    assert!(bad.get("diagonal_bc") >= 10.0 * clean.get("diagonal_bc"));
}

#[test]
fn wrong_equation_is_rejected() {
    let np = varying_plant(BoundaryKind::Dirichlet);
    let tgt = TargetSpec::damped(2.0).unwrap();
    let grid = TriangleTimeGrid::new(11, 5, 0.8).unwrap();
    let (field, _) = solve_kernel(&np, &tgt, &grid, &SolveOptions::default()).unwrap();
    assert!(kernel_pde_residual(&field, &np, &tgt, KernelEquation::Inverse).is_err());
    let coarse = KernelField::zeros(KernelKind::Forward, BoundaryKind::Dirichlet, TriangleTimeGrid::new(4, 1, 0.8).unwrap());
    assert!(matches!(
        kernel_pde_residual(&coarse, &np, &tgt, KernelEquation::DirichletForward),
        Err(OracleError::TooCoarse(_))
    ));
}

#[test]
fn neumann_kernel_edge_condition_converges() {
    let np = varying_plant(BoundaryKind::Neumann);
    let tgt = TargetSpec::damped(2.0).unwrap();
    let edge = |n: usize, n_t: usize| {
        let grid = TriangleTimeGrid::new(n, n_t, 0.8).unwrap();
        let (field, _) = solve_kernel(&np, &tgt, &grid, &SolveOptions::default()).unwrap();
        let r = kernel_pde_residual(&field, &np, &tgt, KernelEquation::NeumannForward).unwrap();
        assert_eq!(r.get("corner"), 0.0);
        r.get("edge_bc")
    };
    let ratio = edge(41, 9) / edge(81, 17);
    assert!((3.0..=5.0).contains(&ratio), "ratio {ratio}");
}

fn closed_loop(n: usize, dt: f64, zero_kernel: bool) -> (SimulationTrace, NormalizedPlant, TargetSpec) {
    let np = constant_plant(12.0, BoundaryKind::Dirichlet);
    let tgt = TargetSpec::damped(5.0).unwrap();
    let grid = TriangleTimeGrid::new(n, 1, 0.8).unwrap();
    let (kernel, _) = solve_kernel(&np, &tgt, &grid, &SolveOptions::default()).unwrap();
    let sc = Scenario {
        np: np.clone(),
        tgt: tgt.clone(),
        kernel: Some(kernel.clone()),
        initial_rho: Expr::parse("sin(pi*x) + x").unwrap(),
        initial_iota: Expr::parse("x*(1-x)").unwrap(),
        n_x: n,
        dt,
        t_end: 0.4,
        scheme: Scheme::CrankNicolson,
        snapshot_stride: 10,
    };
    let trace = run(&sc).unwrap();
    let map_with = if zero_kernel {
        KernelField::zeros(KernelKind::Forward, BoundaryKind::Dirichlet, grid)
    } else {
        kernel
    };
    (transformed_trace(&trace, &map_with).unwrap(), np, tgt)
}

#[test]
fn target_residual_converges_and_flags_missing_transform() {
    let (coarse, np, tgt) = closed_loop(51, 4e-4, false);
    let (fine, _, _) = closed_loop(101, 2e-4, false);
    let rc = target_residual(&coarse, &np, &tgt).unwrap();
    let rf = target_residual(&fine, &np, &tgt).unwrap();
    let ratio = rc.max_abs_residual / rf.max_abs_residual;
    assert!(ratio >= 3.0, "ratio {ratio}");
    assert!(rf.get("boundary_x1") < 1e-12);

    // untransformed plant states violate the target equation by about |b - f| |u|
    let (raw, _, _) = closed_loop(101, 2e-4, true);
    let bad = target_residual(&raw, &np, &tgt).unwrap();
    assert!(bad.max_abs_residual >= 10.0 * rf.max_abs_residual);
}

#[test]
fn target_residual_of_zero_trajectory_is_zero() {
    let np = constant_plant(12.0, BoundaryKind::Neumann);
    let tgt = TargetSpec::damped(5.0).unwrap();
    let snaps: Vec<StateField> = (0..5).map(|m| StateField::zeros(11, m as f64 * 0.01)).collect();
    let trace = SimulationTrace {
        times: snaps.iter().map(|s| s.time).collect(),
        l2_norms: vec![0.0; 5],
        h1_norms: vec![0.0; 5],
        inputs: vec![],
        fitted_decay_rate: 0.0,
        snapshots: Some(snaps),
    };
    let r = target_residual(&trace, &np, &tgt).unwrap();
    assert_eq!(r.max_abs_residual, 0.0);
    let mut short = trace.clone();
    short.snapshots.as_mut().unwrap().truncate(2);
    assert!(matches!(target_residual(&short, &np, &tgt), Err(OracleError::InsufficientSnapshots(_))));
}

#[test]
fn composition_identity_is_second_order() {
    let zero_k = KernelField::zeros(KernelKind::Forward, BoundaryKind::Dirichlet, TriangleTimeGrid::new(21, 1, 0.8).unwrap());
    let zero_l = KernelField::zeros(KernelKind::Inverse, BoundaryKind::Dirichlet, TriangleTimeGrid::new(21, 1, 0.8).unwrap());
    assert_eq!(composition_identity(&zero_k, &zero_l, &random_probes(21, 3, 1)).unwrap(), 0.0);

    let np = constant_plant(10.0, BoundaryKind::Dirichlet);
    let tgt = TargetSpec::damped(0.0).unwrap();
    let deviation = |n: usize| {
        let grid = TriangleTimeGrid::new(n, 1, 0.8).unwrap();
        let (k, _) = solve_kernel(&np, &tgt, &grid, &SolveOptions::default()).unwrap();
        let (l, _) = solve_inverse_kernel(&np, &tgt, &grid, &SolveOptions::default()).unwrap();
        composition_identity(&k, &l, &random_probes(n, 4, 42)).unwrap()
    };
    let (coarse, fine) = (deviation(101), deviation(201));
    assert!(fine <= 5e-4, "{fine}");
    let ratio = coarse / fine;
    assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
}

#[test]
fn probes_are_reproducible() {
    assert_eq!(random_probes(17, 3, 9), random_probes(17, 3, 9));
    assert_ne!(random_probes(17, 3, 9), random_probes(17, 3, 10));
}
