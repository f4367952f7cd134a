//! Subcommand pipelines. Every pipeline fills a [`Summary`], writes it to
//! `summary.json` and derives the exit status from it alone.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use cgle_core::expr::Expr;
use cgle_core::kernels::{
    exponential_bound_ratio, read_kernel, solve_inverse_kernel, solve_kernel, write_kernel, DominanceReport,
    SolveOptions,
};
use cgle_core::sim::{self, h1_norm, l2_norm, transformed_trace, write_snapshots_csv, write_trace_csv};
use cgle_core::{BoundaryKind, KernelField, NormalizedPlant, Scenario, SimulationTrace, StateField, TargetSpec, TriangleTimeGrid};
use cgle_oracle::{composition_identity, kernel_pde_residual, random_probes, target_residual, KernelEquation, ResidualReport};
use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;

pub const KERNEL_CSV: &str = "kernel.csv";
pub const INVERSE_CSV: &str = "inverse_kernel.csv";
pub const TRACE_CSV: &str = "trace.csv";
pub const SNAPSHOTS_CSV: &str = "snapshots.csv";
pub const TRANSFORMED_CSV: &str = "transformed_trace.csv";
pub const SUMMARY_JSON: &str = "summary.json";

const PROBES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Kernel,
    Simulate,
    Verify,
    Run,
}

#[derive(Debug, Clone, Default)]
pub struct Options {
    /// Overrides `[output] dir`.
    pub out_dir: Option<PathBuf>,
    pub kernel_file: Option<PathBuf>,
    pub seed: u64,
    pub strict: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSummary {
    pub n_iterations: usize,
    pub converged: bool,
    pub sup_norm_last_term: f64,
    pub sup_k: f64,
    pub sup_k_c: f64,
    pub n_const: Option<f64>,
    pub m_const: Option<f64>,
    /// Largest ratio of a series term to its dominance bound.
    pub dominance_worst_ratio: Option<f64>,
    /// `sup |k| exp(-M (x^2 - y^2)) / M` and the same for `k_c`.
    pub exponential_bound_ratio: Option<(f64, f64)>,
}

impl KernelSummary {
    fn new(field: &KernelField, report: Option<&DominanceReport>) -> Self {
        let (sup_k, sup_k_c) = field.sup_abs();
        Self {
            n_iterations: field.n_iterations,
            converged: field.converged,
            sup_norm_last_term: field.sup_norm_last_term,
            sup_k,
            sup_k_c,
            n_const: report.map(|r| r.n_const),
            m_const: report.map(|r| r.m_const),
            dominance_worst_ratio: report.map(|r| r.per_term_bounds.iter().fold(0.0f64, |m, t| m.max(t.worst_ratio))),
            exponential_bound_ratio: report.map(|r| exponential_bound_ratio(field, r.m_const)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub closed_loop: bool,
    pub n_steps: usize,
    pub initial_l2: f64,
    pub final_l2: f64,
    pub final_h1: f64,
    pub fitted_decay_rate: f64,
    pub transformed_decay_rate: Option<f64>,
    /// Largest `|u(1) - p|` over the run.
    pub max_input_mismatch: f64,
    /// Largest `|w(1)|` over the transformed snapshots.
    pub max_transformed_boundary: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bound {
    Min,
    Max,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    /// `None` when the quantity could not be computed.
    pub value: Option<f64>,
    pub bound: Bound,
    pub threshold: f64,
    pub passed: bool,
}

impl Check {
    fn new(name: &str, value: Option<f64>, bound: Bound, threshold: f64) -> Self {
        let passed = value.is_some_and(|v| match bound {
            Bound::Min => v >= threshold,
            Bound::Max => v <= threshold,
        });
        Self {
            name: name.into(),
            value,
            bound,
            threshold,
            passed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub command: Command,
    pub complete: bool,
    pub error: Option<String>,
    pub strict: bool,
    /// Normalized coefficients carry the horizon factor `T`; runs with `T = 1`
    /// reproduce the unscaled convention.
    #[serde(default)]
    pub horizon_scaled_coefficients: bool,
    pub warnings: Vec<String>,
    pub seed: u64,
    pub config: RunConfig,
    pub kernel: Option<KernelSummary>,
    pub inverse_kernel: Option<KernelSummary>,
    pub simulation: Option<SimulationSummary>,
    pub residuals: BTreeMap<String, ResidualReport>,
    pub composition_deviation: Option<f64>,
    pub checks: Vec<Check>,
    pub files: Vec<PathBuf>,
}

/// 0 when the run completed and every check passed, 1 when a check failed,
/// 2 when the run did not complete.
pub fn exit_code(summary: &Summary) -> i32 {
    if !summary.complete {
        2
    } else if summary.checks.iter().any(|c| !c.passed) {
        1
    } else {
        0
    }
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    opts: &'a Options,
    out: PathBuf,
    summary: Summary,
}

impl Ctx<'_> {
    fn warn(&mut self, message: String) -> anyhow::Result<()> {
        warn!("{message}");
        if self.opts.strict {
            bail!("strict mode: {message}");
        }
        self.summary.warnings.push(message);
        Ok(())
    }

    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.out.join(name);
        self.summary.files.push(p.clone());
        p
    }

    fn model(&mut self) -> anyhow::Result<(NormalizedPlant, TargetSpec, TriangleTimeGrid)> {
        if !self.cfg.plant.analytic_in_t {
            bail!("coefficients are not declared analytic in t; refusing to solve kernels");
        }
        let np = self.cfg.normalized_plant()?;
        let tgt = self.cfg.target_spec()?;
        let grid = self.cfg.grid()?;
        for w in np.analyticity_warnings() {
            self.warn(w)?;
        }
        Ok((np, tgt, grid))
    }

    fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            tol: self.cfg.control.tol,
            max_iter: self.cfg.control.max_iter,
            retain_terms: false,
        }
    }

    fn solve(&mut self, np: &NormalizedPlant, tgt: &TargetSpec, grid: &TriangleTimeGrid) -> anyhow::Result<(KernelField, KernelField)> {
        let opts = self.solve_options();
        info!("solving forward kernel on {} nodes x {} time slices", grid.n_x, grid.n_t);
        let (forward, report) = solve_kernel(np, tgt, grid, &opts)?;
        if !forward.converged {
            self.warn(format!(
                "forward kernel not converged after {} iterations (last term {:e})",
                forward.n_iterations, forward.sup_norm_last_term
            ))?;
        }
        let (kp, km) = (self.path(KERNEL_CSV), self.out.join("kernel.json"));
        write_kernel(&forward, Some(&report), &kp, &km)?;
        self.summary.kernel = Some(KernelSummary::new(&forward, Some(&report)));

        info!("solving inverse kernel");
        let (inverse, inv_report) = solve_inverse_kernel(np, tgt, grid, &opts)?;
        if !inverse.converged {
            self.warn(format!("inverse kernel not converged after {} iterations", inverse.n_iterations))?;
        }
        let (ip, im) = (self.path(INVERSE_CSV), self.out.join("inverse_kernel.json"));
        write_kernel(&inverse, Some(&inv_report), &ip, &im)?;
        self.summary.inverse_kernel = Some(KernelSummary::new(&inverse, Some(&inv_report)));
        Ok((forward, inverse))
    }

    fn simulate(&mut self, np: &NormalizedPlant, tgt: &TargetSpec, forward: &KernelField) -> anyhow::Result<SimulationTrace> {
        let cfg = self.cfg;
        let sc = Scenario {
            np: np.clone(),
            tgt: tgt.clone(),
            kernel: cfg.control.closed_loop.then(|| forward.clone()),
            initial_rho: Expr::parse(&cfg.initial.rho)?,
            initial_iota: Expr::parse(&cfg.initial.iota)?,
            n_x: cfg.grid.n_x,
            dt: cfg.grid.dt,
            t_end: cfg.grid.t_end,
            scheme: cfg.grid.scheme,
            snapshot_stride: cfg.output.snapshot_stride,
        };
        info!(
            "simulating {} loop for {} steps",
            if sc.closed_loop() { "closed" } else { "open" },
            sc.n_steps()
        );
        let trace = sim::run(&sc)?;
        let p = self.path(TRACE_CSV);
        write_trace_csv(&trace, &p)?;
        if trace.snapshots.is_some() {
            let p = self.path(SNAPSHOTS_CSV);
            write_snapshots_csv(&trace, &p)?;
        }
        let mismatch = mismatch(&trace);
        self.summary.simulation = Some(SimulationSummary {
            closed_loop: sc.closed_loop(),
            n_steps: sc.n_steps(),
            initial_l2: trace.l2_norms[0],
            final_l2: *trace.l2_norms.last().unwrap_or(&0.0),
            final_h1: *trace.h1_norms.last().unwrap_or(&0.0),
            fitted_decay_rate: trace.fitted_decay_rate,
            transformed_decay_rate: None,
            max_input_mismatch: mismatch,
            max_transformed_boundary: None,
        });
        Ok(trace)
    }

    fn transform(&mut self, trace: &SimulationTrace, forward: &KernelField) -> anyhow::Result<Option<SimulationTrace>> {
        if trace.snapshots.is_none() {
            self.warn("no snapshots retained; transformed trace and target residual skipped".into())?;
            return Ok(None);
        }
        let mapped = transformed_trace(trace, forward)?;
        let p = self.path(TRANSFORMED_CSV);
        write_trace_csv(&mapped, &p)?;
        if let Some(sim) = self.summary.simulation.as_mut() {
            sim.transformed_decay_rate = Some(mapped.fitted_decay_rate);
            sim.max_transformed_boundary = Some(
                mapped
                    .inputs
                    .iter()
                    .fold(0.0, |m: f64, c| m.max(c.p_r.abs()).max(c.p_i.abs())),
            );
        }
        Ok(Some(mapped))
    }

    fn oracles(
        &mut self,
        np: &NormalizedPlant,
        tgt: &TargetSpec,
        forward: &KernelField,
        inverse: Option<&KernelField>,
        mapped: Option<&SimulationTrace>,
    ) -> anyhow::Result<()> {
        let which = match forward.boundary {
            BoundaryKind::Dirichlet => KernelEquation::DirichletForward,
            BoundaryKind::Neumann => KernelEquation::NeumannForward,
        };
        let r = kernel_pde_residual(forward, np, tgt, which)?;
        self.summary.residuals.insert("kernel".into(), r);
        if let Some(inv) = inverse {
            let r = kernel_pde_residual(inv, np, tgt, KernelEquation::Inverse)?;
            self.summary.residuals.insert("inverse_kernel".into(), r);
            let probes = random_probes(forward.grid.n_x, PROBES, self.opts.seed);
            self.summary.composition_deviation = Some(composition_identity(forward, inv, &probes)?);
        }
        if let Some(m) = mapped {
            if m.snapshots.as_ref().map_or(0, Vec::len) >= 3 {
                let r = target_residual(m, np, tgt)?;
                self.summary.residuals.insert("target".into(), r);
            } else {
                self.warn("fewer than 3 snapshots; target residual skipped".into())?;
            }
        }
        Ok(())
    }

    fn evaluate_checks(&mut self) {
        let s = &self.summary;
        let c = &self.cfg.checks;
        let mut checks = Vec::new();
        for (name, k) in [("kernel_converged", &s.kernel), ("inverse_kernel_converged", &s.inverse_kernel)] {
            if let Some(k) = k {
                checks.push(Check::new(name, Some(k.sup_norm_last_term), Bound::Max, self.cfg.control.tol));
            }
        }
        for (name, k) in [("dominance", &s.kernel), ("inverse_dominance", &s.inverse_kernel)] {
            if let Some(ratio) = k.as_ref().and_then(|k| k.dominance_worst_ratio) {
                checks.push(Check::new(name, Some(ratio), Bound::Max, 1.0 + 1e-12));
            }
        }
        let closed = s.simulation.as_ref().is_some_and(|x| x.closed_loop);
        if let (Some(t), true) = (c.max_boundary, closed) {
            let value = s.simulation.as_ref().and_then(|x| x.max_transformed_boundary);
            checks.push(Check::new("transformed_boundary", value, Bound::Max, t));
            let value = s.simulation.as_ref().map(|x| x.max_input_mismatch);
            checks.push(Check::new("boundary_input_identity", value, Bound::Max, t));
        }
        if let Some(t) = c.min_decay_rate {
            let value = s.simulation.as_ref().map(|x| x.fitted_decay_rate);
            checks.push(Check::new("decay_rate", value, Bound::Min, t));
        }
        if let Some(t) = c.max_kernel_residual {
            let value = ["kernel", "inverse_kernel"]
                .iter()
                .filter_map(|k| s.residuals.get(*k).map(|r| r.max_abs_residual))
                .reduce(f64::max);
            checks.push(Check::new("kernel_residual", value, Bound::Max, t));
        }
        if let Some(t) = c.max_target_residual {
            let value = s.residuals.get("target").map(|r| r.max_abs_residual);
            checks.push(Check::new("target_residual", value, Bound::Max, t));
        }
        if let Some(t) = c.max_composition {
            checks.push(Check::new("composition", s.composition_deviation, Bound::Max, t));
        }
        self.summary.checks = checks;
    }
}

fn mismatch(trace: &SimulationTrace) -> f64 {
    let Some(snaps) = &trace.snapshots else {
        return 0.0;
    };
    let mut worst = 0.0f64;
    for s in snaps {
        let Some(i) = trace.times.iter().position(|&t| t == s.time) else {
            continue;
        };
        let last = s.n_x() - 1;
        worst = worst
            .max((s.rho[last] - trace.inputs[i].p_r).abs())
            .max((s.iota[last] - trace.inputs[i].p_i).abs());
    }
    worst
}

/// Reads a snapshot CSV (`time,x,rho,iota`) back into a trace.
pub fn read_snapshots(path: &Path) -> anyhow::Result<SimulationTrace> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text.lines();
    if lines.next() != Some("time,x,rho,iota") {
        bail!("{}: unexpected header", path.display());
    }
    let mut snaps: Vec<StateField> = Vec::new();
    for (n, line) in lines.enumerate() {
        let v: Vec<f64> = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .with_context(|| format!("{} row {}", path.display(), n + 2))?;
        if v.len() != 4 {
            bail!("{} row {}: expected 4 columns", path.display(), n + 2);
        }
        match snaps.last_mut() {
            Some(s) if s.time == v[0] => {
                s.rho.push(v[2]);
                s.iota.push(v[3]);
            }
            _ => snaps.push(StateField {
                rho: vec![v[2]],
                iota: vec![v[3]],
                time: v[0],
            }),
        }
    }
    let times = snaps.iter().map(|s| s.time).collect::<Vec<_>>();
    let l2: Vec<f64> = snaps.iter().map(l2_norm).collect();
    Ok(SimulationTrace {
        fitted_decay_rate: sim::fit_decay_rate(&times, &l2),
        h1_norms: snaps.iter().map(h1_norm).collect(),
        inputs: Vec::new(),
        times,
        l2_norms: l2,
        snapshots: Some(snaps),
    })
}

fn load_kernel(path: &Path) -> anyhow::Result<KernelField> {
    let meta = path.with_extension("json");
    let (field, _) = read_kernel(path, &meta).with_context(|| format!("reading kernel {}", path.display()))?;
    Ok(field)
}

fn execute(ctx: &mut Ctx, command: Command) -> anyhow::Result<()> {
    fs::create_dir_all(&ctx.out).with_context(|| format!("creating {}", ctx.out.display()))?;
    let (np, tgt, grid) = ctx.model()?;
    match command {
        Command::Kernel => {
            ctx.solve(&np, &tgt, &grid)?;
        }
        Command::Simulate => {
            let forward = match ctx.opts.kernel_file.clone() {
                Some(p) => load_kernel(&p)?,
                None => ctx.solve(&np, &tgt, &grid)?.0,
            };
            if forward.boundary != np.boundary || forward.grid.n_x != grid.n_x {
                bail!("kernel file does not match the configured boundary kind and grid");
            }
            let trace = ctx.simulate(&np, &tgt, &forward)?;
            ctx.transform(&trace, &forward)?;
        }
        Command::Verify => {
            let kernel_path = ctx.opts.kernel_file.clone().unwrap_or_else(|| ctx.out.join(KERNEL_CSV));
            let forward = load_kernel(&kernel_path)?;
            let inverse_path = ctx.out.join(INVERSE_CSV);
            let inverse = if inverse_path.exists() {
                Some(load_kernel(&inverse_path)?)
            } else {
                ctx.warn(format!("{} not found; composition check skipped", inverse_path.display()))?;
                None
            };
            let snaps_path = ctx.out.join(SNAPSHOTS_CSV);
            let mapped = if snaps_path.exists() {
                let trace = read_snapshots(&snaps_path)?;
                Some(transformed_trace(&trace, &forward)?)
            } else {
                ctx.warn(format!("{} not found; target residual skipped", snaps_path.display()))?;
                None
            };
            ctx.oracles(&np, &tgt, &forward, inverse.as_ref(), mapped.as_ref())?;
        }
        Command::Run => {
            let (forward, inverse) = ctx.solve(&np, &tgt, &grid)?;
            let trace = ctx.simulate(&np, &tgt, &forward)?;
            let mapped = ctx.transform(&trace, &forward)?;
            ctx.oracles(&np, &tgt, &forward, Some(&inverse), mapped.as_ref())?;
        }
    }
    Ok(())
}

/// Runs one subcommand, writing outputs and `summary.json` under the output
/// directory. Errors are recorded in the summary, which is then incomplete.
pub fn run_command(cfg: &RunConfig, command: Command, opts: &Options) -> Summary {
    let out = opts.out_dir.clone().unwrap_or_else(|| cfg.output.dir.clone());
    let mut ctx = Ctx {
        cfg,
        opts,
        out,
        summary: Summary {
            command,
            complete: false,
            error: None,
            strict: opts.strict,
            horizon_scaled_coefficients: true,
            warnings: Vec::new(),
            seed: opts.seed,
            config: cfg.clone(),
            kernel: None,
            inverse_kernel: None,
            simulation: None,
            residuals: BTreeMap::new(),
            composition_deviation: None,
            checks: Vec::new(),
            files: Vec::new(),
        },
    };
    match execute(&mut ctx, command) {
        Ok(()) => ctx.summary.complete = true,
        Err(e) => ctx.summary.error = Some(format!("{e:#}")),
    }
    ctx.evaluate_checks();
    let path = ctx.out.join(SUMMARY_JSON);
    let written = serde_json::to_string_pretty(&ctx.summary)
        .map_err(anyhow::Error::from)
        .and_then(|json| fs::write(&path, json).map_err(anyhow::Error::from));
    match written {
        Ok(()) => ctx.summary.files.push(path),
        Err(e) => {
            ctx.summary.complete = false;
            ctx.summary.error.get_or_insert_with(|| format!("writing summary: {e}"));
        }
    }
    ctx.summary
}

/// The full pipeline: kernels, closed- or open-loop run, transform and oracles.
pub fn run_scenario(cfg: &RunConfig, opts: &Options) -> Summary {
    run_command(cfg, Command::Run, opts)
}
