//! Command-line orchestration: config parsing and validation, pipeline
//! dispatch across the library modules, and artifact persistence.
//!
//! Every run is driven by a JSON config file with `problem`, `grid`,
//! `solver`, and `output` sections. Artifacts are a `report.json` (always),
//! plus `profile.csv`, `iters.csv`, and `spectrum.csv` where the subcommand
//! produces the corresponding data. Reports carry a `schema_version` and no
//! timestamps, so a fixed config and seed reproduce them byte for byte.
//!
//! Exit status: 0 on success, 1 on numeric failure (a stage ran but did not
//! converge or pass), 2 on configuration errors (nothing is written).

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::energy::stencil_residual;
use crate::error::{QwError, Result};
use crate::grid::Grid;
use crate::model::{choose_shift, validate, Nonlinearity, Potential, Problem, SamplingPlan};
use crate::solver::{
    anti_coercivity_probe, continuation_in_omega, local_linking_probe, local_linking_solve,
    mountain_pass_solve, multiplicity_search, SolveReport, SolverOpts,
};
use crate::spectrum::{beta, coercivity_eta, eigenpairs, SpectralSplit};
use crate::transform::{verify_p1, TransformTable};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Parser)]
#[command(name = "quasiwave", version, about = "Standing-wave solver for quasilinear Schr\u{f6}dinger equations", long_about = None)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the hypotheses on (V, g) over the grid and report each item.
    Validate(RunArgs),
    /// Eigenvalues, splitting index, coercivity constant, and beta factors.
    Spectrum(RunArgs),
    /// Tabulate the change of variables f and its derivatives as CSV.
    TransformTable(TransformArgs),
    /// Single critical-point solve (mountain pass or local linking by ell).
    Solve(RunArgs),
    /// Multiplicity search for several distinct solutions.
    Multi(RunArgs),
    /// Local-linking and anti-coercivity geometry probes.
    Probe(RunArgs),
    /// Continuation in the frequency parameter omega.
    Continue(RunArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Path to the JSON run config.
    #[arg(long, short)]
    pub config: PathBuf,
    /// Print the resolved pipeline without computing or writing artifacts.
    #[arg(long)]
    pub dry_run: bool,
    /// Override the output directory from the config.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TransformArgs {
    #[arg(long, default_value_t = -10.0)]
    pub t_min: f64,
    #[arg(long, default_value_t = 10.0)]
    pub t_max: f64,
    #[arg(long, default_value_t = 2001)]
    pub count: usize,
    /// Output directory for table.csv and the property report.
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub dry_run: bool,
}

// ---------------------------------------------------------------------------
// Run configuration
// ---------------------------------------------------------------------------

/// Shift policy: `"auto"` picks m from the grid minimum of V; a number fixes
/// it directly.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(untagged)]
pub enum ShiftPolicy {
    Fixed(f64),
    Named(String),
}

impl Default for ShiftPolicy {
    fn default() -> Self {
        ShiftPolicy::Named("auto".into())
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct NonlinearitySpec {
    pub kind: String,
    #[serde(default = "default_p")]
    pub p: f64,
}

fn default_p() -> f64 {
    6.0
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub potential: Potential,
    pub nonlinearity: NonlinearitySpec,
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default)]
    pub shift: ShiftPolicy,
}

fn default_dim() -> usize {
    1
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub radius: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    /// "auto" (by ell), "mountain-pass", or "local-linking".
    pub mode: String,
    pub grad_tol: f64,
    pub res_tol: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    pub max_newton: usize,
    pub seed: u64,
    /// Number of eigenpairs to compute for the splitting.
    pub k_modes: usize,
    /// Number of distinct solutions requested by `multi`.
    pub count: usize,
    /// Sphere radius for the local-linking probe.
    pub eps: f64,
    /// Random directions per probe.
    pub n_dirs: usize,
    /// Ray radii for the anti-coercivity probe.
    pub radii: Vec<f64>,
    /// Number of leading modes spanning the anti-coercivity subspace.
    pub probe_modes: usize,
    /// Increasing frequency values for `continue`.
    pub omega_list: Vec<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let o = SolverOpts::default();
        SolverConfig {
            mode: "auto".into(),
            grad_tol: o.grad_tol,
            res_tol: o.res_tol,
            max_outer: o.max_outer,
            max_inner: o.max_inner,
            max_newton: o.max_newton,
            seed: o.seed,
            k_modes: 12,
            count: 3,
            eps: 1e-2,
            n_dirs: 200,
            radii: vec![20.0, 40.0, 80.0],
            probe_modes: 5,
            omega_list: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub directory: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            directory: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    pub grid: GridConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<RunConfig> {
        let text = fs::read_to_string(path)
            .map_err(|e| QwError::Config(format!("cannot read {}: {e}", path.display())))?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| QwError::Config(format!("{}: {e}", path.display())))?;
        cfg.check()?;
        Ok(cfg)
    }

    fn check(&self) -> Result<()> {
        let s = &self.solver;
        if s.grad_tol <= 0.0 || s.res_tol <= 0.0 {
            return Err(QwError::Config("grad_tol and res_tol must be positive".into()));
        }
        if self.grid.n < 64 {
            return Err(QwError::Config(format!("n must be >= 64 (got {})", self.grid.n)));
        }
        if self.grid.radius <= 0.0 {
            return Err(QwError::Config("grid radius must be positive".into()));
        }
        if !(1..=3).contains(&self.problem.dim) {
            return Err(QwError::Config(format!("dim must be 1, 2, or 3 (got {})", self.problem.dim)));
        }
        match self.problem.nonlinearity.kind.as_str() {
            "power" | "zero" => {}
            other => {
                return Err(QwError::Config(format!("unknown nonlinearity kind '{other}'")));
            }
        }
        match s.mode.as_str() {
            "auto" | "mountain-pass" | "local-linking" => {}
            other => return Err(QwError::Config(format!("unknown solver mode '{other}'"))),
        }
        if let ShiftPolicy::Named(name) = &self.problem.shift {
            if name != "auto" {
                return Err(QwError::Config(format!(
                    "shift must be \"auto\" or a number (got \"{name}\")"
                )));
            }
        }
        Ok(())
    }

    fn nonlinearity(&self) -> Nonlinearity {
        match self.problem.nonlinearity.kind.as_str() {
            "zero" => Nonlinearity::zero(),
            _ => Nonlinearity::power(self.problem.nonlinearity.p),
        }
    }

    /// Resolve the grid, problem (with shift), and solver options.
    pub fn resolve(&self) -> Result<(Problem, Grid, SolverOpts)> {
        let grid = Grid::new(self.problem.dim, self.grid.radius, self.grid.n)?;
        let shift = match self.problem.shift {
            ShiftPolicy::Fixed(m) => m,
            ShiftPolicy::Named(_) => choose_shift(&self.problem.potential, &grid)?,
        };
        let problem = Problem {
            potential: self.problem.potential.clone(),
            nonlinearity: self.nonlinearity(),
            dim: self.problem.dim,
            shift,
        };
        let s = &self.solver;
        let opts = SolverOpts {
            grad_tol: s.grad_tol,
            res_tol: s.res_tol,
            max_outer: s.max_outer,
            max_inner: s.max_inner,
            max_newton: s.max_newton,
            seed: s.seed,
            ..SolverOpts::default()
        };
        Ok((problem, grid, opts))
    }
}

/// Builtin preset: V = x^2 - 4 (two negative directions), g = t^5, m chosen
/// automatically.
pub fn preset_oscillator_indefinite() -> RunConfig {
    RunConfig {
        problem: ProblemConfig {
            potential: Potential::ShiftedHarmonic { omega: 4.0 },
            nonlinearity: NonlinearitySpec {
                kind: "power".into(),
                p: 6.0,
            },
            dim: 1,
            shift: ShiftPolicy::default(),
        },
        grid: GridConfig {
            radius: 12.0,
            n: 601,
        },
        solver: SolverConfig::default(),
        output: OutputConfig::default(),
    }
}

// ---------------------------------------------------------------------------
// Artifact helpers
// ---------------------------------------------------------------------------

fn write_text(dir: &Path, name: &str, text: &str) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), text)?;
    Ok(())
}

fn write_report(dir: &Path, payload: serde_json::Value) -> Result<()> {
    let text = serde_json::to_string_pretty(&payload)?;
    write_text(dir, "report.json", &(text + "\n"))
}

fn profile_csv(grid: &Grid, reports: &[&SolveReport]) -> String {
    let mut s = String::from("node");
    for i in 0..reports.len() {
        s.push_str(&format!(",v_{i},u_{i}"));
    }
    s.push('\n');
    for j in 0..grid.n {
        s.push_str(&format!("{:.17e}", grid.nodes[j]));
        for r in reports {
            s.push_str(&format!(",{:.17e},{:.17e}", r.v[j], r.u[j]));
        }
        s.push('\n');
    }
    s
}

fn iters_csv(reports: &[&SolveReport]) -> String {
    let mut s = String::from("solution,iter,stage,phi,grad_norm,rho,step\n");
    for (si, r) in reports.iter().enumerate() {
        for rec in &r.iterations {
            s.push_str(&format!(
                "{si},{},{},{:.10e},{:.10e},{:.10e},{:.10e}\n",
                rec.iter, rec.stage, rec.phi, rec.grad_norm, rec.rho, rec.step
            ));
        }
    }
    s
}

fn spectrum_csv(split: &SpectralSplit, m: f64) -> String {
    let mut s = String::from("i,lambda,lambda_refined,beta\n");
    for (i, (&l, &lr)) in split
        .lambdas
        .iter()
        .zip(&split.lambdas_refined)
        .enumerate()
    {
        let b = beta(split, m, i + 1).map(|b| format!("{b:.17e}")).unwrap_or_default();
        s.push_str(&format!("{},{l:.17e},{lr:.17e},{b}\n", i + 1));
    }
    s
}

fn report_header(command: &str, cfg: &RunConfig) -> serde_json::Value {
    json!({
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "seed": cfg.solver.seed,
        "config": cfg,
    })
}

fn merge(mut base: serde_json::Value, extra: serde_json::Value) -> serde_json::Value {
    if let (Some(b), Some(e)) = (base.as_object_mut(), extra.as_object()) {
        for (k, v) in e {
            b.insert(k.clone(), v.clone());
        }
    }
    base
}

// ---------------------------------------------------------------------------
// Pipelines
// ---------------------------------------------------------------------------

/// Run a parsed command. Returns the process exit status (0 ok, 1 numeric
/// failure); configuration problems surface as `Err(QwError::Config)` and
/// map to status 2 in `main`.
pub fn run(command: &Command) -> Result<i32> {
    match command {
        Command::TransformTable(args) => run_transform_table(args),
        Command::Validate(args) => with_config(args, "validate", run_validate),
        Command::Spectrum(args) => with_config(args, "spectrum", run_spectrum),
        Command::Solve(args) => with_config(args, "solve", run_solve),
        Command::Multi(args) => with_config(args, "multi", run_multi),
        Command::Probe(args) => with_config(args, "probe", run_probe),
        Command::Continue(args) => with_config(args, "continue", run_continue),
    }
}

fn with_config(
    args: &RunArgs,
    name: &str,
    body: fn(&RunConfig, &Path) -> Result<i32>,
) -> Result<i32> {
    let mut cfg = RunConfig::from_path(&args.config)?;
    if let Some(dir) = &args.out_dir {
        cfg.output.directory = dir.clone();
    }
    // resolve before the dry-run gate so config errors always exit 2
    let (problem, grid, _) = cfg.resolve()?;
    if args.dry_run {
        println!(
            "{name}: dim={} R={} n={} shift(m)={:.6} mode={} -> {}",
            grid.dim,
            cfg.grid.radius,
            grid.n,
            problem.shift,
            cfg.solver.mode,
            cfg.output.directory.display()
        );
        println!("stages: parse-config, resolve-problem, {name}, write-artifacts");
        return Ok(0);
    }
    body(&cfg, &cfg.output.directory.clone())
}

fn run_transform_table(args: &TransformArgs) -> Result<i32> {
    if !(args.t_min < args.t_max) || args.count < 2 {
        return Err(QwError::Config("transform-table: need t_min < t_max and count >= 2".into()));
    }
    if args.dry_run {
        println!(
            "transform-table: {} points on [{}, {}] -> {}",
            args.count,
            args.t_min,
            args.t_max,
            args.out_dir.display()
        );
        return Ok(0);
    }
    let table = TransformTable::default();
    let mut csv = String::from("t,f,f_prime,f_second\n");
    for i in 0..args.count {
        let t = args.t_min + (args.t_max - args.t_min) * i as f64 / (args.count - 1) as f64;
        csv.push_str(&format!(
            "{t:.17e},{:.17e},{:.17e},{:.17e}\n",
            table.f(t)?,
            table.f_prime(t)?,
            table.f_second(t)?
        ));
    }
    write_text(&args.out_dir, "table.csv", &csv)?;
    let samples = crate::transform::log_spaced_samples(1e-8, 1e4, 20_000);
    let prop = verify_p1(&table, &samples, 6.0)?;
    let report = json!({
        "schema_version": SCHEMA_VERSION,
        "command": "transform-table",
        "t_min": args.t_min,
        "t_max": args.t_max,
        "count": args.count,
        "properties": prop,
    });
    let pass = prop.all_pass;
    write_report(&args.out_dir, report)?;
    println!("transform-table: properties {}", if pass { "pass" } else { "FAIL" });
    Ok(if pass { 0 } else { 1 })
}

fn run_validate(cfg: &RunConfig, dir: &Path) -> Result<i32> {
    let (problem, grid, _) = cfg.resolve()?;
    let rep = validate(&problem, &grid, &SamplingPlan::default());
    for item in &rep.items {
        println!(
            "{} {}: {}",
            if item.pass { "pass" } else { "FAIL" },
            item.name,
            item.detail
        );
    }
    let all = rep.all_pass;
    write_report(dir, merge(report_header("validate", cfg), json!({ "validation": rep })))?;
    Ok(if all { 0 } else { 1 })
}

fn spectrum_payload(problem: &Problem, split: &SpectralSplit) -> serde_json::Value {
    let eta = coercivity_eta(split, problem.shift).ok();
    json!({
        "ell": split.ell,
        "lambdas": split.lambdas,
        "lambdas_refined": split.lambdas_refined,
        "gap": split.gap,
        "degenerate": split.degenerate,
        "eta": eta,
        "shift": problem.shift,
    })
}

fn run_spectrum(cfg: &RunConfig, dir: &Path) -> Result<i32> {
    let (problem, grid, _) = cfg.resolve()?;
    let split = eigenpairs(&problem, &grid, cfg.solver.k_modes)?;
    write_text(dir, "spectrum.csv", &spectrum_csv(&split, problem.shift))?;
    write_report(
        dir,
        merge(report_header("spectrum", cfg), json!({ "spectrum": spectrum_payload(&problem, &split) })),
    )?;
    println!(
        "spectrum: ell={} gap={:.6e} degenerate={:?}",
        split.ell, split.gap, split.degenerate
    );
    Ok(if split.is_degenerate() { 1 } else { 0 })
}

fn pick_mode(cfg: &RunConfig, split: &SpectralSplit) -> Result<&'static str> {
    match cfg.solver.mode.as_str() {
        "mountain-pass" => Ok("mountain-pass"),
        "local-linking" => Ok("local-linking"),
        _ => Ok(if split.ell == 0 { "mountain-pass" } else { "local-linking" }),
    }
}

fn run_solve(cfg: &RunConfig, dir: &Path) -> Result<i32> {
    let (problem, grid, opts) = cfg.resolve()?;
    let table = TransformTable::default();
    let split = eigenpairs(&problem, &grid, cfg.solver.k_modes)?;
    let rep = match pick_mode(cfg, &split)? {
        "mountain-pass" => mountain_pass_solve(&problem, &grid, &table, &split, &opts)?,
        _ => local_linking_solve(&problem, &grid, &table, &split, &opts)?,
    };
    let stencil = stencil_residual(&problem, &grid, &rep.u)?;
    write_text(dir, "spectrum.csv", &spectrum_csv(&split, problem.shift))?;
    write_text(dir, "profile.csv", &profile_csv(&grid, &[&rep]))?;
    write_text(dir, "iters.csv", &iters_csv(&[&rep]))?;
    write_report(
        dir,
        merge(
            report_header("solve", cfg),
            json!({
                "spectrum": spectrum_payload(&problem, &split),
                "solution": rep,
                "stencil_residual": stencil,
            }),
        ),
    )?;
    println!(
        "solve [{}]: converged={} phi={:.6e} |grad|={:.3e} residual={:.3e} sign_changes={}",
        cfg.solver.mode, rep.converged, rep.phi, rep.grad_norm, rep.pde_residual, rep.sign_changes
    );
    Ok(if rep.converged { 0 } else { 1 })
}

fn run_multi(cfg: &RunConfig, dir: &Path) -> Result<i32> {
    let (problem, grid, opts) = cfg.resolve()?;
    if !problem.nonlinearity.odd {
        return Err(QwError::Config("multi: multiplicity requires an odd nonlinearity".into()));
    }
    let table = TransformTable::default();
    let split = eigenpairs(&problem, &grid, cfg.solver.k_modes)?;
    let reps = multiplicity_search(&problem, &grid, &table, &split, cfg.solver.count, &opts)?;
    let refs: Vec<&SolveReport> = reps.iter().collect();
    write_text(dir, "spectrum.csv", &spectrum_csv(&split, problem.shift))?;
    write_text(dir, "profile.csv", &profile_csv(&grid, &refs))?;
    write_text(dir, "iters.csv", &iters_csv(&refs))?;
    write_report(
        dir,
        merge(
            report_header("multi", cfg),
            json!({
                "spectrum": spectrum_payload(&problem, &split),
                "requested": cfg.solver.count,
                "found": reps.len(),
                "solutions": reps,
            }),
        ),
    )?;
    for (i, r) in reps.iter().enumerate() {
        println!(
            "multi[{i}]: phi={:.6e} sign_changes={} morse={} |grad|={:.3e}",
            r.phi, r.sign_changes, r.morse_index, r.grad_norm
        );
    }
    Ok(if reps.len() >= cfg.solver.count { 0 } else { 1 })
}

fn run_probe(cfg: &RunConfig, dir: &Path) -> Result<i32> {
    let (problem, grid, _) = cfg.resolve()?;
    let table = TransformTable::default();
    let k = cfg.solver.k_modes.max(cfg.solver.probe_modes + 2);
    let split = eigenpairs(&problem, &grid, k)?;
    let linking = if split.ell > 0 {
        Some(local_linking_probe(
            &problem,
            &grid,
            &table,
            &split,
            cfg.solver.eps,
            cfg.solver.n_dirs,
            cfg.solver.seed,
        )?)
    } else {
        None
    };
    let basis = split.modes[..cfg.solver.probe_modes.min(split.modes.len())].to_vec();
    let anti = anti_coercivity_probe(
        &problem,
        &grid,
        &table,
        &basis,
        &cfg.solver.radii,
        cfg.solver.n_dirs,
        cfg.solver.seed,
    )?;
    let pass = anti.pass && linking.as_ref().map_or(true, |l| l.pass);
    write_text(dir, "spectrum.csv", &spectrum_csv(&split, problem.shift))?;
    write_report(
        dir,
        merge(
            report_header("probe", cfg),
            json!({
                "spectrum": spectrum_payload(&problem, &split),
                "local_linking": linking,
                "anti_coercivity": anti,
            }),
        ),
    )?;
    println!(
        "probe: linking={} anti_coercivity={}",
        linking.as_ref().map_or("n/a".into(), |l| l.pass.to_string()),
        anti.pass
    );
    Ok(if pass { 0 } else { 1 })
}

fn run_continue(cfg: &RunConfig, dir: &Path) -> Result<i32> {
    let (problem, grid, opts) = cfg.resolve()?;
    if cfg.solver.omega_list.len() < 2 {
        return Err(QwError::Config("continue: omega_list needs at least two increasing values".into()));
    }
    let table = TransformTable::default();
    let pts = continuation_in_omega(
        &problem,
        &grid,
        &table,
        &cfg.solver.omega_list,
        cfg.solver.k_modes,
        &opts,
    )?;
    let solved: Vec<&SolveReport> = pts.iter().filter_map(|p| p.report.as_ref()).collect();
    if !solved.is_empty() {
        write_text(dir, "profile.csv", &profile_csv(&grid, &solved))?;
        write_text(dir, "iters.csv", &iters_csv(&solved))?;
    }
    write_report(dir, merge(report_header("continue", cfg), json!({ "points": pts })))?;
    let mut ok = true;
    for p in &pts {
        println!(
            "continue omega={}: ell={} degenerate={} converged={}",
            p.omega,
            p.ell,
            p.degenerate,
            p.report.as_ref().map_or(false, |r| r.converged)
        );
        if !p.degenerate && !p.report.as_ref().map_or(false, |r| r.converged) {
            ok = false;
        }
    }
    Ok(if ok { 0 } else { 1 })
}
