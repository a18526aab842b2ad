//! Command-line interface: `simulate`, `optimize`, `grad-check`, and
//! `sweep` subcommands with file-based inputs and outputs.
//!
//! Every invocation writes a `manifest.json` into its output directory
//! exactly once, just before exiting, on success and failure alike. Exit
//! codes: 0 success, 2 load/validation error, 3 kinematics error, 4 all
//! optimization starts failed, 5 gradient check failed.

use crate::kinematics::{self, Family, ParamsDoc, TrajectoryParams};
use crate::optimizer::{self, OptOptions, OptimizeError, StepRule};
use crate::scenario::{self, Scenario};
use crate::sensing::SensingModel;
use crate::simulator::{self, GradMode, SimError, SimOptions, SimResult};
use crate::validation;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use std::path::{Path, PathBuf};

pub const EXIT_OK: i32 = 0;
pub const EXIT_LOAD: i32 = 2;
pub const EXIT_KINEMATICS: i32 = 3;
pub const EXIT_ALL_STARTS_FAILED: i32 = 4;
pub const EXIT_GRADCHECK_FAILED: i32 = 5;

#[derive(Debug, Parser)]
#[command(
    name = "permon",
    version,
    about = "Persistent monitoring trajectory simulation and optimization"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one forward simulation and export traces, events, and a summary.
    Simulate(SimulateArgs),
    /// Optimize trajectory parameters by multi-start gradient descent.
    Optimize(OptimizeArgs),
    /// Check the analytic gradient against finite differences.
    GradCheck(GradCheckArgs),
    /// Optimize across sensing-model / family configurations and tabulate.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Args)]
struct SimulateArgs {
    /// Scenario file path, or a builtin name: case-a, case-b.
    #[arg(long)]
    scenario: String,
    /// Trajectory parameters file (JSON).
    #[arg(long)]
    params: PathBuf,
    /// Override the scenario integration step.
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long, value_enum, default_value_t = GradMode::Paper)]
    grad_mode: GradMode,
    #[arg(long, value_enum, default_value_t = SensingModel::Velocity)]
    sensing: SensingModel,
    /// Keep every k-th trace row.
    #[arg(long, default_value_t = 1)]
    trace_stride: usize,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Debug, Clone, Args)]
struct OptimizeArgs {
    #[arg(long)]
    scenario: String,
    #[arg(long, value_enum, default_value_t = Family::Ellipse)]
    family: Family,
    /// Number of random initializations.
    #[arg(long, default_value_t = 8)]
    starts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Objective-change termination threshold.
    #[arg(long, default_value_t = 0.01)]
    epsilon: f64,
    #[arg(long, default_value_t = 500)]
    max_iters: usize,
    /// Explicit initializations (JSON array of params documents);
    /// overrides --family/--starts/--seed.
    #[arg(long)]
    init: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = GradMode::Paper)]
    grad_mode: GradMode,
    #[arg(long, value_enum, default_value_t = SensingModel::Velocity)]
    sensing: SensingModel,
    /// Initial (Armijo) or constant (fixed) step size.
    #[arg(long, default_value_t = 1e-2)]
    alpha: f64,
    /// Use a constant step instead of Armijo backtracking.
    #[arg(long, default_value_t = false)]
    fixed_step: bool,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Debug, Clone, Args)]
struct GradCheckArgs {
    #[arg(long)]
    scenario: String,
    #[arg(long)]
    params: PathBuf,
    /// Gradient mode to verify (paper -> frozen-schedule oracle,
    /// total -> full-recursion oracle).
    #[arg(long, value_enum, default_value_t = GradMode::Paper)]
    mode: GradMode,
    /// Central-difference step.
    #[arg(long, default_value_t = 1e-5)]
    h: f64,
    #[arg(long, default_value_t = 1e-3)]
    tolerance: f64,
    #[arg(long, value_enum, default_value_t = SensingModel::Velocity)]
    sensing: SensingModel,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Debug, Clone, Args)]
struct SweepArgs {
    #[arg(long)]
    scenario: String,
    /// Families to sweep over (comma separated).
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [Family::Ellipse])]
    family: Vec<Family>,
    /// Sensing models to sweep over (comma separated).
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [SensingModel::Velocity])]
    sensing: Vec<SensingModel>,
    #[arg(long, default_value_t = 8)]
    starts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.01)]
    epsilon: f64,
    #[arg(long, default_value_t = 500)]
    max_iters: usize,
    #[arg(long, value_enum, default_value_t = GradMode::Paper)]
    grad_mode: GradMode,
    #[arg(long, default_value_t = 1e-2)]
    alpha: f64,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

/// What gets recorded about an invocation.
#[derive(Debug, Serialize)]
struct RunManifest {
    command: String,
    scenario: String,
    family: Option<String>,
    options: serde_json::Value,
    out_dir: String,
    exit_status: i32,
}

impl RunManifest {
    fn write(&self, dir: &Path) {
        if std::fs::create_dir_all(dir).is_err() {
            log::error!("cannot create output directory {}", dir.display());
            return;
        }
        match serde_json::to_string_pretty(self) {
            Ok(text) => {
                if let Err(e) = std::fs::write(dir.join("manifest.json"), text + "\n") {
                    log::error!("cannot write manifest: {e}");
                }
            }
            Err(e) => log::error!("cannot serialize manifest: {e}"),
        }
    }
}

/// Entry point used by the binary. Returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let _ = env_logger::Builder::from_env(
        env_logger::Env::new().filter_or("PM_LOG_LEVEL", "warn"),
    )
    .format_timestamp(None)
    .try_init();

    match cli.command {
        Command::Simulate(args) => {
            let mut manifest = RunManifest {
                command: "simulate".into(),
                scenario: args.scenario.clone(),
                family: None,
                options: serde_json::json!({
                    "params": args.params.display().to_string(),
                    "dt": args.dt,
                    "grad_mode": args.grad_mode.to_string(),
                    "sensing": args.sensing.to_string(),
                    "trace_stride": args.trace_stride,
                }),
                out_dir: args.out.display().to_string(),
                exit_status: EXIT_OK,
            };
            let code = cmd_simulate(&args, &mut manifest);
            manifest.exit_status = code;
            manifest.write(&args.out);
            code
        }
        Command::Optimize(args) => {
            let mut manifest = RunManifest {
                command: "optimize".into(),
                scenario: args.scenario.clone(),
                family: Some(args.family.to_string()),
                options: serde_json::json!({
                    "starts": args.starts,
                    "seed": args.seed,
                    "epsilon": args.epsilon,
                    "max_iters": args.max_iters,
                    "grad_mode": args.grad_mode.to_string(),
                    "sensing": args.sensing.to_string(),
                    "alpha": args.alpha,
                    "fixed_step": args.fixed_step,
                    "init": args.init.as_ref().map(|p| p.display().to_string()),
                    "dt": args.dt,
                }),
                out_dir: args.out.display().to_string(),
                exit_status: EXIT_OK,
            };
            let code = cmd_optimize(&args, &mut manifest);
            manifest.exit_status = code;
            manifest.write(&args.out);
            code
        }
        Command::GradCheck(args) => {
            let mut manifest = RunManifest {
                command: "grad-check".into(),
                scenario: args.scenario.clone(),
                family: None,
                options: serde_json::json!({
                    "params": args.params.display().to_string(),
                    "mode": args.mode.to_string(),
                    "h": args.h,
                    "tolerance": args.tolerance,
                    "sensing": args.sensing.to_string(),
                    "dt": args.dt,
                }),
                out_dir: args.out.display().to_string(),
                exit_status: EXIT_OK,
            };
            let code = cmd_grad_check(&args, &mut manifest);
            manifest.exit_status = code;
            manifest.write(&args.out);
            code
        }
        Command::Sweep(args) => {
            let mut manifest = RunManifest {
                command: "sweep".into(),
                scenario: args.scenario.clone(),
                family: None,
                options: serde_json::json!({
                    "family": args.family.iter().map(|f| f.to_string()).collect::<Vec<_>>(),
                    "sensing": args.sensing.iter().map(|s| s.to_string()).collect::<Vec<_>>(),
                    "starts": args.starts,
                    "seed": args.seed,
                    "epsilon": args.epsilon,
                    "max_iters": args.max_iters,
                    "grad_mode": args.grad_mode.to_string(),
                    "alpha": args.alpha,
                    "dt": args.dt,
                }),
                out_dir: args.out.display().to_string(),
                exit_status: EXIT_OK,
            };
            let code = cmd_sweep(&args, &mut manifest);
            manifest.exit_status = code;
            manifest.write(&args.out);
            code
        }
    }
}

fn load_scenario_source(source: &str, dt: Option<f64>) -> Result<Scenario, String> {
    let mut sc = match source {
        "case-a" => scenario::builtin_case_a(),
        "case-b" => scenario::builtin_case_b(),
        path => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| format!("cannot read scenario {path}: {e}"))?;
            scenario::load_scenario(&text).map_err(|e| e.to_string())?
        }
    };
    if let Some(dt) = dt {
        sc.horizon.dt = dt;
        sc.validate().map_err(|e| e.to_string())?;
    }
    Ok(sc)
}

fn load_params_file(path: &Path) -> Result<Vec<TrajectoryParams>, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read params {}: {e}", path.display()))?;
    kinematics::load_params(&text).map_err(|e| e.to_string())
}

fn sim_exit_code(err: &SimError) -> i32 {
    match err {
        SimError::Kinematics { .. } => EXIT_KINEMATICS,
        _ => EXIT_LOAD,
    }
}

fn fail(code: i32, message: impl std::fmt::Display) -> i32 {
    eprintln!("error: {message}");
    code
}

#[derive(Serialize)]
struct Summary<'a> {
    #[serde(rename = "J")]
    j: f64,
    #[serde(rename = "J1")]
    j1: f64,
    #[serde(rename = "J2")]
    j2: f64,
    #[serde(rename = "J3")]
    j3: f64,
    diagnostics: &'a simulator::Diagnostics,
}

fn write_summary(result: &SimResult, dir: &Path) -> Result<(), String> {
    let summary = Summary {
        j: result.j,
        j1: result.j1,
        j2: result.j2,
        j3: result.j3,
        diagnostics: &result.diagnostics,
    };
    let text = serde_json::to_string_pretty(&summary).map_err(|e| e.to_string())?;
    std::fs::write(dir.join("summary.json"), text + "\n").map_err(|e| e.to_string())
}

fn write_run_artifacts(result: &SimResult, dir: &Path) -> Result<(), String> {
    std::fs::create_dir_all(dir).map_err(|e| e.to_string())?;
    simulator::export_traces(result, dir).map_err(|e| e.to_string())?;
    write_summary(result, dir)
}

fn cmd_simulate(args: &SimulateArgs, manifest: &mut RunManifest) -> i32 {
    let scenario = match load_scenario_source(&args.scenario, args.dt) {
        Ok(sc) => sc,
        Err(e) => return fail(EXIT_LOAD, e),
    };
    let params = match load_params_file(&args.params) {
        Ok(p) => p,
        Err(e) => return fail(EXIT_LOAD, e),
    };
    manifest.family = params.first().map(|p| p.family().to_string());
    let result = match simulator::simulate_with(
        &scenario,
        &params,
        SimOptions {
            grad_mode: args.grad_mode,
            sensing: args.sensing,
            record_traces: true,
            trace_stride: args.trace_stride,
            record_schedule: false,
        },
    ) {
        Ok(r) => r,
        Err(e) => return fail(sim_exit_code(&e), e),
    };
    if let Err(e) = write_run_artifacts(&result, &args.out) {
        return fail(EXIT_LOAD, e);
    }
    println!(
        "J = {:.4} (J1 = {:.4}, J2 = {:.4}, J3 = {:.4}), {} events",
        result.j,
        result.j1,
        result.j2,
        result.j3,
        result.events.len()
    );
    EXIT_OK
}

fn optimize_once(
    scenario: &Scenario,
    family: Family,
    sensing: SensingModel,
    args_starts: usize,
    seed: u64,
    epsilon: f64,
    max_iters: usize,
    grad_mode: GradMode,
    alpha: f64,
    fixed_step: bool,
    init: Option<&Path>,
) -> Result<optimizer::OptResult, (i32, String)> {
    let inits: Vec<Vec<TrajectoryParams>> = match init {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| (EXIT_LOAD, format!("cannot read init file: {e}")))?;
            let docs: Vec<ParamsDoc> =
                serde_json::from_str(&text).map_err(|e| (EXIT_LOAD, format!("init file: {e}")))?;
            docs.into_iter().map(|d| d.into_params()).collect()
        }
        None => optimizer::random_initializations(scenario, family, args_starts, seed),
    };
    if inits.is_empty() {
        return Err((EXIT_LOAD, "no initializations".into()));
    }
    let opts = OptOptions {
        epsilon,
        max_iters,
        step_rule: if fixed_step {
            StepRule::Fixed { alpha }
        } else {
            StepRule::Armijo {
                alpha0: alpha,
                shrink: 0.5,
                c: 1e-4,
            }
        },
        grad_mode,
        sensing,
        ..OptOptions::default()
    };
    optimizer::optimize(scenario, &inits, &opts).map_err(|e| match e {
        OptimizeError::AllStartsFailed { .. } => (EXIT_ALL_STARTS_FAILED, e.to_string()),
        OptimizeError::NoStarts => (EXIT_LOAD, e.to_string()),
        OptimizeError::Sim(ref s) => (sim_exit_code(s), e.to_string()),
    })
}

fn write_opt_artifacts(res: &optimizer::OptResult, dir: &Path) -> Result<(), String> {
    std::fs::create_dir_all(dir).map_err(|e| e.to_string())?;
    let mut buf = Vec::new();
    optimizer::write_convergence_csv(&res.iterates, &mut buf).map_err(|e| e.to_string())?;
    std::fs::write(dir.join("convergence.csv"), buf).map_err(|e| e.to_string())?;
    let doc = ParamsDoc::from_params(&res.best_params).map_err(|e| e.to_string())?;
    let text = serde_json::to_string_pretty(&doc).map_err(|e| e.to_string())?;
    std::fs::write(dir.join("best_params.json"), text + "\n").map_err(|e| e.to_string())?;
    write_run_artifacts(&res.final_result, dir)
}

fn cmd_optimize(args: &OptimizeArgs, manifest: &mut RunManifest) -> i32 {
    let scenario = match load_scenario_source(&args.scenario, args.dt) {
        Ok(sc) => sc,
        Err(e) => return fail(EXIT_LOAD, e),
    };
    if args.grad_mode == GradMode::None {
        return fail(EXIT_LOAD, "optimize needs a gradient mode of paper or total");
    }
    let res = match optimize_once(
        &scenario,
        args.family,
        args.sensing,
        args.starts,
        args.seed,
        args.epsilon,
        args.max_iters,
        args.grad_mode,
        args.alpha,
        args.fixed_step,
        args.init.as_deref(),
    ) {
        Ok(r) => r,
        Err((code, msg)) => return fail(code, msg),
    };
    manifest.family = res.best_params.first().map(|p| p.family().to_string());
    if let Err(e) = write_opt_artifacts(&res, &args.out) {
        return fail(EXIT_LOAD, e);
    }
    for w in &res.warnings {
        log::warn!("{w}");
    }
    println!(
        "best start {} reached J = {:.4} (J2 = {:.6}, J3 = {:.6})",
        res.start_index, res.best_j, res.final_result.j2, res.final_result.j3
    );
    EXIT_OK
}

fn cmd_grad_check(args: &GradCheckArgs, manifest: &mut RunManifest) -> i32 {
    let scenario = match load_scenario_source(&args.scenario, args.dt) {
        Ok(sc) => sc,
        Err(e) => return fail(EXIT_LOAD, e),
    };
    let params = match load_params_file(&args.params) {
        Ok(p) => p,
        Err(e) => return fail(EXIT_LOAD, e),
    };
    manifest.family = params.first().map(|p| p.family().to_string());
    if args.mode == GradMode::None {
        return fail(EXIT_LOAD, "grad-check needs a gradient mode of paper or total");
    }
    let report = match validation::check(
        &scenario,
        &params,
        args.mode,
        args.h,
        args.tolerance,
        args.sensing,
    ) {
        Ok(r) => r,
        Err(e) => return fail(sim_exit_code(&e), e),
    };
    if std::fs::create_dir_all(&args.out).is_err() {
        return fail(EXIT_LOAD, "cannot create output directory");
    }
    match serde_json::to_string_pretty(&report) {
        Ok(text) => {
            if let Err(e) = std::fs::write(args.out.join("report.json"), text + "\n") {
                return fail(EXIT_LOAD, e);
            }
        }
        Err(e) => return fail(EXIT_LOAD, e),
    }
    println!(
        "grad-check {}: max rel error {:.3e} (tolerance {:.1e})",
        if report.pass { "PASS" } else { "FAIL" },
        report.max_rel_error,
        report.tolerance
    );
    if report.pass {
        EXIT_OK
    } else {
        EXIT_GRADCHECK_FAILED
    }
}

fn cmd_sweep(args: &SweepArgs, manifest: &mut RunManifest) -> i32 {
    let scenario = match load_scenario_source(&args.scenario, args.dt) {
        Ok(sc) => sc,
        Err(e) => return fail(EXIT_LOAD, e),
    };
    if args.family.is_empty() || args.sensing.is_empty() {
        return fail(EXIT_LOAD, "empty sweep axis");
    }
    if args.grad_mode == GradMode::None {
        return fail(EXIT_LOAD, "sweep needs a gradient mode of paper or total");
    }
    let _ = manifest;
    if std::fs::create_dir_all(&args.out).is_err() {
        return fail(EXIT_LOAD, "cannot create output directory");
    }
    let mut rows = Vec::new();
    for family in &args.family {
        for sensing in &args.sensing {
            let label = format!("{family}_{sensing}");
            log::info!("sweep configuration {label}");
            let res = match optimize_once(
                &scenario,
                *family,
                *sensing,
                args.starts,
                args.seed,
                args.epsilon,
                args.max_iters,
                args.grad_mode,
                args.alpha,
                false,
                None,
            ) {
                Ok(r) => r,
                Err((code, msg)) => return fail(code, format!("configuration {label}: {msg}")),
            };
            let dir = args.out.join(&label);
            if let Err(e) = write_opt_artifacts(&res, &dir) {
                return fail(EXIT_LOAD, e);
            }
            rows.push((label, res.best_j, res.final_result.j2, res.final_result.j3));
        }
    }
    let mut table = String::from("configuration,J,J2,J3\n");
    for (label, j, j2, j3) in &rows {
        table.push_str(&format!("{label},{j:.8e},{j2:.8e},{j3:.8e}\n"));
    }
    if let Err(e) = std::fs::write(args.out.join("comparison.csv"), table) {
        return fail(EXIT_LOAD, e);
    }
    for (label, j, j2, j3) in &rows {
        println!("{label}: J = {j:.4}, J2 = {j2:.6}, J3 = {j3:.6}");
    }
    EXIT_OK
}
