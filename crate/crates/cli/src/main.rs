use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde_json::json;

use topopt::design_io::{decode_pgm, decode_raw, write_pgm, write_raw};
use topopt::diagnostics::{check_gradient, history_csv, sweep_epsilon};
use topopt::fem::SolverKind;
use topopt::objective::Formulation;
use topopt::optimizer::{ConstraintMode, OptimizationResult, Termination};
use topopt::problems::{builtin, load_config, Overrides, Problem, ProblemConfig, BUILTIN_NAMES};
use topopt::TopOptError;

const THREADS_VAR: &str = "TOPOPT_THREADS";

#[derive(Parser)]
#[command(name = "topopt", version, about = "Penalty-method topology optimization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize one problem and write its artifacts.
    Run {
        /// Builtin name (mech1, mech2, heat) or path to a TOML config.
        config: String,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Write a density snapshot every N accepted iterations.
        #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
        snapshot_every: u64,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Compare the descent field with central finite differences.
    CheckGradient {
        config: String,
        #[arg(long, default_value_t = 20)]
        directions: usize,
        #[arg(long, default_value_t = 1e-5)]
        step: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Failure threshold on the maximum relative error.
        #[arg(long, default_value_t = 1e-3)]
        tolerance: f64,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Scaled nonlocal perimeter of a disk for a list of smoothing lengths.
    SweepEpsilon {
        #[arg(long, default_value_t = 400)]
        n: usize,
        #[arg(long, default_value_t = 0.3)]
        radius: f64,
        #[arg(long, value_delimiter = ',', default_values_t = [0.08, 0.04, 0.02, 0.01, 0.005])]
        eps: Vec<f64>,
    },
    /// One run per interpolation exponent.
    SweepP {
        config: String,
        #[arg(long = "p-list", value_delimiter = ',', allow_hyphen_values = true, default_values_t = [1.0, 0.5, 0.1, -0.1, -1.0])]
        p_list: Vec<f64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
        snapshot_every: u64,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Convert a design file to a graymap.
    Render {
        input: PathBuf,
        /// Grid size, required for raw input.
        #[arg(long)]
        nx: Option<usize>,
        #[arg(long)]
        ny: Option<usize>,
        #[arg(long, short)]
        out: PathBuf,
    },
}

#[derive(Args, Clone, Default)]
struct OverrideArgs {
    #[arg(long)]
    nx: Option<usize>,
    #[arg(long)]
    ny: Option<usize>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    /// Interpolation exponent; switches the interpolation to GMIF.
    #[arg(long, allow_hyphen_values = true)]
    p: Option<f64>,
    /// inequality | equality
    #[arg(long, value_parser = kebab_enum::<ConstraintMode>)]
    constraint: Option<ConstraintMode>,
    /// stress | displacement-adjoint
    #[arg(long, value_parser = kebab_enum::<Formulation>)]
    formulation: Option<Formulation>,
    /// auto | direct | pcg
    #[arg(long, value_parser = kebab_enum::<SolverKind>)]
    solver: Option<SolverKind>,
}

impl OverrideArgs {
    fn to_overrides(&self) -> Overrides {
        Overrides {
            nx: self.nx,
            ny: self.ny,
            max_iters: self.max_iters,
            beta: self.beta,
            lambda: self.lambda,
            gamma: self.gamma,
            eps: self.eps,
            p: self.p,
            constraint: self.constraint,
            formulation: self.formulation,
            solver: self.solver,
        }
    }
}

fn kebab_enum<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

/// Errors carry the exit code they map to.
enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<TopOptError> for Failure {
    fn from(e: TopOptError) -> Self {
        match e {
            TopOptError::Usage(_) | TopOptError::Config(_) | TopOptError::Parse { .. } | TopOptError::Validation(_) => {
                Failure::Usage(e.to_string())
            }
            other => Failure::Runtime(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

type CliResult<T> = Result<T, Failure>;

fn resolve_config(name: &str, overrides: &OverrideArgs) -> CliResult<ProblemConfig> {
    let mut cfg = match builtin(name) {
        Some(c) => c,
        None => {
            let path = Path::new(name);
            if !path.exists() {
                return Err(Failure::Usage(format!(
                    "'{name}' is neither a builtin ({}) nor an existing config file",
                    BUILTIN_NAMES.join(", ")
                )));
            }
            load_config(path)?
        }
    };
    overrides.to_overrides().apply(&mut cfg)?;
    cfg.validate()?;
    Ok(cfg)
}

fn json_num(x: Option<f64>) -> serde_json::Value {
    x.filter(|v| v.is_finite()).map_or(serde_json::Value::Null, |v| json!(v))
}

fn summary(result: &OptimizationResult<f64>, mode: ConstraintMode) -> serde_json::Value {
    let last = result.final_breakdown;
    let failure = match &result.termination {
        Termination::SolverFailure(msg) => Some(msg.clone()),
        _ => None,
    };
    json!({
        "final_L": json_num(last.map(|b| b.total)),
        "final_J": json_num(result.final_physical),
        "perimeter": json_num(last.map(|b| b.perimeter)),
        "volume": json_num(last.map(|b| b.volume)),
        "constraint": mode,
        "iterations": result.history.len(),
        "termination": result.termination.reason(),
        "failure": failure,
        "monotone": result.is_monotone(),
        "total_trials": result.stats.total_trials,
        "line_search_steps": result.stats.line_search_steps,
        "max_reciprocity_error": result.stats.max_reciprocity_error,
        "max_volume_violation": result.stats.max_volume_violation,
    })
}

fn write_json(path: &Path, value: &serde_json::Value) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Failure::Runtime(e.to_string()))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Runs one configuration into `out`; returns the result and whether it failed.
fn run_into(cfg: &ProblemConfig, out: &Path, every: u64) -> CliResult<OptimizationResult<f64>> {
    fs::create_dir_all(out)?;
    let problem: Problem = cfg.build()?;
    let chi0 = cfg.initial_design()?;
    let (nx, ny) = (cfg.grid.nx, cfg.grid.ny);
    write_json(
        &out.join("manifest.json"),
        &json!({
            "tool_version": env!("CARGO_PKG_VERSION"),
            "output_dir": out.display().to_string(),
            "snapshot_every": every,
            "determinism": "the optimizer uses no random numbers; identical configs give identical history.csv and summary.json",
            "config": cfg,
        }),
    )?;
    write_pgm(&out.join("density_0000.pgm"), nx, ny, &chi0)?;
    let start = Instant::now();
    let mut timing = String::from("iter,seconds\n");
    let mut io_error = None;
    let result = problem.optimize(chi0, |rec, chi| {
        let _ = writeln!(timing, "{},{:.6}", rec.iter, start.elapsed().as_secs_f64());
        if rec.iter as u64 % every == 0 {
            if let Err(e) = write_pgm(&out.join(format!("density_{:04}.pgm", rec.iter)), nx, ny, chi) {
                io_error.get_or_insert(e);
            }
        }
        log::info!("iter {} L = {:.8e} J = {:.6e} volume = {:.4} trials = {}", rec.iter, rec.l_total, rec.j_physical, rec.volume, rec.trials);
    });
    if let Some(e) = io_error {
        return Err(e.into());
    }
    fs::write(out.join("history.csv"), history_csv(&result.history))?;
    fs::write(out.join("timing.csv"), timing)?;
    write_pgm(&out.join("final.pgm"), nx, ny, &result.design)?;
    write_raw(&out.join("final.raw"), &result.design)?;
    write_json(&out.join("summary.json"), &summary(&result, cfg.penalty.constraint))?;
    Ok(result)
}

fn finish(result: &OptimizationResult<f64>) -> CliResult<()> {
    match &result.termination {
        Termination::SolverFailure(msg) => Err(Failure::Runtime(format!("optimization aborted: {msg}"))),
        _ => Ok(()),
    }
}

fn cmd_run(config: &str, out: &Path, every: u64, overrides: &OverrideArgs) -> CliResult<()> {
    let cfg = resolve_config(config, overrides)?;
    let result = run_into(&cfg, out, every)?;
    println!(
        "{}: {} after {} iterations, L = {}, J = {}",
        cfg.name,
        result.termination.reason(),
        result.history.len(),
        result.final_breakdown.map_or("n/a".into(), |b| format!("{:.10e}", b.total)),
        result.final_physical.map_or("n/a".into(), |j| format!("{j:.10e}")),
    );
    finish(&result)
}

fn cmd_check_gradient(
    config: &str,
    directions: usize,
    step: f64,
    seed: u64,
    tolerance: f64,
    overrides: &OverrideArgs,
) -> CliResult<()> {
    let mut o = overrides.clone();
    o.nx = o.nx.or(Some(12));
    // the perimeter subgradient is not a derivative on relaxed designs
    o.gamma = Some(0.0);
    let cfg = resolve_config(config, &o)?;
    let report = match cfg.build()? {
        Problem::Mech(m) => check_gradient(&m, directions, step, seed)?,
        Problem::Heat(h) => check_gradient(&h, directions, step, seed)?,
    };
    println!("direction,finite_difference,analytic");
    for (i, (fd, exact)) in report.pairs.iter().enumerate() {
        println!("{i},{fd:e},{exact:e}");
    }
    if report.pairs.iter().all(|&(a, b)| a == 0.0 && b == 0.0) {
        println!("both sides vanish; exact");
    }
    println!("max relative error {:.3e}", report.max_rel_error);
    if report.max_rel_error > tolerance {
        return Err(Failure::Runtime(format!(
            "gradient check failed: {:.3e} > {tolerance:.1e}",
            report.max_rel_error
        )));
    }
    Ok(())
}

fn cmd_sweep_epsilon(n: usize, radius: f64, eps: &[f64]) -> CliResult<()> {
    if !(0.0..0.5).contains(&radius) {
        return Err(Failure::Usage(format!("radius must lie in [0, 0.5), got {radius}")));
    }
    let points = sweep_epsilon(n, radius, eps)?;
    println!("eps,scaled_perimeter,ratio");
    for p in points {
        println!("{:e},{:e},{:e}", p.eps, p.scaled, p.ratio);
    }
    Ok(())
}

fn thread_count() -> CliResult<Option<usize>> {
    match std::env::var(THREADS_VAR) {
        Ok(v) => match v.parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Failure::Usage(format!("{THREADS_VAR} must be a positive integer, got '{v}'"))),
        },
        Err(_) => Ok(None),
    }
}

fn cmd_sweep_p(config: &str, p_list: &[f64], out: &Path, every: u64, overrides: &OverrideArgs) -> CliResult<()> {
    let configs = p_list
        .iter()
        .map(|&p| {
            let mut o = overrides.clone();
            o.p = Some(p);
            Ok((p, resolve_config(config, &o)?))
        })
        .collect::<CliResult<Vec<_>>>()?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_count()? {
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| Failure::Runtime(e.to_string()))?;
    let results: Vec<CliResult<OptimizationResult<f64>>> = pool.install(|| {
        configs.par_iter().map(|(p, cfg)| run_into(cfg, &out.join(format!("p_{p}")), every)).collect()
    });
    println!("p,iterations,total_trials,line_search_steps,final_L,termination");
    let mut failed = None;
    for ((p, _), res) in configs.iter().zip(results) {
        match res {
            Ok(r) => {
                println!(
                    "{p},{},{},{},{},{}",
                    r.history.len(),
                    r.stats.total_trials,
                    r.stats.line_search_steps,
                    r.final_breakdown.map_or("nan".into(), |b| format!("{:e}", b.total)),
                    r.termination.reason()
                );
                if let Err(e) = finish(&r) {
                    failed.get_or_insert(e);
                }
            }
            Err(e) => {
                failed.get_or_insert(e);
            }
        }
    }
    failed.map_or(Ok(()), Err)
}

fn cmd_render(input: &Path, nx: Option<usize>, ny: Option<usize>, out: &Path) -> CliResult<()> {
    let bytes = fs::read(input)?;
    let (w, h, chi) = if bytes.starts_with(b"P5") {
        decode_pgm(&bytes)?
    } else {
        let (Some(w), Some(h)) = (nx, ny) else {
            return Err(Failure::Usage("raw designs need --nx and --ny".into()));
        };
        let chi = decode_raw(&bytes)?;
        if chi.len() != w * h {
            return Err(Failure::Usage(format!("raw design has {} values, expected {}", chi.len(), w * h)));
        }
        (w, h, chi)
    };
    write_pgm(out, w, h, &chi)?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run { config, out, snapshot_every, overrides } => cmd_run(config, out, *snapshot_every, overrides),
        Command::CheckGradient { config, directions, step, seed, tolerance, overrides } => {
            cmd_check_gradient(config, *directions, *step, *seed, *tolerance, overrides)
        }
        Command::SweepEpsilon { n, radius, eps } => cmd_sweep_epsilon(*n, *radius, eps),
        Command::SweepP { config, p_list, out, snapshot_every, overrides } => {
            cmd_sweep_p(config, p_list, out, *snapshot_every, overrides)
        }
        Command::Render { input, nx, ny, out } => cmd_render(input, *nx, *ny, out),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
