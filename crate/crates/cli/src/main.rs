use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use steadygrad::Param;
use steadygrad_cli::commands::{
    optimize_summary, write_grad_csv, write_optimize_csv, write_steady_csv, write_sweep_csv,
};
use steadygrad_cli::config::{parse_backend, parse_free};
use steadygrad_cli::{grad, optimize, steady, sweep, CliError, OptimizeSpec, RunConfig, SweepSpec};

#[derive(Parser)]
#[command(name = "steadygrad", version, about = "Redfield spin-boson steady states and their gradients")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration (`key = value` lines).
    #[arg(long)]
    config: PathBuf,
    /// CSV destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Steady state by time integration and null-space solve.
    Steady {
        #[command(flatten)]
        common: Common,
    },
    /// Expectation and gradients along a parameter grid.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        param: String,
        #[arg(long, allow_hyphen_values = true)]
        from: f64,
        #[arg(long, allow_hyphen_values = true)]
        to: f64,
        #[arg(long)]
        steps: usize,
    },
    /// Gradient of the steady-state observable for every free parameter.
    Grad {
        #[command(flatten)]
        common: Common,
        /// Comma-separated parameter names, or `none`.
        #[arg(long)]
        free: Option<String>,
        /// `direct` or `adjoint-ode`.
        #[arg(long)]
        grad_method: Option<String>,
    },
    /// Adam search for epsilon and delta matching a target expectation.
    Optimize {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        target: Option<f64>,
        #[arg(long)]
        free: Option<String>,
        #[arg(long)]
        iters: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        seeds: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn emit(out: Option<&Path>, write: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<(), CliError> {
    let mut buf = Vec::new();
    write(&mut buf)?;
    match out {
        Some(path) => std::fs::write(path, &buf)
            .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display()))),
        None => Ok(std::io::stdout().lock().write_all(&buf)?),
    }
}

fn free_override(flag: Option<String>, cfg: &RunConfig, default: &[Param]) -> Result<Vec<Param>, CliError> {
    match flag {
        Some(s) => parse_free(s.trim()).map_err(|e| CliError::Config(format!("--free: {e}"))),
        None => Ok(cfg.free.clone().unwrap_or_else(|| default.to_vec())),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Steady { common } => {
            let cfg = RunConfig::load(&common.config)?;
            let outcome = steady(&cfg)?;
            for note in &outcome.notes {
                eprintln!("{note}");
            }
            emit(common.out.as_deref(), |w| write_steady_csv(w, &outcome.rows))
        }
        Command::Sweep {
            common,
            param,
            from,
            to,
            steps,
        } => {
            let cfg = RunConfig::load(&common.config)?;
            let param: Param = param.parse().map_err(|e| CliError::Config(format!("--param: {e}")))?;
            let rows = sweep(&cfg, &SweepSpec { param, from, to, steps })?;
            for r in &rows {
                if let Some(e) = &r.error {
                    eprintln!("{param} = {}: {e}", r.value);
                } else if r.degenerate {
                    eprintln!("{param} = {}: degenerate steady state, fixed point taken from rho0", r.value);
                }
            }
            emit(common.out.as_deref(), |w| write_sweep_csv(w, &rows))
        }
        Command::Grad {
            common,
            free,
            grad_method,
        } => {
            let mut cfg = RunConfig::load(&common.config)?;
            if let Some(m) = grad_method {
                cfg.grad_method = parse_backend(&m).map_err(CliError::Config)?;
            }
            let free = free_override(free, &cfg, &Param::ALL)?;
            let outcome = grad(&cfg, &free)?;
            let c = outcome.counters;
            eprintln!("observable = {}", steadygrad_cli::fmt_real(outcome.report.observable_value));
            eprintln!(
                "steady state via {}; method {}",
                outcome.steady_method.name(),
                outcome.report.method.name()
            );
            if outcome.report.diagnostics.degenerate {
                eprintln!("warning: degenerate steady state, gradient taken at the rho0-dependent fixed point");
            }
            eprintln!(
                "counters: steady_solves={} adjoint_solves={} liouvillian_builds={}",
                c.steady_solves, c.adjoint_solves, c.liouvillian_builds
            );
            emit(common.out.as_deref(), |w| write_grad_csv(w, &cfg, &outcome))
        }
        Command::Optimize {
            common,
            target,
            free,
            iters,
            lr,
            seeds,
            seed,
        } => {
            let cfg = RunConfig::load(&common.config)?;
            let spec = OptimizeSpec {
                target: target
                    .or(cfg.target)
                    .ok_or_else(|| CliError::Config("optimize needs a target (--target or `target =`)".into()))?,
                free: free_override(free, &cfg, &[Param::Epsilon, Param::Delta])?,
                iters: iters.unwrap_or(cfg.iters),
                lr: lr.unwrap_or(cfg.lr),
                seeds: seeds.unwrap_or(cfg.seeds),
                seed: seed.unwrap_or(cfg.seed),
            };
            let runs = optimize(&cfg, &spec)?;
            emit(common.out.as_deref(), |w| write_optimize_csv(w, &runs))?;
            for line in optimize_summary(&runs) {
                eprintln!("{line}");
            }
            match runs.into_iter().find_map(|r| r.error) {
                Some(e) => Err(e.into()),
                None => Ok(()),
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
