//! The four commands. Each returns plain data; CSV rendering is separate so
//! tests can inspect results without parsing text.

use std::io::Write;

use rayon::prelude::*;
use steadygrad::{
    build_liouvillian, finite_difference_gradient, implicit_gradient, integrate_to_steady, null_space_steady,
    optimize_partial, solve_steady_auto, CounterSnapshot, Counters, DesignOptions, Error, FiniteDifferenceOptions,
    Initialization, LiouvillianOptions, LossRecord, Matrix, Param, Report, SensitivityOptions, SteadyMethod,
    SteadyOptions,
};

use crate::config::RunConfig;
use crate::{fmt_real, CliError};

pub const STEADY_HEADER: &str = "method,rho_00_re,rho_00_im,rho_01_re,rho_01_im,rho_10_re,rho_10_im,rho_11_re,rho_11_im,expectation,residual_norm,steps";
pub const SWEEP_HEADER: &str = "param_name,param_value,expectation,grad_implicit,grad_fd";
pub const GRAD_HEADER: &str = "param_name,param_value,expectation,gradient,method";
pub const OPTIMIZE_HEADER: &str = "seed,iteration,epsilon,delta,expectation,loss";

impl RunConfig {
    pub fn steady_options(&self) -> SteadyOptions<f64> {
        SteadyOptions {
            tol_ss: self.tol_ss,
            rank_tol: self.rank_tol,
            ..SteadyOptions::default()
        }
    }

    pub fn liouvillian_options(&self) -> LiouvillianOptions<f64> {
        let mut opts = LiouvillianOptions::default();
        opts.half_fourier.include_imag = self.include_imag;
        opts
    }

    pub fn sensitivity_options(&self, allow_degenerate: bool) -> SensitivityOptions<f64> {
        SensitivityOptions {
            rank_tol: self.rank_tol,
            allow_degenerate,
            ..SensitivityOptions::default()
        }
    }

    pub fn fd_options(&self) -> FiniteDifferenceOptions<f64> {
        FiniteDifferenceOptions {
            step: self.fd_step,
            steady: self.steady_options(),
            ..FiniteDifferenceOptions::default()
        }
    }
}

/// Worker pool honouring the optional `THREADS` cap.
fn pool() -> Result<rayon::ThreadPool, CliError> {
    let threads = match std::env::var("THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map_err(|_| CliError::Config(format!("THREADS must be a non-negative integer, got `{v}`")))?,
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))
}

#[derive(Clone, Debug)]
pub struct SteadyRow {
    pub method: SteadyMethod,
    pub rho: Matrix,
    pub expectation: f64,
    pub residual_norm: f64,
    pub steps: usize,
}

#[derive(Clone, Debug)]
pub struct SteadyOutcome {
    pub rows: Vec<SteadyRow>,
    /// Human-readable diagnostics for stderr.
    pub notes: Vec<String>,
}

/// Steady state by time integration and, when the fixed point is unique, by
/// the null-space solve as a cross-check.
pub fn steady(cfg: &RunConfig) -> Result<SteadyOutcome, CliError> {
    let counters = Counters::default();
    let l = build_liouvillian(&cfg.model, &cfg.liouvillian_options())?;
    let obs = cfg.observable.matrix();
    let opts = cfg.steady_options();
    let row = |ss: steadygrad::SteadyState| SteadyRow {
        method: ss.method,
        expectation: ss.rho_ss.expectation(&obs),
        rho: ss.rho_ss.into_matrix(),
        residual_norm: ss.residual_norm,
        steps: ss.steps,
    };
    let mut notes = Vec::new();
    let integrated = integrate_to_steady(&l, &cfg.rho0, &opts, &counters)?;
    let degenerate = integrated.degenerate_dimension;
    let mut rows = vec![row(integrated)];
    match degenerate {
        Some(dim) => {
            notes.push(format!(
                "warning: degenerate steady state, zero eigenspace has dimension {dim}; \
                 the time-integration fixed point depends on rho0 and the null-space solve is skipped"
            ));
        }
        None => {
            let ns = null_space_steady(&l, 1.0, cfg.rank_tol, &counters)?;
            let gap = (&rows[0].rho - ns.rho_ss.matrix()).max_abs();
            notes.push(format!("methods agree to max |drho| = {gap:e}"));
            rows.push(row(ns));
        }
    }
    if cfg.model.delta == 0.0 {
        let sz = Matrix::pauli_z();
        let conserved = cfg.rho0.expectation(&sz);
        let (eps, beta) = (cfg.model.epsilon, cfg.model.bath.beta);
        notes.push(format!("delta = 0: <sigma_z> is conserved, value from rho0 = {conserved}"));
        notes.push(format!(
            "delta = 0: thermal form -tanh(beta*epsilon/2) = {}, magnitude tanh(epsilon/2) = {}",
            -(beta * eps / 2.0).tanh(),
            (eps / 2.0).tanh()
        ));
    }
    Ok(SteadyOutcome { rows, notes })
}

pub fn write_steady_csv(out: &mut impl Write, rows: &[SteadyRow]) -> std::io::Result<()> {
    writeln!(out, "{STEADY_HEADER}")?;
    for r in rows {
        let mut fields = vec![r.method.name().to_string()];
        for i in 0..2 {
            for j in 0..2 {
                fields.push(fmt_real(r.rho[(i, j)].re));
                fields.push(fmt_real(r.rho[(i, j)].im));
            }
        }
        fields.push(fmt_real(r.expectation));
        fields.push(fmt_real(r.residual_norm));
        fields.push(r.steps.to_string());
        writeln!(out, "{}", fields.join(","))?;
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepSpec {
    pub param: Param,
    pub from: f64,
    pub to: f64,
    pub steps: usize,
}

impl SweepSpec {
    pub fn grid(&self) -> Vec<f64> {
        let last = (self.steps - 1) as f64;
        (0..self.steps)
            .map(|k| {
                if k + 1 == self.steps {
                    self.to
                } else {
                    self.from + (self.to - self.from) * (k as f64 / last)
                }
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub param: Param,
    pub value: f64,
    pub expectation: f64,
    pub grad_implicit: f64,
    pub grad_fd: f64,
    pub degenerate: bool,
    /// Set when the point failed; the numeric fields are then NaN.
    pub error: Option<String>,
}

fn sweep_point(cfg: &RunConfig, param: Param, value: f64) -> Result<(f64, f64, f64, bool), Error> {
    let p = cfg.model.with(param, value)?;
    let counters = Counters::default();
    let lopts = cfg.liouvillian_options();
    let l = build_liouvillian(&p, &lopts)?;
    let obs = cfg.observable.matrix();
    let ss = solve_steady_auto(&l, &cfg.rho0, &cfg.steady_options(), &counters)?;
    let implicit = implicit_gradient(
        cfg.grad_method,
        &l,
        &ss.rho_ss,
        &obs,
        &[param],
        &cfg.sensitivity_options(true),
        &counters,
    )?;
    let fd = finite_difference_gradient(&p, &cfg.rho0, &obs, &[param], &lopts, &cfg.fd_options(), &counters)?;
    Ok((
        ss.rho_ss.expectation(&obs),
        implicit.entries[0].value,
        fd.entries[0].value,
        implicit.diagnostics.degenerate,
    ))
}

/// Expectation and both gradients along a one-parameter grid. Grid points
/// run in parallel; rows come back in grid order and failures become rows.
pub fn sweep(cfg: &RunConfig, spec: &SweepSpec) -> Result<Vec<SweepRow>, CliError> {
    if spec.steps < 2 {
        return Err(CliError::Config(format!("sweep needs steps >= 2, got {}", spec.steps)));
    }
    if !(spec.from.is_finite() && spec.to.is_finite()) {
        return Err(CliError::Config("sweep bounds must be finite".into()));
    }
    let grid = spec.grid();
    let rows = pool()?.install(|| {
        grid.par_iter()
            .map(|&value| match sweep_point(cfg, spec.param, value) {
                Ok((expectation, grad_implicit, grad_fd, degenerate)) => SweepRow {
                    param: spec.param,
                    value,
                    expectation,
                    grad_implicit,
                    grad_fd,
                    degenerate,
                    error: None,
                },
                Err(e) => SweepRow {
                    param: spec.param,
                    value,
                    expectation: f64::NAN,
                    grad_implicit: f64::NAN,
                    grad_fd: f64::NAN,
                    degenerate: false,
                    error: Some(e.to_string()),
                },
            })
            .collect()
    });
    Ok(rows)
}

pub fn write_sweep_csv(out: &mut impl Write, rows: &[SweepRow]) -> std::io::Result<()> {
    writeln!(out, "{SWEEP_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.param,
            fmt_real(r.value),
            fmt_real(r.expectation),
            fmt_real(r.grad_implicit),
            fmt_real(r.grad_fd)
        )?;
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct GradOutcome {
    pub report: Report,
    pub steady_method: SteadyMethod,
    pub counters: CounterSnapshot,
}

/// One steady solve and one adjoint solve for every parameter in `free`.
pub fn grad(cfg: &RunConfig, free: &[Param]) -> Result<GradOutcome, CliError> {
    let counters = Counters::default();
    let l = build_liouvillian(&cfg.model, &cfg.liouvillian_options())?;
    let obs = cfg.observable.matrix();
    let ss = solve_steady_auto(&l, &cfg.rho0, &cfg.steady_options(), &counters)?;
    let report = implicit_gradient(
        cfg.grad_method,
        &l,
        &ss.rho_ss,
        &obs,
        free,
        &cfg.sensitivity_options(cfg.allow_degenerate),
        &counters,
    )?;
    Ok(GradOutcome {
        report,
        steady_method: ss.method,
        counters: counters.snapshot(),
    })
}

pub fn write_grad_csv(out: &mut impl Write, cfg: &RunConfig, g: &GradOutcome) -> std::io::Result<()> {
    writeln!(out, "{GRAD_HEADER}")?;
    for e in &g.report.entries {
        writeln!(
            out,
            "{},{},{},{},{}",
            e.param,
            fmt_real(cfg.model.get(e.param)),
            fmt_real(g.report.observable_value),
            fmt_real(e.value),
            g.report.method.name()
        )?;
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizeSpec {
    pub target: f64,
    pub free: Vec<Param>,
    pub iters: usize,
    pub lr: f64,
    pub seeds: usize,
    /// Seeds used are `seed, seed + 1, ...`.
    pub seed: u64,
}

#[derive(Clone, Debug)]
pub struct SeedRun {
    pub seed: u64,
    pub records: Vec<LossRecord<f64>>,
    pub error: Option<Error>,
}

/// Independent Adam runs from random starts, one per seed, in parallel.
pub fn optimize(cfg: &RunConfig, spec: &OptimizeSpec) -> Result<Vec<SeedRun>, CliError> {
    if let Some(bad) = spec.free.iter().find(|p| !matches!(p, Param::Epsilon | Param::Delta)) {
        return Err(CliError::Config(format!("only epsilon and delta can be optimized, got {bad}")));
    }
    if !spec.target.is_finite() {
        return Err(CliError::Config("target must be finite".into()));
    }
    let mut opts = DesignOptions {
        steady: cfg.steady_options(),
        liouvillian: cfg.liouvillian_options(),
        sensitivity: cfg.sensitivity_options(true),
        ..DesignOptions::default()
    };
    opts.hyper.lr = spec.lr;
    let obs = cfg.observable.matrix();
    let seeds: Vec<u64> = (0..spec.seeds as u64).map(|k| spec.seed + k).collect();
    let runs = pool()?.install(|| {
        seeds
            .par_iter()
            .map(|&seed| {
                let (records, error) = optimize_partial(
                    &cfg.model,
                    &cfg.rho0,
                    spec.target,
                    &obs,
                    &spec.free,
                    spec.iters,
                    Initialization::Random { seed },
                    &opts,
                    &Counters::default(),
                );
                SeedRun { seed, records, error }
            })
            .collect()
    });
    Ok(runs)
}

pub fn write_optimize_csv(out: &mut impl Write, runs: &[SeedRun]) -> std::io::Result<()> {
    writeln!(out, "{OPTIMIZE_HEADER}")?;
    for run in runs {
        for r in &run.records {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                run.seed,
                r.iteration,
                fmt_real(r.epsilon),
                fmt_real(r.delta),
                fmt_real(r.observable),
                fmt_real(r.loss)
            )?;
        }
    }
    Ok(())
}

/// Final-iterate table, one line per seed.
pub fn optimize_summary(runs: &[SeedRun]) -> Vec<String> {
    let mut lines = vec![format!(
        "{:>6} {:>24} {:>24} {:>24} {:>24} {:>24}",
        "seed", "epsilon", "delta", "expectation", "loss", "best_loss"
    )];
    for run in runs {
        match (run.records.last(), &run.error) {
            (Some(r), None) => lines.push(format!(
                "{:>6} {:>24} {:>24} {:>24} {:>24} {:>24}",
                run.seed,
                fmt_real(r.epsilon),
                fmt_real(r.delta),
                fmt_real(r.observable),
                fmt_real(r.loss),
                fmt_real(r.best_loss)
            )),
            (_, Some(e)) => lines.push(format!(
                "{:>6} failed after {} iterations: {e}",
                run.seed,
                run.records.len()
            )),
            (None, None) => lines.push(format!("{:>6} no iterations", run.seed)),
        }
    }
    lines
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> RunConfig {
        text.parse().unwrap()
    }

    #[test]
    fn grid_hits_both_ends() {
        let spec = SweepSpec {
            param: Param::Delta,
            from: 0.05,
            to: 1.0,
            steps: 20,
        };
        let g = spec.grid();
        assert_eq!(g.len(), 20);
        assert_eq!(g[0], 0.05);
        assert_eq!(g[19], 1.0);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn steady_reports_both_methods_when_unique() {
        let out = steady(&cfg("delta = 0.1")).unwrap();
        assert_eq!(out.rows.len(), 2);
        assert_eq!(out.rows[0].method, SteadyMethod::TimeIntegration);
        assert_eq!(out.rows[1].method, SteadyMethod::NullSpace);
        assert!((out.rows[0].expectation - out.rows[1].expectation).abs() < 1e-8);
        let mut buf = Vec::new();
        write_steady_csv(&mut buf, &out.rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.lines().all(|l| l.split(',').count() == 12));
    }

    #[test]
    fn steady_at_zero_tunnelling_flags_the_degeneracy() {
        let out = steady(&cfg("")).unwrap();
        assert_eq!(out.rows.len(), 1);
        assert!((out.rows[0].expectation - 0.5).abs() < 1e-8);
        assert!(out.notes.iter().any(|n| n.contains("degenerate")));
        assert!(out.notes.iter().any(|n| n.contains("conserved") && n.contains("0.5")));
        assert!(out.notes.iter().any(|n| n.contains("tanh")));
    }

    #[test]
    fn grad_uses_one_steady_and_one_adjoint_solve() {
        let c = cfg("delta = 0.1");
        let g = grad(&c, &Param::ALL).unwrap();
        assert_eq!(g.report.entries.len(), 6);
        assert_eq!(g.counters.steady_solves, 1);
        assert_eq!(g.counters.adjoint_solves, 1);
    }

    #[test]
    fn grad_at_zero_tunnelling_is_degenerate_unless_allowed() {
        let err = grad(&cfg(""), &[Param::Beta]).unwrap_err();
        assert_eq!(err.exit_code(), 4);
        let g = grad(&cfg("allow_degenerate = true"), &[Param::Beta]).unwrap();
        assert!(g.report.diagnostics.degenerate);
        assert!(g.report.entries[0].value.abs() < 1e-6);
    }

    #[test]
    fn sweep_failures_become_nan_rows() {
        let spec = SweepSpec {
            param: Param::Beta,
            from: -0.1,
            to: 0.1,
            steps: 2,
        };
        let rows = sweep(&cfg("delta = 0.1"), &spec).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows[0].error.is_some() && rows[0].expectation.is_nan());
        assert!(rows[1].error.is_none() && rows[1].expectation.is_finite());
    }

    #[test]
    fn sweep_rejects_single_step() {
        let spec = SweepSpec {
            param: Param::Beta,
            from: 0.1,
            to: 0.2,
            steps: 1,
        };
        assert_eq!(sweep(&cfg(""), &spec).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn optimize_rejects_bath_parameters() {
        let spec = OptimizeSpec {
            target: -0.004,
            free: vec![Param::Beta],
            iters: 1,
            lr: 0.1,
            seeds: 1,
            seed: 0,
        };
        assert_eq!(optimize(&cfg(""), &spec).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn optimize_csv_has_one_block_per_seed() {
        let spec = OptimizeSpec {
            target: -0.004,
            free: vec![Param::Epsilon, Param::Delta],
            iters: 3,
            lr: 0.1,
            seeds: 2,
            seed: 7,
        };
        let runs = optimize(&cfg(""), &spec).unwrap();
        let mut buf = Vec::new();
        write_optimize_csv(&mut buf, &runs).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], OPTIMIZE_HEADER);
        assert_eq!(lines.len(), 1 + 2 * 4);
        assert!(lines[1].starts_with("7,0,"));
        assert!(lines[5].starts_with("8,0,"));
        assert_eq!(optimize_summary(&runs).len(), 3);
    }
}
