//! End-to-end acceptance checks. Each criterion prints one PASS or FAIL line
//! with the measured figures; the process exits nonzero if any fails.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use steadygrad::bath::{damped_half_fourier, half_fourier};
use steadygrad::numerics::eigenvalues;
use steadygrad::{
    build_liouvillian, finite_difference_gradient, implicit_gradient, integrate_to_steady, null_space_steady, Bath,
    Counters, FiniteDifferenceOptions, HalfFourierOptions, LiouvillianOptions, Model, Param, SensitivityOptions,
    SteadyMethod, SteadyOptions,
};
use steadygrad::AdjointBackend;
use steadygrad_cli::{grad, optimize, sweep, OptimizeSpec, RunConfig, SweepSpec};

struct Outcome {
    pass: bool,
    detail: String,
}

fn config(text: &str) -> RunConfig {
    text.parse().expect("acceptance config parses")
}

fn delta_sweep() -> SweepSpec {
    SweepSpec {
        param: Param::Delta,
        from: 0.05,
        to: 1.0,
        steps: 20,
    }
}

fn beta_sweep() -> SweepSpec {
    SweepSpec {
        param: Param::Beta,
        from: 0.05,
        to: 1.0,
        steps: 20,
    }
}

/// Implicit gradients match end-to-end central differences along the Δ and
/// β sweeps.
fn gradient_agreement() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut failures = Vec::new();
    for (cfg, spec) in [(config(""), delta_sweep()), (config("delta = 0.1"), beta_sweep())] {
        for row in sweep(&cfg, &spec).expect("sweep runs") {
            let allowed = (1e-4 * row.grad_fd.abs()).max(1e-8);
            let err = (row.grad_implicit - row.grad_fd).abs();
            worst = worst.max(err / allowed);
            if !(err <= allowed) || row.error.is_some() {
                failures.push(format!("{}={}: {:e} vs {:e}", row.param, row.value, row.grad_implicit, row.grad_fd));
            }
        }
    }
    Outcome {
        pass: failures.is_empty(),
        detail: format!("40 points, worst error / tolerance = {worst:.3}; failures: {failures:?}"),
    }
}

/// At Δ = 0 the populations are conserved, so ⟨σz⟩ does not move with the
/// bath parameters.
fn bath_insensitivity() -> Outcome {
    let cfg = config("allow_degenerate = true");
    let g = grad(&cfg, &[Param::Beta, Param::Eta]).expect("gradient at zero tunnelling");
    let db = g.report.get(Param::Beta).unwrap();
    let de = g.report.get(Param::Eta).unwrap();
    Outcome {
        pass: g.steady_method == SteadyMethod::TimeIntegration && db.abs() <= 1e-6 && de.abs() <= 1e-6,
        detail: format!(
            "fixed point via {}, d/dbeta = {db:e}, d/deta = {de:e}",
            g.steady_method.name()
        ),
    }
}

/// Adam recovers (ε, Δ) for the fixed scalar target from five random starts.
fn inverse_design() -> Outcome {
    let target = 0.04995847;
    let spec = OptimizeSpec {
        target,
        free: vec![Param::Epsilon, Param::Delta],
        iters: 100,
        lr: 0.1,
        seeds: 5,
        seed: 0,
    };
    let runs = optimize(&config(""), &spec).expect("optimizer starts");
    let mut lines = Vec::new();
    let mut pairs = Vec::new();
    let mut all_reached = true;
    for run in &runs {
        match (&run.error, run.records.last()) {
            (None, Some(last)) => {
                let reached = last.best_loss <= 5e-5;
                all_reached &= reached;
                pairs.push((last.epsilon, last.delta));
                lines.push(format!(
                    "seed {}: eps {:.6} delta {:.6} <sz> {:.8} final loss {:.3e} best loss {:.3e}",
                    run.seed, last.epsilon, last.delta, last.observable, last.loss, last.best_loss
                ));
            }
            (err, _) => {
                all_reached = false;
                lines.push(format!("seed {}: failed: {err:?}", run.seed));
            }
        }
    }
    let distinct = pairs.iter().enumerate().all(|(i, a)| pairs[i + 1..].iter().all(|b| a != b));
    Outcome {
        pass: all_reached && distinct && pairs.len() == 5,
        detail: format!("target {target}, distinct pairs {distinct}; {}", lines.join("; ")),
    }
}

fn random_model(rng: &mut ChaCha8Rng) -> Model {
    let eps = rng.gen_range(0.02..1.0);
    let delta = rng.gen_range(0.05..1.0);
    let beta = rng.gen_range(0.05..1.0);
    let eta = rng.gen_range(0.002..0.05);
    Model::new(eps, delta, Bath::new(eta, 3.0, 1.0, beta).unwrap()).unwrap()
}

/// Time integration and the null-space solve agree on random nondegenerate
/// models, with valid density matrices and a stable spectrum.
fn oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut worst_gap, mut worst_trace, mut worst_herm, mut max_re): (f64, f64, f64, f64) =
        (0.0, 0.0, 0.0, f64::NEG_INFINITY);
    let mut ok = true;
    for _ in 0..20 {
        let p = random_model(&mut rng);
        let l = build_liouvillian(&p, &LiouvillianOptions::default()).unwrap();
        let c = Counters::default();
        let ti = integrate_to_steady(&l, &steadygrad::Density::tilted_pure_state(), &SteadyOptions::default(), &c);
        let ns = null_space_steady(&l, 1.0, 1e-10, &c);
        let (Ok(ti), Ok(ns)) = (ti, ns) else {
            ok = false;
            continue;
        };
        worst_gap = worst_gap.max((ti.rho_ss.matrix() - ns.rho_ss.matrix()).max_abs());
        for r in [&ti, &ns] {
            let tr = r.rho_ss.matrix().trace();
            worst_trace = worst_trace.max((tr.re - 1.0).abs().max(tr.im.abs()));
            worst_herm = worst_herm.max(r.rho_ss.matrix().hermitian_defect());
        }
        let scale = l.site_matrix().max_abs();
        let ev = eigenvalues(l.site_matrix()).unwrap();
        for z in ev.iter().filter(|z| z.norm() > 1e-10 * scale) {
            max_re = max_re.max(z.re);
        }
    }
    Outcome {
        pass: ok && worst_gap <= 1e-8 && worst_trace <= 1e-10 && worst_herm <= 1e-10 && max_re < 0.0,
        detail: format!(
            "20 models, max entry gap {worst_gap:e}, trace error {worst_trace:e}, \
             hermiticity defect {worst_herm:e}, largest nonzero Re(lambda) {max_re:e}"
        ),
    }
}

/// Direct adjoint solve and adjoint ODE agree on the sweep grids.
fn backend_equivalence() -> Outcome {
    let mut worst: f64 = 0.0;
    let opts = SensitivityOptions::default();
    for (base_delta, spec) in [(0.0, delta_sweep()), (0.1, beta_sweep())] {
        let base = config("").model.with(Param::Delta, base_delta).unwrap();
        for value in spec.grid() {
            let p = base.with(spec.param, value).unwrap();
            let l = build_liouvillian(&p, &LiouvillianOptions::default()).unwrap();
            let c = Counters::default();
            let rho = null_space_steady(&l, 1.0, 1e-10, &c).unwrap().rho_ss;
            let obs = steadygrad::Matrix::pauli_z();
            let free = [spec.param];
            let a = implicit_gradient(AdjointBackend::Direct, &l, &rho, &obs, &free, &opts, &c).unwrap();
            let b = implicit_gradient(AdjointBackend::AdjointOde, &l, &rho, &obs, &free, &opts, &c).unwrap();
            let (x, y) = (a.entries[0].value, b.entries[0].value);
            worst = worst.max((x - y).abs() / x.abs());
        }
    }
    Outcome {
        pass: worst <= 1e-6,
        detail: format!("40 points, worst relative difference {worst:e}"),
    }
}

/// Value at zero damping of the quadratic through three samples.
fn extrapolate(samples: [(f64, f64); 3]) -> f64 {
    let [(e1, v1), (e2, v2), (e3, v3)] = samples;
    let l1 = e2 * e3 / ((e1 - e2) * (e1 - e3));
    let l2 = e1 * e3 / ((e2 - e1) * (e2 - e3));
    let l3 = e1 * e2 / ((e3 - e1) * (e3 - e2));
    l1 * v1 + l2 * v2 + l3 * v3
}

/// Closed-form bath transform against damped quadrature, plus detailed
/// balance.
fn bath_correctness() -> Outcome {
    let bath = Bath::new(0.01, 3.0, 1.0, 0.1).unwrap();
    let opts = HalfFourierOptions::default();
    let mut worst_rel: f64 = 0.0;
    for omega in [0.1, -0.1, 0.5, -0.5, 1.0, -1.0, 2.0, -2.0] {
        let closed = half_fourier(omega, &bath, &opts).unwrap().value.re;
        let sample = |e: f64| (e, damped_half_fourier(omega, e, &bath, 1e-15).unwrap().re);
        let oracle = extrapolate([sample(1e-2), sample(1e-3), sample(1e-4)]);
        worst_rel = worst_rel.max((closed - oracle).abs() / oracle.abs());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst_balance: f64 = 0.0;
    for _ in 0..20 {
        let omega: f64 = rng.gen_range(0.01..5.0);
        let up = half_fourier(omega, &bath, &opts).unwrap().value.re;
        let down = half_fourier(-omega, &bath, &opts).unwrap().value.re;
        worst_balance = worst_balance.max((up / down - (-bath.beta * omega).exp()).abs());
    }
    Outcome {
        pass: worst_rel <= 1e-6 && worst_balance <= 1e-10,
        detail: format!("worst relative error {worst_rel:e}, worst detailed-balance error {worst_balance:e}"),
    }
}

/// One steady solve and one adjoint solve however many parameters are free;
/// finite differences need two solves per parameter.
fn cost_contract() -> Outcome {
    let cfg = config("delta = 0.1");
    let mut lines = Vec::new();
    let mut ok = true;
    for free in [vec![Param::Delta], vec![Param::Beta, Param::Eta, Param::Delta], Param::ALL.to_vec()] {
        let g = grad(&cfg, &free).unwrap();
        ok &= g.counters.steady_solves == 1 && g.counters.adjoint_solves == 1;
        let c = Counters::default();
        finite_difference_gradient(
            &cfg.model,
            &cfg.rho0,
            &steadygrad::Matrix::pauli_z(),
            &free,
            &cfg.liouvillian_options(),
            &FiniteDifferenceOptions::default(),
            &c,
        )
        .unwrap();
        let fd = c.snapshot().steady_solves;
        ok &= fd == 2 * free.len();
        lines.push(format!(
            "{} free: implicit steady={} adjoint={}, finite differences steady={fd}",
            free.len(),
            g.counters.steady_solves,
            g.counters.adjoint_solves
        ));
    }
    Outcome {
        pass: ok,
        detail: lines.join("; "),
    }
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 7] = [
        ("1 gradient agreement with finite differences", gradient_agreement),
        ("2 beta/eta insensitivity at zero tunnelling", bath_insensitivity),
        ("3 inverse design of (epsilon, delta)", inverse_design),
        ("4 time integration vs null-space oracle", oracle_equivalence),
        ("5 direct vs adjoint-ODE backends", backend_equivalence),
        ("6 bath transform and detailed balance", bath_correctness),
        ("7 one steady solve per gradient", cost_contract),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let out = check();
        let verdict = if out.pass { "PASS" } else { "FAIL" };
        println!("{verdict} criterion {name} ({:.1}s): {}", start.elapsed().as_secs_f64(), out.detail);
        failed += usize::from(!out.pass);
    }
    println!("acceptance: {} passed, {failed} failed", 7 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
