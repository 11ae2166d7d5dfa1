//! Inverse design: Adam on softplus-parameterized `ε` and `Δ` to hit a target
//! expectation value.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::instrument::Counters;
use crate::numerics::matrix::ComplexMatrix;
use crate::numerics::real::Real;
use crate::redfield::{build_liouvillian, LiouvillianOptions, ModelParams, Param};
use crate::sensitivity::{implicit_gradient_direct, SensitivityOptions};
use crate::steady::{solve_steady_auto, DensityMatrix, SteadyOptions};

/// `ln(1 + eˣ)`, exact to rounding over the whole real line.
pub fn softplus<T: Real>(x: T) -> T {
    if x > T::lit(30.0) {
        x + (-x).exp()
    } else {
        x.exp().ln_1p()
    }
}

/// `ln(eʸ − 1)` for `y > 0`.
pub fn softplus_inverse<T: Real>(y: T) -> Result<T> {
    if !(y > T::zero()) || !y.is_finite() {
        return Err(invalid(format!("softplus inverse needs a positive finite argument, got {y}")));
    }
    if y > T::lit(30.0) {
        Ok(y + (-(-y).exp()).ln_1p())
    } else {
        Ok(y.exp_m1().ln())
    }
}

/// `d softplus/dx`, the logistic function.
pub fn softplus_derivative<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// `|observable − target|`.
pub fn loss<T: Real>(observable: T, target: T) -> T {
    (observable - target).abs()
}

/// `d loss / d observable`, with subgradient 0 at equality.
pub fn loss_derivative<T: Real>(observable: T, target: T) -> T {
    let diff = observable - target;
    if diff > T::zero() {
        T::one()
    } else if diff < T::zero() {
        -T::one()
    } else {
        T::zero()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamHyper<T> {
    pub lr: T,
    pub beta1: T,
    pub beta2: T,
    pub eps_hat: T,
}

impl<T: Real> Default for AdamHyper<T> {
    fn default() -> Self {
        Self {
            lr: T::lit(0.1),
            beta1: T::lit(0.9),
            beta2: T::lit(0.999),
            eps_hat: T::lit(1e-8),
        }
    }
}

/// Adam moments over unconstrained parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState<T> {
    pub step: usize,
    pub raw_params: Vec<T>,
    pub m: Vec<T>,
    pub v_hat: Vec<T>,
    pub hyper: AdamHyper<T>,
}

impl<T: Real> OptimizerState<T> {
    pub fn new(raw_params: Vec<T>, hyper: AdamHyper<T>) -> Self {
        let n = raw_params.len();
        Self {
            step: 0,
            raw_params,
            m: vec![T::zero(); n],
            v_hat: vec![T::zero(); n],
            hyper,
        }
    }
}

/// One bias-corrected Adam update.
pub fn adam_step<T: Real>(state: &OptimizerState<T>, grads: &[T]) -> Result<OptimizerState<T>> {
    if grads.len() != state.raw_params.len() {
        return Err(Error::DimensionMismatch {
            expected: state.raw_params.len(),
            found: grads.len(),
        });
    }
    if grads.iter().any(|g| !g.is_finite()) {
        return Err(Error::PoisonedState { step: state.step });
    }
    let h = state.hyper;
    let step = state.step + 1;
    let bias1 = T::one() - h.beta1.powi(step as i32);
    let bias2 = T::one() - h.beta2.powi(step as i32);
    let mut next = state.clone();
    next.step = step;
    for (k, &g) in grads.iter().enumerate() {
        next.m[k] = h.beta1 * state.m[k] + (T::one() - h.beta1) * g;
        next.v_hat[k] = h.beta2 * state.v_hat[k] + (T::one() - h.beta2) * g * g;
        let m_hat = next.m[k] / bias1;
        let v_hat = next.v_hat[k] / bias2;
        next.raw_params[k] = state.raw_params[k] - h.lr * m_hat / (v_hat.sqrt() + h.eps_hat);
    }
    Ok(next)
}

/// One optimizer iterate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossRecord<T> {
    pub iteration: usize,
    pub epsilon: T,
    pub delta: T,
    pub observable: T,
    pub loss: T,
    /// Smallest loss seen up to and including this iteration.
    pub best_loss: T,
    /// The steady state came from time integration on a degenerate generator.
    pub degenerate: bool,
}

/// Where the raw parameters start.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Initialization {
    /// `softplus⁻¹` of the values in `p0`.
    FromParams,
    /// Uniform over `[softplus⁻¹(0.01), softplus⁻¹(0.5)]`.
    Random { seed: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DesignOptions<T> {
    pub hyper: AdamHyper<T>,
    pub steady: SteadyOptions<T>,
    pub liouvillian: LiouvillianOptions<T>,
    pub sensitivity: SensitivityOptions<T>,
}

impl<T: Real> Default for DesignOptions<T> {
    fn default() -> Self {
        Self {
            hyper: AdamHyper::default(),
            steady: SteadyOptions::default(),
            liouvillian: LiouvillianOptions::default(),
            sensitivity: SensitivityOptions::default(),
        }
    }
}

fn initial_raw<T: Real>(p0: &ModelParams<T>, free: &[Param], init: Initialization) -> Result<Vec<T>> {
    match init {
        Initialization::FromParams => free.iter().map(|&q| softplus_inverse(p0.get(q))).collect(),
        Initialization::Random { seed } => {
            let lo = softplus_inverse(0.01f64)?;
            let hi = softplus_inverse(0.5f64)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Ok(free.iter().map(|_| T::lit(rng.gen_range(lo..hi))).collect())
        }
    }
}

/// Adam loop minimizing `|Tr[O ρ^ss] − target|` over the free subset of
/// `{ε, Δ}`.
///
/// Emits `iters + 1` records: iteration 0 is the starting point and each
/// later one follows an update. A non-finite gradient ends the run with
/// [`Error::PoisonedState`]; use [`optimize_partial`] to keep the records
/// produced before a failure.
pub fn optimize<T: Real>(
    p0: &ModelParams<T>,
    rho0: &DensityMatrix<T>,
    target: T,
    obs: &ComplexMatrix<T>,
    free: &[Param],
    iters: usize,
    init: Initialization,
    opts: &DesignOptions<T>,
    counters: &Counters,
) -> Result<Vec<LossRecord<T>>> {
    let (records, err) = optimize_partial(p0, rho0, target, obs, free, iters, init, opts, counters);
    match err {
        Some(e) => Err(e),
        None => Ok(records),
    }
}

/// [`optimize`] that returns the records produced before any failure
/// alongside the failure itself.
pub fn optimize_partial<T: Real>(
    p0: &ModelParams<T>,
    rho0: &DensityMatrix<T>,
    target: T,
    obs: &ComplexMatrix<T>,
    free: &[Param],
    iters: usize,
    init: Initialization,
    opts: &DesignOptions<T>,
    counters: &Counters,
) -> (Vec<LossRecord<T>>, Option<Error>) {
    let mut records = Vec::with_capacity(iters + 1);
    if let Some(bad) = free.iter().find(|q| !matches!(q, Param::Epsilon | Param::Delta)) {
        return (records, Some(invalid(format!("only epsilon and delta can be optimized, got {bad}"))));
    }
    let raw = match initial_raw(p0, free, init) {
        Ok(r) => r,
        Err(e) => return (records, Some(e)),
    };
    let mut state = OptimizerState::new(raw, opts.hyper);
    let mut best = T::infinity();
    for iteration in 0..=iters {
        let evaluated = evaluate(p0, rho0, target, obs, free, &state.raw_params, opts, counters);
        let (record, grads) = match evaluated {
            Ok(v) => v,
            Err(e) => return (records, Some(e)),
        };
        best = best.min(record.loss);
        records.push(LossRecord {
            iteration,
            best_loss: best,
            ..record
        });
        if iteration == iters {
            break;
        }
        state = match adam_step(&state, &grads) {
            Ok(s) => s,
            Err(e) => return (records, Some(e)),
        };
    }
    (records, None)
}

fn evaluate<T: Real>(
    p0: &ModelParams<T>,
    rho0: &DensityMatrix<T>,
    target: T,
    obs: &ComplexMatrix<T>,
    free: &[Param],
    raw: &[T],
    opts: &DesignOptions<T>,
    counters: &Counters,
) -> Result<(LossRecord<T>, Vec<T>)> {
    let mut p = *p0;
    for (&q, &r) in free.iter().zip(raw) {
        p = p.with(q, softplus(r))?;
    }
    counters.record_build();
    let l = build_liouvillian(&p, &opts.liouvillian)?;
    let ss = solve_steady_auto(&l, rho0, &opts.steady, counters)?;
    let degenerate = ss.degenerate_dimension.is_some();
    let sens = SensitivityOptions {
        allow_degenerate: true,
        ..opts.sensitivity
    };
    let report = implicit_gradient_direct(&l, &ss.rho_ss, obs, free, &sens, counters)?;
    let observable = report.observable_value;
    let dl = loss_derivative(observable, target);
    let grads = free
        .iter()
        .zip(raw)
        .map(|(&q, &r)| dl * report.get(q).unwrap_or_else(T::zero) * softplus_derivative(r))
        .collect();
    let record = LossRecord {
        iteration: 0,
        epsilon: p.epsilon,
        delta: p.delta,
        observable,
        loss: loss(observable, target),
        best_loss: T::zero(),
        degenerate,
    };
    Ok((record, grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bath::BathParams;
    use crate::steady::null_space_steady;

    fn reference_bath() -> BathParams<f64> {
        BathParams::new(0.01, 3.0, 1.0, 0.1).unwrap()
    }

    #[test]
    fn softplus_values() {
        assert!((softplus(0.0f64) - std::f64::consts::LN_2).abs() < 1e-16);
        assert!(softplus(-40.0f64) > 0.0);
        assert_eq!(softplus(800.0f64), 800.0);
        assert!(softplus_inverse(0.0f64).is_err());
        assert!(softplus_inverse(-1.0f64).is_err());
    }

    #[test]
    fn softplus_round_trip() {
        for k in 0..=400 {
            let x = -20.0 + 0.1 * k as f64;
            let back = softplus_inverse(softplus(x)).unwrap();
            assert!((back - x).abs() < 1e-12, "{x} -> {back}");
        }
    }

    #[test]
    fn softplus_derivative_matches_difference() {
        for &x in &[-30.0f64, -2.0, 0.0, 1.5, 40.0] {
            let h = 1e-6;
            let fd = (softplus(x + h) - softplus(x - h)) / (2.0 * h);
            assert!((fd - softplus_derivative(x)).abs() < 1e-8);
        }
    }

    #[test]
    fn loss_examples() {
        assert_eq!(loss(0.5, 0.5), 0.0);
        assert!((loss(0.06f64, 0.04995847) - 0.01004153).abs() < 1e-15);
        assert_eq!(loss_derivative(0.5, 0.5), 0.0);
        assert_eq!(loss_derivative(0.6, 0.5), 1.0);
        assert_eq!(loss_derivative(0.4, 0.5), -1.0);
    }

    #[test]
    fn adam_zero_gradient_keeps_params() {
        let s = OptimizerState::new(vec![0.3, -1.0], AdamHyper::default());
        let n = adam_step(&s, &[0.0, 0.0]).unwrap();
        assert_eq!(n.raw_params, s.raw_params);
        assert_eq!(n.step, 1);
    }

    #[test]
    fn adam_first_step_is_lr_sign() {
        let s = OptimizerState::new(vec![0.0f64, 0.0], AdamHyper::default());
        let n = adam_step(&s, &[2.5, -0.01]).unwrap();
        assert!((n.raw_params[0] + 0.1).abs() < 1e-8);
        assert!((n.raw_params[1] - 0.1).abs() < 1e-6);
    }

    #[test]
    fn adam_is_deterministic_and_rejects_nan() {
        let s = OptimizerState::new(vec![0.1], AdamHyper::default());
        assert_eq!(adam_step(&s, &[0.3]).unwrap(), adam_step(&s, &[0.3]).unwrap());
        assert_eq!(adam_step(&s, &[f64::NAN]).unwrap_err(), Error::PoisonedState { step: 0 });
        assert!(adam_step(&s, &[1.0, 2.0]).is_err());
    }

    #[test]
    fn already_optimal_start_stays_put() {
        let p = ModelParams::new(0.08, 0.06, reference_bath()).unwrap();
        let rho0 = DensityMatrix::tilted_pure_state();
        let z = ComplexMatrix::pauli_z();
        let c = Counters::default();
        let l = build_liouvillian(&p, &LiouvillianOptions::default()).unwrap();
        let target = null_space_steady(&l, 1.0, 1e-10, &c).unwrap().rho_ss.expectation(&z);
        let free = [Param::Epsilon, Param::Delta];
        let recs = optimize(&p, &rho0, target, &z, &free, 3, Initialization::FromParams, &DesignOptions::default(), &c)
            .unwrap();
        assert_eq!(recs.len(), 4);
        assert!(recs[0].loss < 1e-12);
        assert!((recs[0].epsilon - 0.08).abs() < 1e-12);
        // The loss kink means at most a few lr-sized steps of jitter.
        assert!(recs.iter().all(|r| r.loss < 1e-2));
    }

    #[test]
    fn zero_learning_rate_freezes_trajectory() {
        let p = ModelParams::new(0.1, 0.1, reference_bath()).unwrap();
        let opts = DesignOptions {
            hyper: AdamHyper { lr: 0.0, ..AdamHyper::default() },
            ..DesignOptions::default()
        };
        let recs = optimize(
            &p,
            &DensityMatrix::tilted_pure_state(),
            -0.01,
            &ComplexMatrix::pauli_z(),
            &[Param::Epsilon, Param::Delta],
            4,
            Initialization::Random { seed: 7 },
            &opts,
            &Counters::default(),
        )
        .unwrap();
        assert!(recs.windows(2).all(|w| w[0].epsilon == w[1].epsilon && w[0].delta == w[1].delta));
    }

    #[test]
    fn random_initialization_is_seeded_and_in_range() {
        let p = ModelParams::new(0.1, 0.1, reference_bath()).unwrap();
        let free = [Param::Epsilon, Param::Delta];
        let a = initial_raw(&p, &free, Initialization::Random { seed: 3 }).unwrap();
        let b = initial_raw(&p, &free, Initialization::Random { seed: 3 }).unwrap();
        let c = initial_raw(&p, &free, Initialization::Random { seed: 4 }).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        for r in a.iter().chain(&c) {
            let v = softplus(*r);
            assert!((0.01..=0.5).contains(&v));
        }
    }

    #[test]
    fn rejects_bath_parameters() {
        let p = ModelParams::new(0.1, 0.1, reference_bath()).unwrap();
        let err = optimize(
            &p,
            &DensityMatrix::tilted_pure_state(),
            0.0,
            &ComplexMatrix::pauli_z(),
            &[Param::Beta],
            1,
            Initialization::FromParams,
            &DesignOptions::default(),
            &Counters::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));
    }

    #[test]
    fn running_minimum_is_monotone() {
        let p = ModelParams::new(0.1, 0.1, reference_bath()).unwrap();
        let recs = optimize(
            &p,
            &DensityMatrix::tilted_pure_state(),
            -0.005,
            &ComplexMatrix::pauli_z(),
            &[Param::Epsilon, Param::Delta],
            15,
            Initialization::Random { seed: 1 },
            &DesignOptions::default(),
            &Counters::default(),
        )
        .unwrap();
        assert!(recs.windows(2).all(|w| w[1].best_loss <= w[0].best_loss));
        assert!(recs.iter().all(|r| r.epsilon > 0.0 && r.delta > 0.0 && r.loss >= 0.0));
    }
}
