//! Gradients of steady-state expectation values via implicit differentiation.
//!
//! At a fixed point `f(ρ^ss, θ) = 0` with `Tr ρ^ss = 1`, an observable
//! `⟨O⟩ = Tr[O ρ^ss]` has
//!
//! ```text
//! d⟨O⟩/dθᵢ = −w · ∂f/∂θᵢ,    w · J = v − ⟨O⟩ t,    J = ∂f/∂ρ
//! ```
//!
//! where `v` is the gradient of `⟨O⟩` in `ρ` and `t` the trace functional.
//! `J` is singular (trace preservation); subtracting `⟨O⟩ t` removes the
//! component of `v` along `ρ^ss`, so the left system is consistent and `w` is
//! defined up to multiples of `t`, which `∂f/∂θ` annihilates. One adjoint
//! solve serves every parameter.
//!
//! All Jacobian algebra runs on the real embedding `[Re vec ρ, Im vec ρ]`.

use crate::error::{invalid, Error, Result};
use crate::instrument::Counters;
use crate::numerics::eigen::hermitian_tolerance;
use crate::numerics::matrix::{embed_real, unembed_real, ComplexMatrix};
use crate::numerics::ode::{integrate_to_stationary, OdeOptions};
use crate::numerics::real::{norm2_real, re, Real};
use crate::numerics::svd::{solve_min_norm, svd};
use crate::redfield::{build_liouvillian, Liouvillian, ModelParams, Param};
use crate::steady::{
    solve_steady, solve_steady_auto, zero_mode_dimension, DensityMatrix, SteadyMethod, SteadyOptions,
};

/// Residual `f(x)` of a fixed-point problem on a real state vector.
///
/// Only vector–Jacobian products are required; the dense direct backend
/// assembles `Jᵀ` column by column from them.
pub trait FixedPointResidual<T: Real> {
    fn state_dim(&self) -> usize;

    fn residual(&self, x: &[T]) -> Vec<T>;

    /// `y · ∂f/∂x` evaluated at `x`.
    fn vjp(&self, x: &[T], y: &[T]) -> Vec<T>;
}

/// Redfield right-hand side in the site basis, real-embedded.
pub struct RedfieldResidual<'a, T> {
    l: &'a Liouvillian<T>,
}

impl<'a, T: Real> RedfieldResidual<'a, T> {
    pub fn new(l: &'a Liouvillian<T>) -> Self {
        Self { l }
    }
}

impl<T: Real> FixedPointResidual<T> for RedfieldResidual<'_, T> {
    fn state_dim(&self) -> usize {
        2 * self.l.dim() * self.l.dim()
    }

    fn residual(&self, x: &[T]) -> Vec<T> {
        embed_real(&self.l.site_matrix().matvec(&unembed_real(x)))
    }

    fn vjp(&self, _x: &[T], y: &[T]) -> Vec<T> {
        // J = [[A, −B], [B, A]] for L = A + iB; with z = y₁ − i y₂,
        // y·J = [Re(z L), −Im(z L)].
        let n = y.len() / 2;
        let z: Vec<_> = (0..n).map(|k| num_complex::Complex::new(y[k], -y[n + k])).collect();
        let zl = self.l.site_matrix().vecmat(&z);
        zl.iter().map(|c| c.re).chain(zl.iter().map(|c| -c.im)).collect()
    }
}

/// Dense `Jᵀ` assembled from unit-vector VJPs.
pub fn jacobian_transpose<T: Real, R: FixedPointResidual<T>>(res: &R, x: &[T]) -> ComplexMatrix<T> {
    let n = res.state_dim();
    let mut jt = ComplexMatrix::zeros(n, n);
    let mut e = vec![T::zero(); n];
    for k in 0..n {
        e[k] = T::one();
        for (j, val) in res.vjp(x, &e).into_iter().enumerate() {
            jt[(j, k)] = re(val);
        }
        e[k] = T::zero();
    }
    jt
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GradientMethod {
    ImplicitDirect,
    ImplicitAdjointOde,
    FiniteDifference,
}

impl GradientMethod {
    pub fn name(self) -> &'static str {
        match self {
            GradientMethod::ImplicitDirect => "implicit-direct",
            GradientMethod::ImplicitAdjointOde => "implicit-adjoint-ode",
            GradientMethod::FiniteDifference => "finite-difference",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradientEntry<T> {
    pub param: Param,
    pub value: T,
    /// Finite-difference step used for this parameter.
    pub step: T,
    /// A domain boundary forced a forward difference.
    pub one_sided: bool,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct GradientDiagnostics<T> {
    /// `‖w·J − (v − ⟨O⟩t)‖` of the adjoint solve (zero for finite differences).
    pub adjoint_residual: T,
    /// Model time spent by the adjoint ODE, if used.
    pub adjoint_time: T,
    /// Complex dimension of the generator's zero eigenspace.
    pub zero_modes: usize,
    /// Set when `zero_modes > 1`; the result then only covers decaying modes.
    pub degenerate: bool,
}

/// Derivatives of one expectation value with respect to the free parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientReport<T> {
    pub observable_value: T,
    pub method: GradientMethod,
    pub entries: Vec<GradientEntry<T>>,
    pub diagnostics: GradientDiagnostics<T>,
}

impl<T: Real> GradientReport<T> {
    pub fn get(&self, p: Param) -> Option<T> {
        self.entries.iter().find(|e| e.param == p).map(|e| e.value)
    }
}

/// Settings shared by the implicit backends.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SensitivityOptions<T> {
    /// Absolute step for `∂f/∂θ`; `None` means `1e-6 · max(1, |θ|)`.
    pub tangent_step: Option<T>,
    pub rank_tol: T,
    /// Return a flagged result instead of an error when the zero eigenspace
    /// is more than one-dimensional.
    pub allow_degenerate: bool,
    /// Stationarity tolerance of the adjoint ODE.
    pub adjoint_tol: T,
    pub adjoint_ode: OdeOptions<T>,
}

impl<T: Real> Default for SensitivityOptions<T> {
    fn default() -> Self {
        Self {
            tangent_step: None,
            rank_tol: T::lit(1e-10),
            allow_degenerate: false,
            adjoint_tol: T::lit(1e-12),
            adjoint_ode: OdeOptions {
                rtol: T::lit(1e-10),
                atol: T::lit(1e-12),
                horizon: T::lit(1e8),
                ..OdeOptions::default()
            },
        }
    }
}

/// `∂f/∂θᵢ` at fixed `ρ`, in the site basis.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamTangent<T> {
    pub matrix: ComplexMatrix<T>,
    pub step: T,
    pub one_sided: bool,
}

fn counted_build<T: Real>(
    p: &ModelParams<T>,
    template: &Liouvillian<T>,
    counters: &Counters,
) -> Result<Liouvillian<T>> {
    counters.record_build();
    build_liouvillian(p, template.options())
}

/// Default relative step for residual tangents.
pub fn default_tangent_step<T: Real>(theta: T) -> T {
    T::lit(1e-6) * T::one().max(theta.abs())
}

/// Central difference of the residual in one parameter with `ρ` held fixed.
///
/// Two Liouvillian builds, no steady-state solve. Falls back to a forward
/// difference when `θ − h` leaves the parameter domain.
pub fn residual_param_tangent<T: Real>(
    l: &Liouvillian<T>,
    rho: &DensityMatrix<T>,
    param: Param,
    step: Option<T>,
    counters: &Counters,
) -> Result<ParamTangent<T>> {
    let p = l.params();
    let theta = p.get(param);
    let h = step.unwrap_or_else(|| default_tangent_step(theta));
    if !(h > T::zero()) {
        return Err(invalid("tangent step must be positive"));
    }
    let plus = p.with(param, theta + h)?;
    let f_plus = counted_build(&plus, l, counters)?.rhs(rho);
    match p.with(param, theta - h) {
        Ok(minus) => {
            let f_minus = counted_build(&minus, l, counters)?.rhs(rho);
            Ok(ParamTangent {
                matrix: (&f_plus - &f_minus).scale(re(T::one() / (T::lit(2.0) * h))),
                step: h,
                one_sided: false,
            })
        }
        Err(_) => {
            let f0 = l.rhs(rho);
            Ok(ParamTangent {
                matrix: (&f_plus - &f0).scale(re(T::one() / h)),
                step: h,
                one_sided: true,
            })
        }
    }
}

fn check_observable<T: Real>(obs: &ComplexMatrix<T>, dim: usize) -> Result<()> {
    if obs.rows() != dim || !obs.is_square() {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: obs.rows(),
        });
    }
    obs.ensure_hermitian(hermitian_tolerance(obs))
}

/// Real-embedded gradient of `Re Tr[Oρ]` with respect to `vec ρ`.
fn observable_covector<T: Real>(obs: &ComplexMatrix<T>) -> Vec<T> {
    let d = obs.rows();
    // Tr[Oρ] = Σ O_ji ρ_ij, and ρ_ij sits at i + d·j.
    let c: Vec<_> = (0..d * d).map(|k| obs[(k / d, k % d)]).collect();
    c.iter().map(|z| z.re).chain(c.iter().map(|z| -z.im)).collect()
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// `v − (v·x / t·x) t`: the observable covector with its component along the
/// steady state removed.
fn deflated_covector<T: Real>(obs: &ComplexMatrix<T>, x: &[T]) -> (T, Vec<T>) {
    let d = obs.rows();
    let v = observable_covector(obs);
    let t = observable_covector(&ComplexMatrix::<T>::identity(d));
    let value = dot(&v, x);
    let scale = value / dot(&t, x);
    let deflated = v.iter().zip(&t).map(|(&vi, &ti)| vi - scale * ti).collect();
    (value, deflated)
}

fn assemble_entries<T: Real>(
    l: &Liouvillian<T>,
    rho: &DensityMatrix<T>,
    w: &[T],
    free: &[Param],
    opts: &SensitivityOptions<T>,
    counters: &Counters,
) -> Result<Vec<GradientEntry<T>>> {
    free.iter()
        .map(|&param| {
            let tangent = residual_param_tangent(l, rho, param, opts.tangent_step, counters)?;
            let df = embed_real(&tangent.matrix.vectorize());
            Ok(GradientEntry {
                param,
                value: -dot(w, &df),
                step: tangent.step,
                one_sided: tangent.one_sided,
            })
        })
        .collect()
}

/// Implicit gradient with one dense minimum-norm adjoint solve.
pub fn implicit_gradient_direct<T: Real>(
    l: &Liouvillian<T>,
    rho_ss: &DensityMatrix<T>,
    obs: &ComplexMatrix<T>,
    free: &[Param],
    opts: &SensitivityOptions<T>,
    counters: &Counters,
) -> Result<GradientReport<T>> {
    check_observable(obs, l.dim())?;
    let residual = RedfieldResidual::new(l);
    let x = embed_real(&rho_ss.matrix().vectorize());
    let (value, rhs) = deflated_covector(obs, &x);

    counters.record_adjoint_solve();
    let jt = jacobian_transpose(&residual, &x);
    let sol = solve_min_norm(&jt, &rhs.iter().map(|&r| re(r)).collect::<Vec<_>>(), opts.rank_tol)?;
    let zero_modes = (residual.state_dim() - sol.rank) / 2;
    if zero_modes > 1 && !opts.allow_degenerate {
        return Err(Error::Degenerate {
            dimension: zero_modes,
        });
    }
    let w: Vec<T> = sol.x.iter().map(|z| z.re).collect();
    let entries = assemble_entries(l, rho_ss, &w, free, opts, counters)?;
    Ok(GradientReport {
        observable_value: value,
        method: GradientMethod::ImplicitDirect,
        entries,
        diagnostics: GradientDiagnostics {
            adjoint_residual: sol.residual_norm,
            adjoint_time: T::zero(),
            zero_modes,
            degenerate: zero_modes > 1,
        },
    })
}

/// Implicit gradient with `w` taken as the stationary point of
/// `dy/dt = y·J − (v − ⟨O⟩t)`, using only vector–Jacobian products.
pub fn implicit_gradient_adjoint_ode<T: Real>(
    l: &Liouvillian<T>,
    rho_ss: &DensityMatrix<T>,
    obs: &ComplexMatrix<T>,
    free: &[Param],
    opts: &SensitivityOptions<T>,
    counters: &Counters,
) -> Result<GradientReport<T>> {
    check_observable(obs, l.dim())?;
    let residual = RedfieldResidual::new(l);
    let x = embed_real(&rho_ss.matrix().vectorize());
    let (value, rhs) = deflated_covector(obs, &x);
    counters.record_adjoint_solve();

    let n = residual.state_dim();
    let stationary = if norm2_real(&rhs) == T::zero() {
        None
    } else {
        let mut ode = opts.adjoint_ode;
        if ode.initial_step.is_none() {
            ode.initial_step =
                Some(T::lit(1e-2) / l.site_matrix().frobenius_norm().max(T::min_positive_value()));
        }
        // `y·J` is orthogonal to the exact steady state, which `x` only
        // approximates to the steady-state tolerance. That mismatch leaves a
        // forcing component no `y` can cancel, so the part of `y·J` along `x`
        // is projected out and the fixed point solves the consistent system.
        let x_norm = norm2_real(&x);
        let x_hat: Vec<T> = x.iter().map(|&xi| xi / x_norm).collect();
        let run = integrate_to_stationary(
            |y: &[T], dy: &mut [T]| {
                let yj = residual.vjp(&x, y);
                let along = dot(&yj, &x_hat);
                for k in 0..n {
                    dy[k] = yj[k] - along * x_hat[k] - rhs[k];
                }
            },
            vec![T::zero(); n],
            opts.adjoint_tol,
            &ode,
            |_| {},
        );
        match run {
            Ok(s) => Some(s),
            Err(Error::NotConverged { residual: r, .. }) => {
                return Err(Error::AdjointNotConverged {
                    residual: r,
                    mode: offending_mode(&residual, &x, &rhs, opts.rank_tol),
                })
            }
            Err(e) => return Err(e),
        }
    };
    let (w, adjoint_residual, adjoint_time) = match stationary {
        Some(s) => (s.y, s.residual_norm, s.t),
        None => (vec![T::zero(); n], T::zero(), T::zero()),
    };
    let zero_modes = zero_mode_dimension(l, opts.rank_tol);
    let entries = assemble_entries(l, rho_ss, &w, free, opts, counters)?;
    Ok(GradientReport {
        observable_value: value,
        method: GradientMethod::ImplicitAdjointOde,
        entries,
        diagnostics: GradientDiagnostics {
            adjoint_residual,
            adjoint_time,
            zero_modes,
            degenerate: zero_modes > 1,
        },
    })
}

/// Names the non-decaying mode that the forcing excites.
fn offending_mode<T: Real, R: FixedPointResidual<T>>(res: &R, x: &[T], rhs: &[T], rank_tol: T) -> String {
    // Right null vectors r of J: d(y·r)/dt = −rhs·r never relaxes.
    let j = jacobian_transpose(res, x).transpose();
    let dec = svd(&j);
    let cutoff = rank_tol * dec.largest();
    let n = res.state_dim();
    let mut worst: Option<(usize, T, T)> = None;
    for (k, &s) in dec.singular_values.iter().enumerate() {
        if s > cutoff {
            continue;
        }
        let overlap = (0..n).fold(T::zero(), |acc, i| acc + dec.v[(i, k)].re * rhs[i]).abs();
        if worst.map_or(true, |(_, _, o)| overlap > o) {
            worst = Some((k, s, overlap));
        }
    }
    match worst {
        Some((k, s, o)) => format!(
            "forcing overlaps zero mode {k} (singular value {:e}) with weight {:e}",
            s.to_f64_lossy(),
            o.to_f64_lossy()
        ),
        None => "no zero mode found; adjoint horizon too short".to_string(),
    }
}

/// Which implicit backend to use.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum AdjointBackend {
    #[default]
    Direct,
    AdjointOde,
}

pub fn implicit_gradient<T: Real>(
    backend: AdjointBackend,
    l: &Liouvillian<T>,
    rho_ss: &DensityMatrix<T>,
    obs: &ComplexMatrix<T>,
    free: &[Param],
    opts: &SensitivityOptions<T>,
    counters: &Counters,
) -> Result<GradientReport<T>> {
    match backend {
        AdjointBackend::Direct => implicit_gradient_direct(l, rho_ss, obs, free, opts, counters),
        AdjointBackend::AdjointOde => implicit_gradient_adjoint_ode(l, rho_ss, obs, free, opts, counters),
    }
}

/// Steady-state solver choice for end-to-end finite differences.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum FdSteadyMethod {
    /// Null-space solve, or time integration when the generator is degenerate.
    #[default]
    Auto,
    Fixed(SteadyMethod),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FiniteDifferenceOptions<T> {
    /// Absolute step; `None` means `1e-4 · max(1, |θ|)`.
    pub step: Option<T>,
    pub steady_method: FdSteadyMethod,
    pub steady: SteadyOptions<T>,
}

impl<T: Real> Default for FiniteDifferenceOptions<T> {
    fn default() -> Self {
        Self {
            step: None,
            steady_method: FdSteadyMethod::Auto,
            steady: SteadyOptions::default(),
        }
    }
}

fn fd_observable<T: Real>(
    l: &Liouvillian<T>,
    rho0: &DensityMatrix<T>,
    obs: &ComplexMatrix<T>,
    opts: &FiniteDifferenceOptions<T>,
    counters: &Counters,
) -> Result<T> {
    let ss = match opts.steady_method {
        FdSteadyMethod::Fixed(m) => solve_steady(l, rho0, m, &opts.steady, counters)?,
        FdSteadyMethod::Auto => solve_steady_auto(l, rho0, &opts.steady, counters)?,
    };
    Ok(ss.rho_ss.expectation(obs))
}

/// End-to-end central differences: two full steady-state solves per parameter.
///
/// The reported observable value is the mean of the first parameter's two
/// evaluations, so no extra solve is spent on it unless `free` is empty.
pub fn finite_difference_gradient<T: Real>(
    p: &ModelParams<T>,
    rho0: &DensityMatrix<T>,
    obs: &ComplexMatrix<T>,
    free: &[Param],
    lopts: &crate::redfield::LiouvillianOptions<T>,
    opts: &FiniteDifferenceOptions<T>,
    counters: &Counters,
) -> Result<GradientReport<T>> {
    check_observable(obs, rho0.dim())?;
    let build = |q: &ModelParams<T>| {
        counters.record_build();
        build_liouvillian(q, lopts)
    };
    let mut entries = Vec::with_capacity(free.len());
    let mut centre = None;
    for &param in free {
        let theta = p.get(param);
        let h = opts.step.unwrap_or_else(|| T::lit(1e-4) * T::one().max(theta.abs()));
        let up = fd_observable(&build(&p.with(param, theta + h)?)?, rho0, obs, opts, counters)?;
        let (down, one_sided, span) = match p.with(param, theta - h) {
            Ok(q) => (fd_observable(&build(&q)?, rho0, obs, opts, counters)?, false, T::lit(2.0) * h),
            Err(_) => {
                // Forward difference from θ; the centre solve doubles as the value.
                let v = fd_observable(&build(p)?, rho0, obs, opts, counters)?;
                centre.get_or_insert(v);
                (v, true, h)
            }
        };
        centre.get_or_insert((up + down) * T::lit(0.5));
        entries.push(GradientEntry {
            param,
            value: (up - down) / span,
            step: h,
            one_sided,
        });
    }
    let observable_value = match centre {
        Some(v) => v,
        None => fd_observable(&build(p)?, rho0, obs, opts, counters)?,
    };
    Ok(GradientReport {
        observable_value,
        method: GradientMethod::FiniteDifference,
        entries,
        diagnostics: GradientDiagnostics::default(),
    })
}
