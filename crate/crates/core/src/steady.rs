//! Steady states of the Redfield generator: time integration to stationarity
//! and a direct null-space solve used as an independent check.

use crate::error::{invalid, Error, Result};
use crate::instrument::Counters;
use crate::numerics::eigen::eig_hermitian;
use crate::numerics::matrix::{embed_real, unembed_real, ComplexMatrix};
use crate::numerics::ode::{integrate_to_stationary, OdeOptions};
use crate::numerics::real::{cx, re, Cx, Real};
use crate::numerics::svd::{solve_min_norm, svd};
use crate::redfield::Liouvillian;

/// Hermitian, unit-trace density matrix in the site (σz) basis.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix<T>(ComplexMatrix<T>);

impl<T: Real> DensityMatrix<T> {
    /// Validates Hermiticity and unit trace to `1e-12`-scale tolerances.
    pub fn new(m: ComplexMatrix<T>) -> Result<Self> {
        let tol = Self::tolerance();
        if !m.is_square() {
            return Err(invalid(format!("square: rho is {}x{}", m.rows(), m.cols())));
        }
        m.ensure_hermitian(tol)?;
        let tr = m.trace();
        if !((tr.re - T::one()).abs() <= tol && tr.im.abs() <= tol) {
            return Err(invalid(format!(
                "trace: Tr(rho) = {}{:+}i, expected 1",
                tr.re, tr.im
            )));
        }
        Ok(Self(m))
    }

    fn tolerance() -> T {
        T::lit(1e-12).max(T::epsilon() * T::lit(64.0))
    }

    /// Symmetrizes and rescales to unit trace without further checks.
    pub fn normalized(m: &ComplexMatrix<T>) -> Self {
        let h = m.hermitian_part();
        let tr = h.trace().re;
        Self(h.scale(re(T::one() / tr)))
    }

    /// The pure state `[[3/4, −i√3/4], [i√3/4, 1/4]]`.
    pub fn tilted_pure_state() -> Self {
        let q = T::lit(3.0).sqrt() / T::lit(4.0);
        Self(
            ComplexMatrix::from_row_major(
                2,
                2,
                vec![
                    re(T::lit(0.75)),
                    cx(T::zero(), -q),
                    cx(T::zero(), q),
                    re(T::lit(0.25)),
                ],
            )
            .expect("2x2"),
        )
    }

    pub fn dim(&self) -> usize {
        self.0.rows()
    }

    pub fn matrix(&self) -> &ComplexMatrix<T> {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix<T> {
        self.0
    }

    /// `Tr[O ρ]`, real part.
    pub fn expectation(&self, observable: &ComplexMatrix<T>) -> T {
        observable.matmul(&self.0).trace().re
    }

    pub fn min_eigenvalue(&self) -> Result<T> {
        Ok(eig_hermitian(&self.0.hermitian_part())?.eigenvalues[0])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SteadyMethod {
    TimeIntegration,
    NullSpace,
}

impl SteadyMethod {
    pub fn name(self) -> &'static str {
        match self {
            SteadyMethod::TimeIntegration => "time-integration",
            SteadyMethod::NullSpace => "null-space",
        }
    }
}

/// Fixed point `ρ^ss` together with how it was obtained.
#[derive(Clone, Debug)]
pub struct SteadyStateResult<T> {
    pub rho_ss: DensityMatrix<T>,
    /// `‖rhs(L, ρ^ss)‖_F`.
    pub residual_norm: T,
    pub elapsed_model_time: T,
    pub steps: usize,
    pub method: SteadyMethod,
    /// Dimension of the generator's zero eigenspace when it exceeds one;
    /// the fixed point then depends on the initial state.
    pub degenerate_dimension: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SteadyOptions<T> {
    /// Stationarity criterion `‖f(ρ)‖_F ≤ tol_ss`.
    pub tol_ss: T,
    /// Relative singular-value cutoff for zero modes.
    pub rank_tol: T,
    /// On a degenerate generator, return the long-time average of the
    /// trajectory instead of requiring it to settle. Undamped coherences
    /// (pure dephasing with a super-Ohmic bath, closed systems) never decay,
    /// so without this the integration runs into the horizon.
    pub average_undamped: bool,
    pub ode: OdeOptions<T>,
}

impl<T: Real> Default for SteadyOptions<T> {
    fn default() -> Self {
        Self {
            tol_ss: T::lit(1e-10),
            rank_tol: T::lit(1e-10),
            average_undamped: true,
            ode: OdeOptions {
                rtol: T::lit(1e-8),
                atol: T::lit(1e-10),
                horizon: T::lit(1e8),
                ..OdeOptions::default()
            },
        }
    }
}

/// Number of generator singular values below `rank_tol · σ_max`.
pub fn zero_mode_dimension<T: Real>(l: &Liouvillian<T>, rank_tol: T) -> usize {
    let m = l.site_matrix();
    if m.max_abs() == T::zero() {
        return m.cols();
    }
    svd(m).null_dimension(rank_tol)
}

fn hermitize_and_normalize<T: Real>(dim: usize, y: &mut [T]) {
    let m = ComplexMatrix::unvectorize(dim, &unembed_real(y)).expect("state has d² entries");
    let fixed = DensityMatrix::normalized(&m);
    y.copy_from_slice(&embed_real(&fixed.0.vectorize()));
}

/// Spectral projection of `rho` onto the zero eigenspace of the generator,
/// along its range: the limit of the time average of `e^{Lt} rho`.
///
/// Built from right null vectors `N` of `L` and left null vectors `M` as
/// `N (M†N)⁻¹ M† vec(rho)`.
pub fn zero_mode_projection<T: Real>(
    l: &Liouvillian<T>,
    rho: &DensityMatrix<T>,
    rank_tol: T,
) -> Result<ComplexMatrix<T>> {
    let gen = l.site_matrix();
    let n = gen.cols();
    let right = svd(gen);
    let left = svd(&gen.adjoint());
    let k = right.null_dimension(rank_tol);
    if k == 0 || left.null_dimension(rank_tol) != k {
        return Err(invalid("generator has no well-defined zero eigenspace"));
    }
    let null_cols = |v: &ComplexMatrix<T>| -> ComplexMatrix<T> { ComplexMatrix::from_fn(n, k, |i, j| v[(i, n - k + j)]) };
    let nn = null_cols(&right.v);
    let mm = null_cols(&left.v);
    let overlap = mm.adjoint().matmul(&nn);
    let coeffs = mm.adjoint().matvec(&rho.matrix().vectorize());
    let sol = solve_min_norm(&overlap, &coeffs, rank_tol)?;
    if sol.rank < k {
        return Err(invalid("zero eigenvalue of the generator is defective"));
    }
    ComplexMatrix::unvectorize(l.dim(), &nn.matvec(&sol.x))
}

/// Runs the Redfield dynamics from `rho0` until `‖dρ/dt‖_F ≤ tol_ss`.
///
/// With a degenerate generator and `average_undamped` set, the fixed point
/// depends on `rho0` and is taken as the long-time average of the trajectory
/// (its projection onto the zero eigenspace), which is also the limit of the
/// trajectory whenever every other mode decays.
pub fn integrate_to_steady<T: Real>(
    l: &Liouvillian<T>,
    rho0: &DensityMatrix<T>,
    opts: &SteadyOptions<T>,
    counters: &Counters,
) -> Result<SteadyStateResult<T>> {
    let d = l.dim();
    if rho0.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: rho0.dim(),
        });
    }
    counters.record_steady_solve();
    let zero_modes = zero_mode_dimension(l, opts.rank_tol);
    if zero_modes > 1 && opts.average_undamped {
        let rho = DensityMatrix::normalized(&zero_mode_projection(l, rho0, opts.rank_tol)?);
        let residual = l.rhs(&rho).frobenius_norm();
        if !(residual <= opts.tol_ss) {
            return Err(Error::NotConverged {
                horizon: 0.0,
                residual: residual.to_f64_lossy(),
            });
        }
        return Ok(SteadyStateResult {
            rho_ss: rho,
            residual_norm: residual,
            elapsed_model_time: T::infinity(),
            steps: 0,
            method: SteadyMethod::TimeIntegration,
            degenerate_dimension: Some(zero_modes),
        });
    }
    let gen = l.site_matrix();
    let n = d * d;
    let mut ode = opts.ode;
    if ode.initial_step.is_none() {
        ode.initial_step = Some(T::lit(1e-2) / gen.frobenius_norm().max(T::min_positive_value()));
    }
    let out = integrate_to_stationary(
        |y: &[T], dy: &mut [T]| {
            let x = unembed_real(y);
            let fx = gen.matvec(&x);
            for k in 0..n {
                dy[k] = fx[k].re;
                dy[n + k] = fx[k].im;
            }
        },
        embed_real(&rho0.matrix().vectorize()),
        opts.tol_ss,
        &ode,
        |y: &mut [T]| hermitize_and_normalize(d, y),
    )?;
    let rho = ComplexMatrix::unvectorize(d, &unembed_real(&out.y))?;
    Ok(SteadyStateResult {
        rho_ss: DensityMatrix(rho),
        residual_norm: out.residual_norm,
        elapsed_model_time: out.t,
        steps: out.steps,
        method: SteadyMethod::TimeIntegration,
        degenerate_dimension: (zero_modes > 1).then_some(zero_modes),
    })
}

/// Solves `{L·vec(ρ) = 0, Tr ρ = trace_target}` by minimum-norm least squares.
pub fn null_space_steady<T: Real>(
    l: &Liouvillian<T>,
    trace_target: T,
    rank_tol: T,
    counters: &Counters,
) -> Result<SteadyStateResult<T>> {
    let zero_modes = zero_mode_dimension(l, rank_tol);
    if zero_modes > 1 {
        return Err(Error::Degenerate {
            dimension: zero_modes,
        });
    }
    counters.record_steady_solve();
    let d = l.dim();
    let n = d * d;
    let gen = l.site_matrix();
    // Trace row scaled to the generator so neither block dominates the SVD.
    let weight = gen.max_abs().max(T::min_positive_value());
    let augmented = ComplexMatrix::from_fn(n + 1, n, |i, j| {
        if i < n {
            gen[(i, j)]
        } else if j % (d + 1) == 0 {
            re(weight)
        } else {
            re(T::zero())
        }
    });
    let mut rhs: Vec<Cx<T>> = vec![re(T::zero()); n + 1];
    rhs[n] = re(weight * trace_target);
    let sol = solve_min_norm(&augmented, &rhs, rank_tol)?;
    let rho = ComplexMatrix::unvectorize(d, &sol.x)?.hermitian_part();
    let tr = rho.trace().re;
    let rho = rho.scale(re(trace_target / tr));
    let residual = l.rhs_site(&rho).frobenius_norm();
    Ok(SteadyStateResult {
        rho_ss: DensityMatrix(rho),
        residual_norm: residual,
        elapsed_model_time: T::zero(),
        steps: 0,
        method: SteadyMethod::NullSpace,
        degenerate_dimension: None,
    })
}

/// Solves with the requested method.
pub fn solve_steady<T: Real>(
    l: &Liouvillian<T>,
    rho0: &DensityMatrix<T>,
    method: SteadyMethod,
    opts: &SteadyOptions<T>,
    counters: &Counters,
) -> Result<SteadyStateResult<T>> {
    match method {
        SteadyMethod::TimeIntegration => integrate_to_steady(l, rho0, opts, counters),
        SteadyMethod::NullSpace => null_space_steady(l, T::one(), opts.rank_tol, counters),
    }
}

/// Null-space solve when the fixed point is unique; otherwise time
/// integration from `rho0`, which returns the initial-state-dependent fixed
/// point flagged with the degeneracy.
pub fn solve_steady_auto<T: Real>(
    l: &Liouvillian<T>,
    rho0: &DensityMatrix<T>,
    opts: &SteadyOptions<T>,
    counters: &Counters,
) -> Result<SteadyStateResult<T>> {
    match null_space_steady(l, T::one(), opts.rank_tol, counters) {
        Err(Error::Degenerate { .. }) => integrate_to_steady(l, rho0, opts, counters),
        other => other,
    }
}
