//! Super-Ohmic harmonic bath: spectral density, correlation function and the
//! one-sided Fourier transform that sets the Redfield rates.
//!
//! The half-Fourier transform `C(Ω) = ∫₀^∞ dτ F(τ) e^{−iΩτ}` is evaluated by
//! exchanging the time and frequency integrals under an `e^{−ετ}` convergence
//! factor. In the `ε → 0` limit the real part collapses onto the Bose-weighted
//! spectral density at `|Ω|`,
//!
//! ```text
//! Re C(Ω) = π g(Ω) n(Ω)            Ω > 0
//! Re C(Ω) = π g(|Ω|) (n(|Ω|) + 1)  Ω < 0,   n(ω) = 1 / (e^{βω} − 1)
//! ```
//!
//! and the imaginary part is the principal-value integral
//! `P∫ dω g(ω) [n(ω)/(ω − Ω) − (n(ω) + 1)/(ω + Ω)]`.

use crate::error::{invalid, Result};
use crate::numerics::quad::{quad_adaptive, quad_adaptive_budget};
use crate::numerics::real::{cx, re, Cx, Real};

/// All frequency integrals are truncated at this multiple of `ω_c`.
pub const CUTOFF_MULTIPLE: f64 = 40.0;

/// Parameters of the harmonic bath and its spectral density
/// `g(ω) = η ω^s ω_c^{1−s} e^{−ω/ω_c}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BathParams<T> {
    pub eta: T,
    pub s_exponent: T,
    pub omega_c: T,
    pub beta: T,
}

impl<T: Real> BathParams<T> {
    pub fn new(eta: T, s_exponent: T, omega_c: T, beta: T) -> Result<Self> {
        let p = Self {
            eta,
            s_exponent,
            omega_c,
            beta,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta >= T::zero() && self.eta.is_finite()) {
            return Err(invalid(format!("eta must be >= 0 (got {})", self.eta)));
        }
        if !(self.omega_c > T::zero() && self.omega_c.is_finite()) {
            return Err(invalid(format!("omega_c must be > 0 (got {})", self.omega_c)));
        }
        if !(self.beta > T::zero() && self.beta.is_finite()) {
            return Err(invalid(format!("beta must be > 0 (got {})", self.beta)));
        }
        if !(self.s_exponent > T::zero() && self.s_exponent.is_finite()) {
            return Err(invalid(format!(
                "s_exponent must be > 0 (got {})",
                self.s_exponent
            )));
        }
        Ok(())
    }

    /// Upper limit of every frequency quadrature.
    pub fn cutoff(&self) -> T {
        T::lit(CUTOFF_MULTIPLE) * self.omega_c
    }

    fn g(&self, w: T) -> T {
        if w == T::zero() {
            return T::zero();
        }
        self.eta
            * w.powf(self.s_exponent)
            * self.omega_c.powf(T::one() - self.s_exponent)
            * (-w / self.omega_c).exp()
    }

    /// Bose occupation `1 / (e^{βω} − 1)`.
    fn bose(&self, w: T) -> T {
        T::one() / (self.beta * w).exp_m1()
    }

    /// `g(ω)·n(ω)`, continued to its limit at `ω = 0`.
    fn g_bose(&self, w: T) -> T {
        if w == T::zero() {
            // g(ω)/(βω) ~ η ω^{s−1}/β
            return if self.s_exponent > T::one() {
                T::zero()
            } else {
                self.eta / self.beta
            };
        }
        self.g(w) * self.bose(w)
    }
}

/// Spectral density `g(ω)` for `ω ≥ 0`.
pub fn spectral_density<T: Real>(w: T, p: &BathParams<T>) -> Result<T> {
    if !(w >= T::zero()) {
        return Err(invalid(format!("spectral density needs omega >= 0 (got {w})")));
    }
    Ok(p.g(w))
}

/// Bath correlation function
/// `F(τ) = ∫₀^∞ dω g(ω) [coth(βω/2) cos ωτ − i sin ωτ]`.
pub fn correlation<T: Real>(tau: T, p: &BathParams<T>, abs_tol: T) -> Result<Cx<T>> {
    if !(tau >= T::zero()) {
        return Err(invalid(format!("correlation needs tau >= 0 (got {tau})")));
    }
    let two = T::lit(2.0);
    let q = quad_adaptive(
        |w: T| {
            // g·coth(βω/2) = g·(2n + 1)
            let sym = two * p.g_bose(w) + p.g(w);
            cx(sym * (w * tau).cos(), -p.g(w) * (w * tau).sin())
        },
        T::zero(),
        p.cutoff(),
        abs_tol,
    )?;
    Ok(q.value)
}

/// Switches for [`half_fourier`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HalfFourierOptions<T> {
    /// Keep the principal-value (energy shift) part.
    pub include_imag: bool,
    /// Absolute tolerance of the principal-value quadratures.
    pub abs_tol: T,
}

impl<T: Real> Default for HalfFourierOptions<T> {
    fn default() -> Self {
        Self {
            include_imag: false,
            abs_tol: T::lit(1e-13),
        }
    }
}

/// `C(Ω)` at one Bohr frequency.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HalfFourier<T> {
    pub omega: T,
    pub value: Cx<T>,
}

/// One-sided Fourier transform `C(Ω) = ∫₀^∞ dτ F(τ) e^{−iΩτ}`.
pub fn half_fourier<T: Real>(
    omega: T,
    p: &BathParams<T>,
    opts: &HalfFourierOptions<T>,
) -> Result<HalfFourier<T>> {
    if !omega.is_finite() {
        return Err(invalid("half_fourier needs a finite frequency"));
    }
    let real = decay_part(omega, p);
    let imag = if opts.include_imag {
        shift_part(omega, p, opts.abs_tol)?
    } else {
        T::zero()
    };
    Ok(HalfFourier {
        omega,
        value: cx(real, imag),
    })
}

fn decay_part<T: Real>(omega: T, p: &BathParams<T>) -> T {
    let a = omega.abs();
    if a == T::zero() {
        // π·lim_{ω→0} g(ω)(n(ω) + 1/2 ± 1/2); zero for s > 1.
        return T::PI() * p.g_bose(T::zero());
    }
    let occupation = if omega > T::zero() {
        p.bose(a)
    } else {
        p.bose(a) + T::one()
    };
    T::PI() * p.g(a) * occupation
}

fn shift_part<T: Real>(omega: T, p: &BathParams<T>, abs_tol: T) -> Result<T> {
    let cutoff = p.cutoff();
    let absorb = |w: T| p.g_bose(w);
    let emit = |w: T| p.g_bose(w) + p.g(w);
    if omega == T::zero() {
        // n/ω − (n + 1)/ω = −1/ω
        let q = quad_adaptive(
            |w: T| re(if w == T::zero() { T::zero() } else { -p.g(w) / w }),
            T::zero(),
            cutoff,
            abs_tol,
        )?;
        return Ok(q.value.re);
    }
    let a = omega.abs();
    // The pole sits in the absorption term for Ω > 0 and in the emission
    // term for Ω < 0; the other term is regular on [0, cutoff].
    let (regular, singular): (T, T) = if omega > T::zero() {
        let reg = quad_adaptive(|w: T| re(-emit(w) / (w + a)), T::zero(), cutoff, abs_tol)?;
        (reg.value.re, principal_value(&absorb, a, cutoff, abs_tol)?)
    } else {
        let reg = quad_adaptive(|w: T| re(absorb(w) / (w + a)), T::zero(), cutoff, abs_tol)?;
        (reg.value.re, -principal_value(&emit, a, cutoff, abs_tol)?)
    };
    Ok(regular + singular)
}

/// `P∫₀^W h(ω)/(ω − a) dω` by folding symmetric pairs `a ± u` about the pole.
fn principal_value<T: Real, H: Fn(T) -> T>(h: &H, a: T, cutoff: T, abs_tol: T) -> Result<T> {
    if a >= cutoff {
        let q = quad_adaptive(|w: T| re(h(w) / (w - a)), T::zero(), cutoff, abs_tol)?;
        return Ok(q.value.re);
    }
    let r = a.min(cutoff - a);
    let folded = quad_adaptive(
        |u: T| re((h(a + u) - h(a - u)) / u),
        T::zero(),
        r,
        abs_tol,
    )?;
    let mut total = folded.value.re;
    // Whichever side of [a − r, a + r] is left over is free of the pole.
    if a + r < cutoff {
        let q = quad_adaptive(|w: T| re(h(w) / (w - a)), a + r, cutoff, abs_tol)?;
        total = total + q.value.re;
    }
    if a - r > T::zero() {
        let q = quad_adaptive(|w: T| re(h(w) / (w - a)), T::zero(), a - r, abs_tol)?;
        total = total + q.value.re;
    }
    Ok(total)
}

/// `C(Ω)` with the convergence factor `e^{−ετ}` kept finite:
/// `∫ dω g(ω) [n(ω)/(ε − i(ω − Ω)) + (n(ω) + 1)/(ε + i(ω + Ω))]`.
///
/// Tends to [`half_fourier`] (with the imaginary part) as `ε → 0`, so it
/// serves as an independent check of the closed form.
pub fn damped_half_fourier<T: Real>(omega: T, damping: T, p: &BathParams<T>, abs_tol: T) -> Result<Cx<T>> {
    if !(damping > T::zero()) || !omega.is_finite() {
        return Err(invalid("damped transform needs damping > 0 and a finite frequency"));
    }
    let integrand = |w: T| {
        let n = p.g_bose(w);
        let absorb = cx(damping, -(w - omega)).inv() * re(n);
        let emit = cx(damping, w + omega).inv() * re(n + p.g(w));
        absorb + emit
    };
    // Split at the Lorentzian peak so the adaptive rule sees it on an edge.
    let cutoff = p.cutoff();
    let peak = omega.abs().min(cutoff);
    let mut total = cx(T::zero(), T::zero());
    for (a, b) in [(T::zero(), peak), (peak, cutoff)] {
        if b > a {
            total = total + quad_adaptive_budget(integrand, a, b, abs_tol, 20_000)?.value;
        }
    }
    Ok(total)
}

/// Memo of `C(Ω)` values for one Liouvillian build.
///
/// The bath parameters and options are fixed at construction so entries are
/// keyed on the frequency alone.
#[derive(Clone, Debug)]
pub struct HalfFourierCache<T> {
    params: BathParams<T>,
    opts: HalfFourierOptions<T>,
    entries: Vec<HalfFourier<T>>,
}

impl<T: Real> HalfFourierCache<T> {
    pub fn new(params: BathParams<T>, opts: HalfFourierOptions<T>) -> Self {
        Self {
            params,
            opts,
            entries: Vec::new(),
        }
    }

    pub fn get(&mut self, omega: T) -> Result<Cx<T>> {
        if let Some(hit) = self.entries.iter().find(|e| e.omega == omega) {
            return Ok(hit.value);
        }
        let fresh = half_fourier(omega, &self.params, &self.opts)?;
        self.entries.push(fresh);
        Ok(fresh.value)
    }

    /// Number of distinct frequencies evaluated so far.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}
