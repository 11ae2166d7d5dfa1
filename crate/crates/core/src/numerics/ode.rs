//! Dormand–Prince 5(4) integration of autonomous systems to stationarity.

use super::real::{norm2_real, Real};
use crate::error::{invalid, Error, Result};

/// Step-control and stopping parameters for [`integrate_to_stationary`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OdeOptions<T> {
    pub rtol: T,
    pub atol: T,
    /// First trial step; when `None` a step of `1e-2 / ‖f(y0)‖`-scale is used.
    pub initial_step: Option<T>,
    pub max_step: T,
    /// Model-time horizon after which the run is declared non-convergent.
    pub horizon: T,
    pub max_steps: usize,
}

impl<T: Real> Default for OdeOptions<T> {
    fn default() -> Self {
        Self {
            rtol: T::lit(1e-8),
            atol: T::lit(1e-10),
            initial_step: None,
            max_step: T::infinity(),
            horizon: T::lit(1e8),
            max_steps: 20_000_000,
        }
    }
}

/// End state of a run that reached `‖f(y)‖ ≤ tol`.
#[derive(Clone, Debug, PartialEq)]
pub struct Stationary<T> {
    pub y: Vec<T>,
    pub t: T,
    pub steps: usize,
    pub rejected: usize,
    pub residual_norm: T,
}

const A: [&[f64]; 6] = [
    &[0.2],
    &[3.0 / 40.0, 9.0 / 40.0],
    &[44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0],
    &[19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0],
    &[9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0],
    &[35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// Fifth-order minus embedded fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

const INCREMENT_RTOL: f64 = 1e-3;

/// Integrates `dy/dt = f(y)` from `y0` until `‖f(y)‖₂ ≤ tol`.
///
/// `project` is applied to every accepted state (e.g. to restore invariants
/// that rounding erodes); the derivative is re-evaluated afterwards.
pub fn integrate_to_stationary<T, F, P>(
    mut rhs: F,
    y0: Vec<T>,
    tol: T,
    opts: &OdeOptions<T>,
    mut project: P,
) -> Result<Stationary<T>>
where
    T: Real,
    F: FnMut(&[T], &mut [T]),
    P: FnMut(&mut [T]),
{
    if !(tol > T::zero()) {
        return Err(invalid("stationarity tolerance must be positive"));
    }
    let n = y0.len();
    let mut y = y0;
    let mut k: Vec<Vec<T>> = vec![vec![T::zero(); n]; 7];
    rhs(&y, &mut k[0]);
    let mut residual = norm2_real(&k[0]);
    if residual <= tol {
        return Ok(Stationary {
            y,
            t: T::zero(),
            steps: 0,
            rejected: 0,
            residual_norm: residual,
        });
    }

    let mut h = opts.initial_step.unwrap_or_else(|| {
        let scale = norm2_real(&y).max(T::lit(1e-300));
        T::lit(1e-2) * scale / residual
    });
    h = h.min(opts.max_step);
    let mut t = T::zero();
    let mut steps = 0;
    let mut rejected = 0;
    let mut stage = vec![T::zero(); n];
    let mut y_new = vec![T::zero(); n];
    let fifth = T::lit(0.2);

    while t < opts.horizon && steps + rejected < opts.max_steps {
        for s in 1..7 {
            for i in 0..n {
                let mut acc = T::zero();
                for (j, &a) in A[s - 1].iter().enumerate() {
                    acc = acc + T::lit(a) * k[j][i];
                }
                stage[i] = y[i] + h * acc;
            }
            rhs(&stage, &mut k[s]);
            if s == 6 {
                y_new.copy_from_slice(&stage);
            }
        }

        let mut err_sq = T::zero();
        let mut local_sq = T::zero();
        let mut incr_sq = T::zero();
        for i in 0..n {
            let mut e = T::zero();
            for (j, &ej) in E.iter().enumerate() {
                e = e + T::lit(ej) * k[j][i];
            }
            let sc = opts.atol + opts.rtol * y[i].abs().max(y_new[i].abs());
            let r = h * e / sc;
            err_sq = err_sq + r * r;
            local_sq = local_sq + (h * e) * (h * e);
            incr_sq = incr_sq + (y_new[i] - y[i]) * (y_new[i] - y[i]);
        }
        // Near the fixed point the absolute tolerance alone lets the step grow
        // to the stability boundary, where the error stops decaying. Bounding
        // the local error by a fraction of the increment keeps every step
        // contracting.
        let relative = local_sq.sqrt() / (T::lit(INCREMENT_RTOL) * incr_sq.sqrt() + T::min_positive_value());
        let err = (err_sq / T::lit(n.max(1) as f64)).sqrt().max(relative);
        if !err.is_finite() {
            return Err(Error::NotConverged {
                horizon: t.to_f64_lossy(),
                residual: f64::INFINITY,
            });
        }

        if err <= T::one() {
            t = t + h;
            steps += 1;
            std::mem::swap(&mut y, &mut y_new);
            project(&mut y);
            rhs(&y, &mut k[0]);
            residual = norm2_real(&k[0]);
            if residual <= tol {
                return Ok(Stationary {
                    y,
                    t,
                    steps,
                    rejected,
                    residual_norm: residual,
                });
            }
            let factor = if err == T::zero() {
                T::lit(5.0)
            } else {
                (T::lit(0.9) * err.powf(-fifth)).min(T::lit(5.0)).max(T::lit(0.2))
            };
            h = (h * factor).min(opts.max_step);
        } else {
            rejected += 1;
            let factor = (T::lit(0.9) * err.powf(-fifth)).max(T::lit(0.2));
            h = h * factor.min(T::one());
            if h <= T::epsilon() * t.abs().max(T::one()) {
                break;
            }
        }
    }
    Err(Error::NotConverged {
        horizon: t.to_f64_lossy(),
        residual: residual.to_f64_lossy(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_decay_reaches_fixed_point() {
        // dy/dt = −(y − 2)
        let out = integrate_to_stationary(
            |y: &[f64], dy: &mut [f64]| dy[0] = -(y[0] - 2.0),
            vec![0.0],
            1e-12,
            &OdeOptions::default(),
            |_| {},
        )
        .unwrap();
        assert!((out.y[0] - 2.0).abs() < 1e-11);
        assert!(out.steps > 0);
    }

    #[test]
    fn accuracy_on_known_trajectory() {
        // Damped rotation; compare the time at which |y| hits the tolerance.
        let out = integrate_to_stationary(
            |y: &[f64], dy: &mut [f64]| {
                dy[0] = -0.1 * y[0] - y[1];
                dy[1] = y[0] - 0.1 * y[1];
            },
            vec![1.0, 0.0],
            1e-6,
            // atol well below the final radius so the phase stays resolved.
            &OdeOptions {
                atol: 1e-14,
                ..OdeOptions::default()
            },
            |_| {},
        )
        .unwrap();
        let radius = (out.y[0].powi(2) + out.y[1].powi(2)).sqrt();
        let expected = (-0.1 * out.t).exp();
        assert!((radius - expected).abs() < 1e-7, "{radius} vs {expected}");
        let angle = out.y[1].atan2(out.y[0]);
        let wrapped = (angle - out.t).rem_euclid(2.0 * std::f64::consts::PI);
        let phase_err = wrapped.min(2.0 * std::f64::consts::PI - wrapped);
        assert!(phase_err < 1e-5, "{phase_err} at t={} steps={}", out.t, out.steps);
    }

    #[test]
    fn already_stationary() {
        let out = integrate_to_stationary(
            |_: &[f64], dy: &mut [f64]| dy[0] = 0.0,
            vec![1.0],
            1e-10,
            &OdeOptions::default(),
            |_| {},
        )
        .unwrap();
        assert_eq!(out.steps, 0);
    }

    #[test]
    fn undamped_oscillator_hits_horizon() {
        let opts = OdeOptions {
            horizon: 50.0,
            ..OdeOptions::default()
        };
        let err = integrate_to_stationary(
            |y: &[f64], dy: &mut [f64]| {
                dy[0] = -y[1];
                dy[1] = y[0];
            },
            vec![1.0, 0.0],
            1e-10,
            &opts,
            |_| {},
        )
        .unwrap_err();
        match err {
            Error::NotConverged { residual, .. } => assert!((residual - 1.0).abs() < 1e-6),
            other => panic!("unexpected {other:?}"),
        }
    }
}
