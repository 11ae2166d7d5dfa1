//! Globally adaptive Gauss–Kronrod (7/15) quadrature for complex-valued integrands.

use super::real::{re, Cx, Real};
use crate::error::{invalid, Error, Result};

/// Panel budget used by [`quad_adaptive`].
pub const DEFAULT_MAX_PANELS: usize = 4000;

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];

const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];

// Gauss weights for XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// Integral value with its aggregated error estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quadrature<T> {
    pub value: Cx<T>,
    pub error: T,
    pub panels: usize,
}

#[derive(Clone, Copy)]
struct Panel<T> {
    a: T,
    b: T,
    value: Cx<T>,
    error: T,
}

fn gauss_kronrod<T: Real, F>(f: &mut F, a: T, b: T) -> Result<Panel<T>>
where
    F: FnMut(T) -> Cx<T>,
{
    let half = (b - a) * T::lit(0.5);
    let mid = (a + b) * T::lit(0.5);
    let mut kronrod = re(T::zero());
    let mut gauss = re(T::zero());
    for (k, (&x, &w)) in XGK.iter().zip(&WGK).enumerate() {
        let pts: &[T] = if x == 0.0 {
            &[mid]
        } else {
            &[mid - half * T::lit(x), mid + half * T::lit(x)]
        };
        for &p in pts {
            let fx = f(p);
            if !(fx.re.is_finite() && fx.im.is_finite()) {
                return Err(Error::Quadrature {
                    a: a.to_f64_lossy(),
                    b: b.to_f64_lossy(),
                    error: f64::INFINITY,
                });
            }
            kronrod = kronrod + fx * re(T::lit(w));
            if k % 2 == 1 {
                gauss = gauss + fx * re(T::lit(WG[k / 2]));
            }
        }
    }
    let value = kronrod * re(half);
    let error = ((kronrod - gauss) * re(half)).norm();
    Ok(Panel { a, b, value, error })
}

/// Integrates `f` over `[a, b]` until the summed panel error is `≤ abs_tol`.
pub fn quad_adaptive<T: Real, F>(f: F, a: T, b: T, abs_tol: T) -> Result<Quadrature<T>>
where
    F: FnMut(T) -> Cx<T>,
{
    quad_adaptive_budget(f, a, b, abs_tol, DEFAULT_MAX_PANELS)
}

/// [`quad_adaptive`] with an explicit panel budget.
pub fn quad_adaptive_budget<T: Real, F>(
    mut f: F,
    a: T,
    b: T,
    abs_tol: T,
    max_panels: usize,
) -> Result<Quadrature<T>>
where
    F: FnMut(T) -> Cx<T>,
{
    if !(a < b) {
        return Err(invalid(format!(
            "quadrature interval must satisfy a < b (got [{a}, {b}])"
        )));
    }
    if !(abs_tol > T::zero()) {
        return Err(invalid("abs_tol must be positive"));
    }
    let mut panels = vec![gauss_kronrod(&mut f, a, b)?];
    loop {
        let total_error: T = panels.iter().map(|p| p.error).sum();
        let magnitude: T = panels.iter().map(|p| p.value.norm()).sum();
        // Below this the estimate is dominated by rounding.
        let floor = T::lit(50.0) * T::epsilon() * magnitude;
        if total_error <= abs_tol || total_error <= floor {
            let value = panels.iter().fold(re(T::zero()), |acc, p| acc + p.value);
            return Ok(Quadrature {
                value,
                error: total_error,
                panels: panels.len(),
            });
        }
        let (worst_idx, worst) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.partial_cmp(&y.1.error).expect("finite error"))
            .map(|(i, p)| (i, *p))
            .expect("at least one panel");
        let mid = (worst.a + worst.b) * T::lit(0.5);
        if panels.len() >= max_panels || !(worst.a < mid && mid < worst.b) {
            return Err(Error::Quadrature {
                a: worst.a.to_f64_lossy(),
                b: worst.b.to_f64_lossy(),
                error: worst.error.to_f64_lossy(),
            });
        }
        panels[worst_idx] = gauss_kronrod(&mut f, worst.a, mid)?;
        panels.push(gauss_kronrod(&mut f, mid, worst.b)?);
    }
}
