//! Eigenvalues of general complex matrices by Hessenberg reduction and
//! shifted QR iteration.

use super::matrix::ComplexMatrix;
use super::real::{re, Cx, Real};
use crate::error::{invalid, Error, Result};

const MAX_ITERATIONS_PER_EIGENVALUE: usize = 60;

/// All eigenvalues of a square complex matrix, in no particular order.
pub fn eigenvalues<T: Real>(a: &ComplexMatrix<T>) -> Result<Vec<Cx<T>>> {
    if !a.is_square() {
        return Err(invalid(format!("eigenvalues need a square matrix, got {}x{}", a.rows(), a.cols())));
    }
    let n = a.rows();
    let mut h = hessenberg(a);
    let mut out = Vec::with_capacity(n);
    let mut hi = n;
    let mut iterations = 0;
    while hi > 0 {
        if hi == 1 {
            out.push(h[(0, 0)]);
            break;
        }
        // Find the start of the trailing unreduced block.
        let mut lo = hi - 1;
        while lo > 0 {
            let scale = h[(lo, lo)].norm() + h[(lo - 1, lo - 1)].norm();
            if h[(lo, lo - 1)].norm() <= T::epsilon() * scale.max(T::min_positive_value()) {
                h[(lo, lo - 1)] = re(T::zero());
                break;
            }
            lo -= 1;
        }
        if lo == hi - 1 {
            out.push(h[(hi - 1, hi - 1)]);
            hi -= 1;
            iterations = 0;
            continue;
        }
        iterations += 1;
        if iterations > MAX_ITERATIONS_PER_EIGENVALUE {
            return Err(Error::NotConverged {
                horizon: iterations as f64,
                residual: h[(hi - 1, hi - 2)].norm().to_f64_lossy(),
            });
        }
        let shift = if iterations % 11 == 0 {
            // Exceptional shift to break cycles.
            h[(hi - 1, hi - 1)] + re(h[(hi - 1, hi - 2)].norm())
        } else {
            wilkinson_shift(&h, hi)
        };
        qr_sweep(&mut h, lo, hi, shift);
    }
    Ok(out)
}

fn wilkinson_shift<T: Real>(h: &ComplexMatrix<T>, hi: usize) -> Cx<T> {
    let a = h[(hi - 2, hi - 2)];
    let b = h[(hi - 2, hi - 1)];
    let c = h[(hi - 1, hi - 2)];
    let d = h[(hi - 1, hi - 1)];
    let half = re(T::lit(0.5));
    let mean = (a + d) * half;
    let disc = (((a - d) * half) * ((a - d) * half) + b * c).sqrt();
    let (l1, l2) = (mean + disc, mean - disc);
    if (l1 - d).norm() <= (l2 - d).norm() {
        l1
    } else {
        l2
    }
}

/// One implicit single-shift QR step on rows/columns `lo..hi` via Givens
/// rotations, applied to the whole matrix.
fn qr_sweep<T: Real>(h: &mut ComplexMatrix<T>, lo: usize, hi: usize, shift: Cx<T>) {
    let n = h.rows();
    let mut x = h[(lo, lo)] - shift;
    let mut y = h[(lo + 1, lo)];
    for k in lo..hi - 1 {
        let (c, s) = givens(x, y);
        // Rows k, k+1 from the left.
        for j in 0..n {
            let p = h[(k, j)];
            let q = h[(k + 1, j)];
            h[(k, j)] = re(c) * p + s * q;
            h[(k + 1, j)] = -s.conj() * p + re(c) * q;
        }
        // Columns k, k+1 from the right with the adjoint rotation.
        for i in 0..n {
            let p = h[(i, k)];
            let q = h[(i, k + 1)];
            h[(i, k)] = re(c) * p + s.conj() * q;
            h[(i, k + 1)] = -s * p + re(c) * q;
        }
        if k + 2 < hi {
            x = h[(k + 1, k)];
            y = h[(k + 2, k)];
        }
    }
}

/// `(c, s)` with `[c s; −s̄ c]·[x; y] = [r; 0]`, `c` real.
fn givens<T: Real>(x: Cx<T>, y: Cx<T>) -> (T, Cx<T>) {
    let ny = y.norm();
    if ny == T::zero() {
        return (T::one(), re(T::zero()));
    }
    let nx = x.norm();
    if nx == T::zero() {
        return (T::zero(), y.conj().unscale(ny));
    }
    let r = nx.hypot(ny);
    let phase = x.unscale(nx);
    (nx / r, (phase * y.conj()).unscale(r))
}

/// Householder reduction to upper Hessenberg form (similar to `a`).
fn hessenberg<T: Real>(a: &ComplexMatrix<T>) -> ComplexMatrix<T> {
    let n = a.rows();
    let mut h = a.clone();
    for k in 0..n.saturating_sub(2) {
        let col: Vec<Cx<T>> = (k + 1..n).map(|i| h[(i, k)]).collect();
        let alpha_norm = col.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt();
        if alpha_norm == T::zero() {
            continue;
        }
        let lead = col[0];
        let phase = if lead.norm() == T::zero() { re(T::one()) } else { lead.unscale(lead.norm()) };
        let mut v = col;
        v[0] = v[0] + phase * re(alpha_norm);
        let vnorm = v.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt();
        if vnorm == T::zero() {
            continue;
        }
        for z in v.iter_mut() {
            *z = z.unscale(vnorm);
        }
        let two = re(T::lit(2.0));
        // H ← (I − 2vv†) H
        for j in 0..n {
            let dot = v.iter().enumerate().fold(re(T::zero()), |acc, (r, vr)| acc + vr.conj() * h[(k + 1 + r, j)]);
            for (r, vr) in v.iter().enumerate() {
                h[(k + 1 + r, j)] = h[(k + 1 + r, j)] - two * *vr * dot;
            }
        }
        // H ← H (I − 2vv†)
        for i in 0..n {
            let dot = v.iter().enumerate().fold(re(T::zero()), |acc, (r, vr)| acc + h[(i, k + 1 + r)] * *vr);
            for (r, vr) in v.iter().enumerate() {
                h[(i, k + 1 + r)] = h[(i, k + 1 + r)] - two * dot * vr.conj();
            }
        }
    }
    h
}
