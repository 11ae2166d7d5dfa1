//! One-sided Jacobi SVD and rank-revealing minimum-norm least squares.

use super::matrix::ComplexMatrix;
use super::real::{norm2, re, Cx, Real};
use crate::error::{invalid, Error, Result};

const MAX_SWEEPS: usize = 80;

/// Thin singular value decomposition `A = U·diag(σ)·V†`, `σ` descending.
#[derive(Clone, Debug)]
pub struct Svd<T> {
    /// `m × n`; columns belonging to zero singular values are zero.
    pub u: ComplexMatrix<T>,
    pub singular_values: Vec<T>,
    /// `n × n` unitary.
    pub v: ComplexMatrix<T>,
}

impl<T: Real> Svd<T> {
    /// Number of singular values at or below `rank_tol · σ_max`.
    pub fn null_dimension(&self, rank_tol: T) -> usize {
        let cutoff = rank_tol * self.largest();
        self.singular_values.iter().filter(|&&s| s <= cutoff).count()
    }

    pub fn largest(&self) -> T {
        self.singular_values.first().copied().unwrap_or_else(T::zero)
    }
}

/// Hestenes one-sided Jacobi: orthogonalizes the columns of `A` in place.
pub fn svd<T: Real>(a: &ComplexMatrix<T>) -> Svd<T> {
    let (m, n) = (a.rows(), a.cols());
    let mut cols: Vec<Vec<Cx<T>>> = (0..n).map(|j| a.column(j)).collect();
    let mut vcols: Vec<Vec<Cx<T>>> = (0..n)
        .map(|j| (0..n).map(|i| if i == j { re(T::one()) } else { re(T::zero()) }).collect())
        .collect();
    let tol = T::epsilon() * T::lit(m.max(n) as f64);

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..n {
            for j in (i + 1)..n {
                let alpha: T = cols[i].iter().map(|z| z.norm_sqr()).sum();
                let beta: T = cols[j].iter().map(|z| z.norm_sqr()).sum();
                let gamma = cols[i]
                    .iter()
                    .zip(&cols[j])
                    .fold(re(T::zero()), |acc, (x, y)| acc + x.conj() * y);
                let g = gamma.norm();
                if alpha == T::zero() || beta == T::zero() || g <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let phase = gamma.unscale(g);
                let zeta = (beta - alpha) / (T::lit(2.0) * g);
                let t = if zeta >= T::zero() {
                    T::one() / (zeta + (T::one() + zeta * zeta).sqrt())
                } else {
                    -T::one() / (-zeta + (T::one() + zeta * zeta).sqrt())
                };
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                apply_pair(&mut cols, i, j, c, s, phase);
                apply_pair(&mut vcols, i, j, c, s, phase);
            }
        }
        if !rotated {
            break;
        }
    }

    let mut sigma: Vec<(T, usize)> = cols.iter().enumerate().map(|(k, c)| (norm2(c), k)).collect();
    sigma.sort_by(|x, y| y.0.partial_cmp(&x.0).expect("finite singular values"));
    let mut u = ComplexMatrix::zeros(m, n);
    let mut v = ComplexMatrix::zeros(n, n);
    let mut singular_values = Vec::with_capacity(n);
    for (out, &(s, k)) in sigma.iter().enumerate() {
        singular_values.push(s);
        for r in 0..m {
            u[(r, out)] = if s > T::zero() { cols[k][r].unscale(s) } else { re(T::zero()) };
        }
        for r in 0..n {
            v[(r, out)] = vcols[k][r];
        }
    }
    Svd { u, singular_values, v }
}

// u_i ← c·u_i − s·e^{−iφ}·u_j,  u_j ← s·u_i + c·e^{−iφ}·u_j
fn apply_pair<T: Real>(cols: &mut [Vec<Cx<T>>], i: usize, j: usize, c: T, s: T, phase: Cx<T>) {
    let back = phase.conj();
    for r in 0..cols[i].len() {
        let x = cols[i][r];
        let y = cols[j][r] * back;
        cols[i][r] = x * re(c) - y * re(s);
        cols[j][r] = x * re(s) + y * re(c);
    }
}

/// Minimum-norm least-squares solution with its diagnostics.
#[derive(Clone, Debug)]
pub struct MinNormSolution<T> {
    pub x: Vec<Cx<T>>,
    /// `‖A·x − b‖₂`.
    pub residual_norm: T,
    pub rank: usize,
    pub singular_values: Vec<T>,
}

/// Solves `A·x ≈ b` in the minimum-norm least-squares sense, discarding
/// singular directions with `σ < rank_tol · σ_max`.
pub fn solve_min_norm<T: Real>(
    a: &ComplexMatrix<T>,
    b: &[Cx<T>],
    rank_tol: T,
) -> Result<MinNormSolution<T>> {
    if b.len() != a.rows() {
        return Err(Error::DimensionMismatch {
            expected: a.rows(),
            found: b.len(),
        });
    }
    if !(rank_tol > T::zero()) {
        return Err(invalid("rank_tol must be positive"));
    }
    let dec = svd(a);
    let cutoff = rank_tol * dec.largest();
    let n = a.cols();
    let mut x = vec![re(T::zero()); n];
    let mut rank = 0;
    for (k, &s) in dec.singular_values.iter().enumerate() {
        if s <= cutoff || s == T::zero() {
            continue;
        }
        rank += 1;
        let coeff = (0..a.rows()).fold(re(T::zero()), |acc, r| acc + dec.u[(r, k)].conj() * b[r]).unscale(s);
        for (r, xr) in x.iter_mut().enumerate() {
            *xr = *xr + dec.v[(r, k)] * coeff;
        }
    }
    let ax = a.matvec(&x);
    let residual: Vec<Cx<T>> = ax.iter().zip(b).map(|(p, q)| p - q).collect();
    Ok(MinNormSolution {
        residual_norm: norm2(&residual),
        x,
        rank,
        singular_values: dec.singular_values,
    })
}
