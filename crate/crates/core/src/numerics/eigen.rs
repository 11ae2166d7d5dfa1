//! Cyclic Jacobi eigensolver for dense Hermitian matrices.

use super::matrix::ComplexMatrix;
use super::real::{re, Cx, Real};
use crate::error::Result;

const MAX_SWEEPS: usize = 100;

/// Eigenvalues in ascending order with the matching unitary eigenvector matrix.
///
/// Column `μ` of `eigenvectors` is the eigenstate `|μ⟩`; its phase is fixed so
/// that its largest-magnitude component (first one on ties) is real and positive.
#[derive(Clone, Debug, PartialEq)]
pub struct EigenSystem<T> {
    pub eigenvalues: Vec<T>,
    pub eigenvectors: ComplexMatrix<T>,
}

impl<T: Real> EigenSystem<T> {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Bohr frequency `ω_{μν} = ε_μ − ε_ν`.
    #[inline]
    pub fn bohr(&self, mu: usize, nu: usize) -> T {
        self.eigenvalues[mu] - self.eigenvalues[nu]
    }

    /// `U† A U`: representation of a site-basis operator in the eigenbasis.
    pub fn to_eigenbasis(&self, a: &ComplexMatrix<T>) -> ComplexMatrix<T> {
        self.eigenvectors.adjoint().matmul(a).matmul(&self.eigenvectors)
    }

    /// `U A U†`: back from the eigenbasis to the site basis.
    pub fn from_eigenbasis(&self, a: &ComplexMatrix<T>) -> ComplexMatrix<T> {
        self.eigenvectors.matmul(a).matmul(&self.eigenvectors.adjoint())
    }

    /// `U·diag(λ)·U†`.
    pub fn reconstruct(&self) -> ComplexMatrix<T> {
        self.from_eigenbasis(&ComplexMatrix::diagonal(&self.eigenvalues))
    }
}

/// Tolerance used to accept a matrix as Hermitian.
pub fn hermitian_tolerance<T: Real>(h: &ComplexMatrix<T>) -> T {
    T::epsilon() * T::lit(4096.0) * T::one().max(h.max_abs())
}

/// Diagonalizes a Hermitian matrix by cyclic complex Jacobi rotations.
pub fn eig_hermitian<T: Real>(h: &ComplexMatrix<T>) -> Result<EigenSystem<T>> {
    h.ensure_hermitian(hermitian_tolerance(h))?;
    let n = h.rows();
    let mut a = h.hermitian_part();
    let mut v = ComplexMatrix::<T>::identity(n);
    let scale = a.frobenius_norm();
    let target = T::epsilon() * scale;

    for _ in 0..MAX_SWEEPS {
        let off = off_diagonal_norm(&a);
        if off <= target || off == T::zero() {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                rotate(&mut a, &mut v, p, q);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.partial_cmp(&a[(j, j)].re).expect("finite eigenvalues"));
    let eigenvalues = order.iter().map(|&k| a[(k, k)].re).collect();
    let mut vectors = ComplexMatrix::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        let mut column = v.column(k);
        fix_phase(&mut column);
        for (row, z) in column.into_iter().enumerate() {
            vectors[(row, col)] = z;
        }
    }
    Ok(EigenSystem {
        eigenvalues,
        eigenvectors: vectors,
    })
}

fn off_diagonal_norm<T: Real>(a: &ComplexMatrix<T>) -> T {
    let n = a.rows();
    let mut s = T::zero();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s = s + a[(i, j)].norm_sqr();
            }
        }
    }
    s.sqrt()
}

/// One Jacobi rotation annihilating `a[p][q]`; `a ← J† a J`, `v ← v J`.
fn rotate<T: Real>(a: &mut ComplexMatrix<T>, v: &mut ComplexMatrix<T>, p: usize, q: usize) {
    let apq = a[(p, q)];
    let mag = apq.norm();
    if mag == T::zero() {
        return;
    }
    let n = a.rows();
    let phase = apq.unscale(mag);
    let (app, aqq) = (a[(p, p)].re, a[(q, q)].re);
    let zeta = (aqq - app) / (T::lit(2.0) * mag);
    let t = if zeta >= T::zero() {
        T::one() / (zeta + (T::one() + zeta * zeta).sqrt())
    } else {
        -T::one() / (-zeta + (T::one() + zeta * zeta).sqrt())
    };
    let c = T::one() / (T::one() + t * t).sqrt();
    let s = t * c;
    // J = [[c, s], [−s·e^{−iφ}, c·e^{−iφ}]] on the (p, q) plane.
    let jpp = re(c);
    let jpq = re(s);
    let jqp = phase.conj() * re(-s);
    let jqq = phase.conj() * re(c);

    for i in 0..n {
        let (aip, aiq) = (a[(i, p)], a[(i, q)]);
        a[(i, p)] = aip * jpp + aiq * jqp;
        a[(i, q)] = aip * jpq + aiq * jqq;
        let (vip, viq) = (v[(i, p)], v[(i, q)]);
        v[(i, p)] = vip * jpp + viq * jqp;
        v[(i, q)] = vip * jpq + viq * jqq;
    }
    for j in 0..n {
        let (apj, aqj) = (a[(p, j)], a[(q, j)]);
        a[(p, j)] = jpp.conj() * apj + jqp.conj() * aqj;
        a[(q, j)] = jpq.conj() * apj + jqq.conj() * aqj;
    }
    a[(p, q)] = re(T::zero());
    a[(q, p)] = re(T::zero());
    a[(p, p)] = re(a[(p, p)].re);
    a[(q, q)] = re(a[(q, q)].re);
}

fn fix_phase<T: Real>(column: &mut [Cx<T>]) {
    let largest = column.iter().fold(T::zero(), |m, z| m.max(z.norm()));
    if largest == T::zero() {
        return;
    }
    let cutoff = largest * (T::one() - T::lit(1e3) * T::epsilon());
    let pivot = column
        .iter()
        .position(|z| z.norm() >= cutoff)
        .expect("some component attains the maximum");
    let phase = column[pivot].conj().unscale(column[pivot].norm());
    for z in column.iter_mut() {
        *z = *z * phase;
    }
    column[pivot] = re(column[pivot].re);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::real::cx;
    use proptest::prelude::*;

    fn hs(eps: f64, delta: f64) -> ComplexMatrix<f64> {
        &ComplexMatrix::pauli_z().scale(re(eps / 2.0)) + &ComplexMatrix::pauli_x().scale(re(delta / 2.0))
    }

    #[test]
    fn pauli_z_spectrum() {
        let es = eig_hermitian(&ComplexMatrix::<f64>::pauli_z()).unwrap();
        assert_eq!(es.eigenvalues, vec![-1.0, 1.0]);
    }

    #[test]
    fn diagonal_system_hamiltonian() {
        let es = eig_hermitian(&hs(0.1, 0.0)).unwrap();
        assert!((es.eigenvalues[0] + 0.05).abs() < 1e-15);
        assert!((es.eigenvalues[1] - 0.05).abs() < 1e-15);
    }

    #[test]
    fn two_level_closed_form() {
        let es = eig_hermitian(&hs(0.1, 0.1)).unwrap();
        let half_gap = 0.5 * (0.1f64 * 0.1 + 0.1 * 0.1).sqrt();
        assert!((es.eigenvalues[0] + half_gap).abs() < 1e-15);
        assert!((es.eigenvalues[1] - half_gap).abs() < 1e-15);
        assert!((half_gap - 0.0707107).abs() < 1e-7);
    }

    #[test]
    fn phase_convention_is_real_positive_pivot() {
        let h = ComplexMatrix::from_row_major(
            2,
            2,
            vec![cx(0.3, 0.0), cx(0.1, -0.2), cx(0.1, 0.2), cx(-0.4, 0.0)],
        )
        .unwrap();
        let es = eig_hermitian(&h).unwrap();
        for mu in 0..2 {
            let col = es.eigenvectors.column(mu);
            let big = col.iter().fold(0.0f64, |m, z| m.max(z.norm()));
            let pivot = col.iter().find(|z| z.norm() >= big * (1.0 - 1e-12)).unwrap();
            assert!(pivot.im == 0.0 && pivot.re > 0.0);
        }
    }

    #[test]
    fn rejects_non_hermitian() {
        let h = ComplexMatrix::<f64>::from_real(2, 2, &[1.0, 2.0, 0.0, 1.0]).unwrap();
        let err = eig_hermitian(&h).unwrap_err();
        assert!(err.to_string().contains("hermitian"));
        let rect = ComplexMatrix::<f64>::zeros(2, 3);
        assert!(eig_hermitian(&rect).unwrap_err().to_string().contains("square"));
    }

    #[test]
    fn works_in_single_precision() {
        let h = ComplexMatrix::<f32>::from_real(2, 2, &[2.0, 1.0, 1.0, 2.0]).unwrap();
        let es = eig_hermitian(&h).unwrap();
        assert!((es.eigenvalues[0] - 1.0).abs() < 1e-6);
        assert!((es.eigenvalues[1] - 3.0).abs() < 1e-6);
    }

    fn hermitian_strategy() -> impl Strategy<Value = ComplexMatrix<f64>> {
        (1usize..=8).prop_flat_map(|n| {
            proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n * n).prop_map(move |raw| {
                let a = ComplexMatrix::from_fn(n, n, |i, j| cx(raw[i * n + j].0, raw[i * n + j].1));
                a.hermitian_part()
            })
        })
    }

    proptest! {
        #[test]
        fn reconstructs_random_hermitian(h in hermitian_strategy()) {
            let es = eig_hermitian(&h).unwrap();
            let n = h.rows();
            let rel = (&es.reconstruct() - &h).frobenius_norm() / h.frobenius_norm().max(1e-300);
            prop_assert!(rel <= 1e-10, "relative reconstruction error {rel:e}");
            let u = &es.eigenvectors;
            let gram = &u.adjoint().matmul(u) - &ComplexMatrix::identity(n);
            prop_assert!(gram.frobenius_norm() <= 1e-12);
            for w in es.eigenvalues.windows(2) {
                prop_assert!(w[0] <= w[1]);
            }
            let norm_h = h.frobenius_norm();
            for mu in 0..n {
                let v = u.column(mu);
                let hv = h.matvec(&v);
                let res: f64 = hv.iter().zip(&v)
                    .map(|(a, b)| (a - b * es.eigenvalues[mu]).norm_sqr()).sum::<f64>().sqrt();
                prop_assert!(res <= 1e-12 * norm_h.max(1.0));
            }
        }
    }
}
