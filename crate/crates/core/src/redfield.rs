//! Spin-boson Hamiltonian, Redfield rate tensors and the Liouvillian.
//!
//! Indices follow the energy eigenbasis of `H_S`. The generator acts on
//! column-stacked density matrices: entry `ρ_{μν}` sits at `μ + d·ν`.

use std::fmt;
use std::str::FromStr;

use crate::bath::{BathParams, HalfFourierCache, HalfFourierOptions};
use crate::error::{invalid, Error, Result};
use crate::numerics::eigen::{eig_hermitian, EigenSystem};
use crate::numerics::matrix::ComplexMatrix;
use crate::numerics::real::{cx, re, Cx, Real};
use crate::steady::DensityMatrix;

/// Model parameter a gradient can be taken with respect to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Param {
    Epsilon,
    Delta,
    Beta,
    Eta,
    OmegaC,
    SExponent,
}

impl Param {
    pub const ALL: [Param; 6] = [
        Param::Epsilon,
        Param::Delta,
        Param::Beta,
        Param::Eta,
        Param::OmegaC,
        Param::SExponent,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Param::Epsilon => "epsilon",
            Param::Delta => "delta",
            Param::Beta => "beta",
            Param::Eta => "eta",
            Param::OmegaC => "omega_c",
            Param::SExponent => "s_exponent",
        }
    }

    fn bit(self) -> u8 {
        1 << (self as u8)
    }
}

impl fmt::Display for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Param {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Param::ALL
            .into_iter()
            .find(|p| p.name() == s.trim())
            .ok_or_else(|| Error::UnknownParameter(s.trim().to_string()))
    }
}

/// Set of parameters marked free for differentiation or optimization.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct FreeMask(u8);

impl FreeMask {
    pub fn none() -> Self {
        Self(0)
    }

    pub fn all() -> Self {
        Param::ALL.into_iter().collect()
    }

    pub fn with(mut self, p: Param) -> Self {
        self.0 |= p.bit();
        self
    }

    pub fn contains(self, p: Param) -> bool {
        self.0 & p.bit() != 0
    }

    pub fn set(&mut self, p: Param, free: bool) {
        if free {
            self.0 |= p.bit();
        } else {
            self.0 &= !p.bit();
        }
    }

    /// Free parameters in canonical order.
    pub fn params(self) -> Vec<Param> {
        Param::ALL.into_iter().filter(|&p| self.contains(p)).collect()
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }
}

impl FromIterator<Param> for FreeMask {
    fn from_iter<I: IntoIterator<Item = Param>>(iter: I) -> Self {
        iter.into_iter().fold(FreeMask::none(), FreeMask::with)
    }
}

/// Full parameter vector: `H_S = (ε/2)σz + (Δ/2)σx` plus the bath.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelParams<T> {
    pub epsilon: T,
    pub delta: T,
    pub bath: BathParams<T>,
    pub free: FreeMask,
}

impl<T: Real> ModelParams<T> {
    pub fn new(epsilon: T, delta: T, bath: BathParams<T>) -> Result<Self> {
        let p = Self {
            epsilon,
            delta,
            bath,
            free: FreeMask::none(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_free(mut self, free: FreeMask) -> Self {
        self.free = free;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !self.epsilon.is_finite() || !self.delta.is_finite() {
            return Err(invalid("epsilon and delta must be finite"));
        }
        self.bath.validate()
    }

    pub fn get(&self, p: Param) -> T {
        match p {
            Param::Epsilon => self.epsilon,
            Param::Delta => self.delta,
            Param::Beta => self.bath.beta,
            Param::Eta => self.bath.eta,
            Param::OmegaC => self.bath.omega_c,
            Param::SExponent => self.bath.s_exponent,
        }
    }

    /// Copy with one parameter replaced; fails if the result leaves the domain.
    pub fn with(&self, p: Param, value: T) -> Result<Self> {
        let mut out = *self;
        match p {
            Param::Epsilon => out.epsilon = value,
            Param::Delta => out.delta = value,
            Param::Beta => out.bath.beta = value,
            Param::Eta => out.bath.eta = value,
            Param::OmegaC => out.bath.omega_c = value,
            Param::SExponent => out.bath.s_exponent = value,
        }
        out.validate()?;
        Ok(out)
    }
}

/// `H_S = [[ε/2, Δ/2], [Δ/2, −ε/2]]`.
pub fn build_hamiltonian<T: Real>(p: &ModelParams<T>) -> ComplexMatrix<T> {
    let half = T::lit(0.5);
    let (e, d) = (p.epsilon * half, p.delta * half);
    ComplexMatrix::from_real(2, 2, &[e, d, d, -e]).expect("2x2")
}

/// Matrix elements `⟨μ|σz|ν⟩` in the energy eigenbasis.
pub fn coupling_in_eigenbasis<T: Real>(basis: &EigenSystem<T>) -> ComplexMatrix<T> {
    basis.to_eigenbasis(&ComplexMatrix::pauli_z())
}

/// Dense rank-4 complex tensor with extent `d` in every index.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor4<T> {
    dim: usize,
    data: Vec<Cx<T>>,
}

impl<T: Real> Tensor4<T> {
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize, usize, usize) -> Cx<T>) -> Self {
        let mut data = Vec::with_capacity(dim.pow(4));
        for a in 0..dim {
            for b in 0..dim {
                for c in 0..dim {
                    for e in 0..dim {
                        data.push(f(a, b, c, e));
                    }
                }
            }
        }
        Self { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize, c: usize, e: usize) -> Cx<T> {
        let d = self.dim;
        self.data[((a * d + b) * d + c) * d + e]
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, z| m.max(z.norm()))
    }
}

fn check_coupling<T: Real>(basis: &EigenSystem<T>, coupling: &ComplexMatrix<T>) -> Result<()> {
    if coupling.rows() != basis.dim() || !coupling.is_square() {
        return Err(Error::DimensionMismatch {
            expected: basis.dim(),
            found: coupling.rows(),
        });
    }
    Ok(())
}

fn gamma_plus_cached<T: Real>(
    basis: &EigenSystem<T>,
    coupling: &ComplexMatrix<T>,
    cache: &mut HalfFourierCache<T>,
) -> Result<Tensor4<T>> {
    check_coupling(basis, coupling)?;
    let d = basis.dim();
    let mut rates = vec![re(T::zero()); d * d];
    for mu in 0..d {
        for kappa in 0..d {
            rates[mu * d + kappa] = cache.get(basis.bohr(mu, kappa))?;
        }
    }
    Ok(Tensor4::from_fn(d, |l, n, m, k| {
        coupling[(l, n)] * coupling[(m, k)] * rates[m * d + k]
    }))
}

/// `Γ⁺_{λνμκ} = ⟨λ|σz|ν⟩⟨μ|σz|κ⟩ · C(ω_{μκ})`.
pub fn gamma_plus<T: Real>(
    basis: &EigenSystem<T>,
    coupling: &ComplexMatrix<T>,
    bath: &BathParams<T>,
    opts: &HalfFourierOptions<T>,
) -> Result<Tensor4<T>> {
    let mut cache = HalfFourierCache::new(*bath, *opts);
    gamma_plus_cached(basis, coupling, &mut cache)
}

/// `Γ⁻_{λνμκ} = ⟨λ|σz|ν⟩⟨μ|σz|κ⟩ · conj(C(ω_{νλ}))`, evaluated from its own
/// half-Fourier values rather than through [`gamma_minus_from_plus`].
pub fn gamma_minus<T: Real>(
    basis: &EigenSystem<T>,
    coupling: &ComplexMatrix<T>,
    bath: &BathParams<T>,
    opts: &HalfFourierOptions<T>,
) -> Result<Tensor4<T>> {
    check_coupling(basis, coupling)?;
    let mut cache = HalfFourierCache::new(*bath, *opts);
    let d = basis.dim();
    let mut rates = vec![re(T::zero()); d * d];
    for nu in 0..d {
        for lambda in 0..d {
            rates[nu * d + lambda] = cache.get(basis.bohr(nu, lambda))?.conj();
        }
    }
    Ok(Tensor4::from_fn(d, |l, n, m, k| {
        coupling[(l, n)] * coupling[(m, k)] * rates[n * d + l]
    }))
}

/// `Γ⁻_{λνμκ} = conj(Γ⁺_{κμνλ})`, valid for a Hermitian coupling operator.
pub fn gamma_minus_from_plus<T: Real>(plus: &Tensor4<T>) -> Tensor4<T> {
    Tensor4::from_fn(plus.dim(), |l, n, m, k| plus.get(k, m, n, l).conj())
}

/// How `Γ⁻` is obtained during a Liouvillian build.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum GammaMinusRoute {
    /// Conjugate-transpose of `Γ⁺`.
    #[default]
    Conjugate,
    /// Separate evaluation from the bath functions; kept for cross-checks.
    Independent,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LiouvillianOptions<T> {
    pub half_fourier: HalfFourierOptions<T>,
    pub gamma_minus: GammaMinusRoute,
}

impl<T: Real> Default for LiouvillianOptions<T> {
    fn default() -> Self {
        Self {
            half_fourier: HalfFourierOptions::default(),
            gamma_minus: GammaMinusRoute::Conjugate,
        }
    }
}

/// Redfield generator in the eigenbasis:
/// `L[(μ,ν),(κ,λ)] = −iω_{μν}δ_{μκ}δ_{νλ} + R_{μνκλ}` with
/// `R_{μνκλ} = Γ⁺_{λνμκ} + Γ⁻_{λνμκ} − δ_{νλ}Σ_α Γ⁺_{μαακ} − δ_{μκ}Σ_α Γ⁻_{λααν}`.
pub fn assemble_generator<T: Real>(
    basis: &EigenSystem<T>,
    plus: &Tensor4<T>,
    minus: &Tensor4<T>,
) -> ComplexMatrix<T> {
    let d = basis.dim();
    let zero = re(T::zero());
    // Σ_α Γ⁺_{μααk} and Σ_α Γ⁻_{λααν}
    let mut plus_trace = vec![zero; d * d];
    let mut minus_trace = vec![zero; d * d];
    for a in 0..d {
        for b in 0..d {
            for alpha in 0..d {
                plus_trace[a * d + b] = plus_trace[a * d + b] + plus.get(a, alpha, alpha, b);
                minus_trace[a * d + b] = minus_trace[a * d + b] + minus.get(a, alpha, alpha, b);
            }
        }
    }
    let mut l = ComplexMatrix::zeros(d * d, d * d);
    for mu in 0..d {
        for nu in 0..d {
            let row = mu + d * nu;
            for kappa in 0..d {
                for lambda in 0..d {
                    let col = kappa + d * lambda;
                    let mut r = plus.get(lambda, nu, mu, kappa) + minus.get(lambda, nu, mu, kappa);
                    if nu == lambda {
                        r = r - plus_trace[mu * d + kappa];
                    }
                    if mu == kappa {
                        r = r - minus_trace[lambda * d + nu];
                    }
                    if mu == kappa && nu == lambda {
                        r = r + cx(T::zero(), -basis.bohr(mu, nu));
                    }
                    l[(row, col)] = r;
                }
            }
        }
    }
    l
}

/// Built generator with the eigenbasis it was assembled in.
#[derive(Clone, Debug)]
pub struct Liouvillian<T> {
    params: ModelParams<T>,
    options: LiouvillianOptions<T>,
    basis: EigenSystem<T>,
    eigen_matrix: ComplexMatrix<T>,
    site_matrix: ComplexMatrix<T>,
}

impl<T: Real> Liouvillian<T> {
    pub fn params(&self) -> &ModelParams<T> {
        &self.params
    }

    /// Options the generator was built with; reused for perturbed rebuilds.
    pub fn options(&self) -> &LiouvillianOptions<T> {
        &self.options
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn basis(&self) -> &EigenSystem<T> {
        &self.basis
    }

    /// Bohr frequency table `ω_{μν}`.
    pub fn bohr_frequencies(&self) -> Vec<Vec<T>> {
        let d = self.dim();
        (0..d).map(|m| (0..d).map(|n| self.basis.bohr(m, n)).collect()).collect()
    }

    /// Generator acting on eigenbasis-vectorized density matrices.
    pub fn matrix(&self) -> &ComplexMatrix<T> {
        &self.eigen_matrix
    }

    /// The same generator acting on site-basis (σz basis) vectors.
    pub fn site_matrix(&self) -> &ComplexMatrix<T> {
        &self.site_matrix
    }

    /// `dρ/dt` for a site-basis density matrix, returned in the site basis.
    pub fn rhs(&self, rho: &DensityMatrix<T>) -> ComplexMatrix<T> {
        self.rhs_site(rho.matrix())
    }

    /// `dρ/dt` for any site-basis operator (no validation).
    pub fn rhs_site(&self, rho: &ComplexMatrix<T>) -> ComplexMatrix<T> {
        let v = self.site_matrix.matvec(&rho.vectorize());
        ComplexMatrix::unvectorize(self.dim(), &v).expect("square generator")
    }

    /// `dρ/dt` with both `ρ` and the result in the eigenbasis.
    pub fn rhs_eigen(&self, rho_eig: &ComplexMatrix<T>) -> Result<ComplexMatrix<T>> {
        if rho_eig.rows() != self.dim() || !rho_eig.is_square() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: rho_eig.rows(),
            });
        }
        let v = self.eigen_matrix.matvec(&rho_eig.vectorize());
        ComplexMatrix::unvectorize(self.dim(), &v)
    }
}

/// Superoperator for `X ↦ U X U†` on column-stacked vectors: `Ū ⊗ U`.
fn basis_change<T: Real>(u: &ComplexMatrix<T>) -> ComplexMatrix<T> {
    u.conj().kron(u)
}

/// Builds the Redfield Liouvillian of the spin-boson model.
pub fn build_liouvillian<T: Real>(
    p: &ModelParams<T>,
    opts: &LiouvillianOptions<T>,
) -> Result<Liouvillian<T>> {
    build_liouvillian_with_coupling(p, &ComplexMatrix::pauli_z(), opts)
}

/// As [`build_liouvillian`] with an arbitrary Hermitian site-basis coupling operator.
pub fn build_liouvillian_with_coupling<T: Real>(
    p: &ModelParams<T>,
    coupling_site: &ComplexMatrix<T>,
    opts: &LiouvillianOptions<T>,
) -> Result<Liouvillian<T>> {
    p.validate()?;
    let basis = eig_hermitian(&build_hamiltonian(p))?;
    coupling_site.ensure_hermitian(crate::numerics::eigen::hermitian_tolerance(coupling_site))?;
    let coupling = basis.to_eigenbasis(coupling_site);
    let mut cache = HalfFourierCache::new(p.bath, opts.half_fourier);
    let plus = gamma_plus_cached(&basis, &coupling, &mut cache)?;
    let minus = match opts.gamma_minus {
        GammaMinusRoute::Conjugate => gamma_minus_from_plus(&plus),
        GammaMinusRoute::Independent => gamma_minus(&basis, &coupling, &p.bath, &opts.half_fourier)?,
    };
    let eigen_matrix = assemble_generator(&basis, &plus, &minus);
    let s = basis_change(&basis.eigenvectors);
    let site_matrix = s.matmul(&eigen_matrix).matmul(&s.adjoint());
    Ok(Liouvillian {
        params: *p,
        options: *opts,
        basis,
        eigen_matrix,
        site_matrix,
    })
}
