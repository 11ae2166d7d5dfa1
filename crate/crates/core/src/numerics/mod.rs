//! Dense complex linear algebra, quadrature and ODE kernels.

pub mod eigen;
pub mod matrix;
pub mod ode;
pub mod quad;
pub mod real;
pub mod schur;
pub mod svd;

pub use eigen::{eig_hermitian, EigenSystem};
pub use matrix::{embed_real, unembed_real, ComplexMatrix};
pub use ode::{integrate_to_stationary, OdeOptions, Stationary};
pub use quad::{quad_adaptive, quad_adaptive_budget, Quadrature};
pub use real::{norm2, norm2_real, Cx, Real};
pub use schur::eigenvalues;
pub use svd::{solve_min_norm, svd, MinNormSolution, Svd};
