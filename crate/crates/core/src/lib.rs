//! Steady states of the Redfield spin-boson model and exact gradients of
//! steady-state observables with respect to model parameters.
//!
//! The numerical core is generic over [`Real`] (`f32` or `f64`); the aliases
//! at the crate root fix the scalar to `f64`.

pub mod bath;
pub mod design;
pub mod error;
pub mod instrument;
pub mod numerics;
pub mod redfield;
pub mod sensitivity;
pub mod steady;

pub use bath::{half_fourier, spectral_density, BathParams, HalfFourier, HalfFourierOptions};
pub use design::{
    adam_step, loss, optimize, optimize_partial, softplus, softplus_inverse, AdamHyper, DesignOptions,
    Initialization, LossRecord, OptimizerState,
};
pub use error::{Error, Result};
pub use instrument::{CounterSnapshot, Counters};
pub use numerics::{ComplexMatrix, Real};
pub use redfield::{build_liouvillian, FreeMask, Liouvillian, LiouvillianOptions, ModelParams, Param};
pub use sensitivity::{
    finite_difference_gradient, implicit_gradient, implicit_gradient_adjoint_ode, implicit_gradient_direct,
    AdjointBackend, FdSteadyMethod, FiniteDifferenceOptions, GradientMethod, GradientReport, SensitivityOptions,
};
pub use steady::{
    integrate_to_steady, null_space_steady, solve_steady, solve_steady_auto, DensityMatrix, SteadyMethod, SteadyOptions,
    SteadyStateResult,
};

pub type Matrix = ComplexMatrix<f64>;
pub type Density = DensityMatrix<f64>;
pub type Model = ModelParams<f64>;
pub type Bath = BathParams<f64>;
pub type Generator = Liouvillian<f64>;
pub type Report = GradientReport<f64>;
pub type SteadyState = SteadyStateResult<f64>;
