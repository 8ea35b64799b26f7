//! Phase-field topology optimization for quasistatic elastoplastic bodies
//! with linear kinematic hardening.

pub mod dissipation;
pub mod evolution;
pub mod fem;
pub mod fixtures;
pub mod lab;
pub mod local_return;
pub mod material;
pub mod objective;
pub mod optimizer;
pub mod scalar;
pub mod tensor;

pub use dissipation::Gamma;
pub use material::{Coefficient, Endpoints, MaterialLaw, PointLaw};
pub use scalar::Scalar;
pub use tensor::{DevTensor, SymTensor};

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub type Sym = SymTensor<f64>;
pub type Dev = DevTensor<f64>;
pub type Law = MaterialLaw<f64>;
pub type Space = fem::FemSpace<f64>;
pub type Model = evolution::Problem<f64>;
pub type Trajectory = evolution::EvolutionState<f64>;
pub type Adjoint = objective::AdjointState<f64>;
pub type Breakdown = objective::ObjectiveBreakdown<f64>;
