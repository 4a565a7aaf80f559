//! Structured eigenvalue optimization.
//!
//! Computes structured pseudospectral abscissas/radii and structured
//! distances to instability or singularity by minimizing an eigenvalue
//! functional over unit-Frobenius-norm perturbations constrained to a linear
//! structure space. The workhorse is a rank-1 projected gradient flow
//! integrated by a stationary-point-preserving splitting scheme, wrapped in
//! a Newton/bisection outer iteration for nearness problems.
//!
//! All numerics are generic over the real scalar type through
//! [`scalar::Real`] (`f32` or `f64`); the aliases below fix the common
//! `f64` instantiation.

pub mod error;
pub mod flow;
pub mod io;
pub mod linalg;
pub mod objective;
pub mod outer;
pub mod rank1;
pub mod scalar;
pub mod solver;
pub mod structure;

pub use error::{Error, Result};
pub use scalar::Real;

/// Complex scalar over f64.
pub type C64 = scalar::C<f64>;
pub type Matrix64 = linalg::ComplexMatrix<f64>;
pub type Dense64 = linalg::Dense<f64>;
pub type Sparse64 = linalg::Sparse<f64>;
pub type Eigentriplet64 = linalg::Eigentriplet<f64>;
pub type EigEngine64 = linalg::EigEngine<f64>;
pub type TargetSelector64 = linalg::TargetSelector<f64>;
pub type StructureSpace64 = structure::StructureSpace<f64>;
pub type Objective64 = objective::Objective<f64>;
pub type SolverConfig64 = solver::SolverConfig<f64>;
pub type Rank1Perturbation64 = rank1::Rank1Perturbation<f64>;
pub type InnerResult64 = rank1::InnerResult<f64>;
pub type OuterConfig64 = outer::OuterConfig<f64>;

/// Single-precision variants.
pub type C32 = scalar::C<f32>;
pub type Matrix32 = linalg::ComplexMatrix<f32>;
pub type StructureSpace32 = structure::StructureSpace<f32>;
