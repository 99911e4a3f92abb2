//! Symmetric extensions of classical Dirichlet operators on truncated
//! symmetric Fock spaces over `ℝᵈ`.
//!
//! A log-concave product measure `μ` is discretized by its orthonormal
//! polynomials; the Fock side uses the occupation-number basis. On that
//! tensor basis the crate assembles the Dirichlet operator `H_μ`, the
//! operators `δ`, `δ*`, the extension `Δ_μ = δ*δ + δδ*` and its decomposition
//! into `H_μ ⊗ 1 + 1 ⊗ dΓ(R_μ) + A_μ`, transports everything to
//! `L₂(μ) ⊗ L₂(γ)` with the Segal map, and screens the hypotheses of the
//! essential self-adjointness criteria.
//!
//! All numerics are generic over [`Scalar`] (`f32` or `f64`); the aliases at
//! the crate root fix the scalar to `f64`.

pub mod basis;
pub mod diagnostics;
pub mod dirichlet;
pub mod error;
pub mod fock;
pub mod index;
pub mod measures;
pub mod operator;
pub mod poly;
pub mod quadrature;
pub mod sampler;
pub mod scalar;
pub mod segal;
pub mod space;

pub use error::{Error, Result};
pub use scalar::Scalar;
pub use space::Truncation;

pub type Measure = measures::Measure1D<f64>;
pub type Product = measures::ProductMeasure<f64>;
pub type Basis = basis::PolyBasis<f64>;
pub type Discretization = space::Discretization<f64>;
pub type Operator = operator::OperatorMatrix<f64>;
pub type GammaMuVector = fock::GammaMuVector<f64>;
pub type SegalMap = segal::SegalMap<f64>;
