//! Cost-benefit analysis of cyber-defense spending on grid digital
//! functionalities (GDFs).
//!
//! For a GDF `x` and defensive spend `s`,
//!
//! ```text
//! ENBCDS(s) = Ben - DirCosts - sum_k P(x_k) Noncyb(x_k) - f(s)
//! f(s)      = s + sum_j P_s(x_j) L_j
//! ```
//!
//! where `P_s(x_j)` is the success probability of attack `j` at spend `s`.
//! The crate evaluates these curves, finds the best spend per GDF, splits a
//! shared budget across a portfolio, propagates parameter uncertainty by
//! Monte Carlo, and reads and writes scenario files, tables and plots.
//!
//! Computations are generic over [`Scalar`] (`f32` or `f64`); the aliases
//! at the crate root fix the precision to `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod enbcds;
pub mod error;
pub mod io;
pub mod model;
pub mod optimize;
mod scalar;
pub mod scenarios;
pub mod sensitivity;

pub use enbcds::CostMode;
pub use error::EvalError;
pub use scalar::Scalar;

pub type Gdf = model::Gdf<f64>;
pub type AttackType = model::AttackType<f64>;
pub type AdverseEvent = model::AdverseEvent<f64>;
pub type BreachModel = model::BreachModel<f64>;
pub type DependencyEdge = model::DependencyEdge<f64>;
pub type Portfolio = model::Portfolio<f64>;
pub type ValidPortfolio = model::ValidPortfolio<f64>;
pub type SpendVector = enbcds::SpendVector<f64>;
pub type EnbcdsCurve = enbcds::EnbcdsCurve<f64>;
pub type AllocationResult = optimize::AllocationResult<f64>;
pub type SpendOptimum = optimize::SpendOptimum<f64>;

pub type Gdf32 = model::Gdf<f32>;
pub type Portfolio32 = model::Portfolio<f32>;
pub type ValidPortfolio32 = model::ValidPortfolio<f32>;
