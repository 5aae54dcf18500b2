//! Recursive identification of linear regression systems observed through
//! multi-threshold quantizing sensors.
//!
//! The crate provides the weighted Quasi-Newton projection estimator
//! ([`estimator::Method::Wqnp`]) with constant weights, its information-based
//! variant with adaptive weights ([`estimator::Method::Ibid`]), the
//! Cramér-Rao lower bound for quantized Gaussian observations ([`crlb`]) and
//! a seeded Monte-Carlo harness ([`harness`]) that measures convergence rate
//! and efficiency against that bound.
//!
//! Every numerical type is generic over a [`Scalar`] (`f32` or `f64`). The
//! aliases at the crate root fix the scalar to `f64`, which is what the
//! harness and command-line tool use.

// `!(a < b)` is used on purpose so that NaN inputs fail validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod crlb;
pub mod error;
pub mod estimator;
pub mod harness;
pub mod model;
pub mod numerics;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Vector = numerics::Vector<f64>;
pub type SymMatrix = numerics::SymMatrix<f64>;
pub type QuantizerSpec = model::QuantizerSpec<f64>;
pub type GaussianNoise = model::GaussianNoise<f64>;
pub type BoxDomain = model::BoxDomain<f64>;
pub type TrueSystem = model::TrueSystem<f64>;
pub type ObservationModel = estimator::ObservationModel<f64>;
pub type EstimatorState = estimator::EstimatorState<f64>;
pub type CrlbAccumulator = crlb::CrlbAccumulator<f64>;

pub type Vector32 = numerics::Vector<f32>;
pub type SymMatrix32 = numerics::SymMatrix<f32>;
pub type QuantizerSpec32 = model::QuantizerSpec<f32>;
pub type GaussianNoise32 = model::GaussianNoise<f32>;
pub type BoxDomain32 = model::BoxDomain<f32>;
pub type EstimatorState32 = estimator::EstimatorState<f32>;
