//! Low-rank tensor models for Markov chains on multi-dimensional state spaces.
//!
//! The joint law of consecutive states is modeled as a rank-`F` canonical
//! polyadic decomposition whose weights and factor columns are probability
//! vectors. The crate builds such chains, simulates trajectories, estimates
//! the decomposition from data with a simplex-constrained ADMM solver, and
//! runs sample-size sweeps against spectral and empirical baselines.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases at
//! the crate root fix the scalar to `f64`.

pub mod error;
pub mod estimation;
pub mod harness;
pub mod markov;
pub mod scalar;
pub mod seeds;
pub mod tensor;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Tensor = tensor::DenseTensor<f64>;
pub type Model = tensor::CpdModel<f64>;
pub type Chain = markov::TransitionModel<f64>;
pub type Admm = estimation::AdmmState<f64>;

pub type Tensor32 = tensor::DenseTensor<f32>;
pub type Model32 = tensor::CpdModel<f32>;
pub type Chain32 = markov::TransitionModel<f32>;
