//! Decomposition of fourth-order symmetric tensors `T = Σ λᵢ uᵢ⊗⁴` whose
//! components are unit vectors that need not be orthogonal.
//!
//! The crate is organised bottom-up:
//!
//! * [`tensor`] holds the component sets, the implicit signed rank-one sum
//!   representation used everywhere, and a dense oracle for small dimensions.
//! * [`geometry`] is calculus on the unit sphere for `f(w) = -T(w,w,w,w)/4`
//!   together with incoherence and RIP measurements.
//! * [`decompose`] is the tensor power method, its restart/deflation driver,
//!   restart planning and recovery matching.
//! * [`landscape`] is manifold gradient descent, critical point certification
//!   and the empirical checks of the landscape guarantees.
//!
//! All randomness flows through [`sampling::stream_rng`], so every result is a
//! pure function of its seed.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod decompose;
pub mod error;
pub mod geometry;
pub mod landscape;
pub mod report;
pub mod sampling;
pub mod selftest;
pub mod special;
pub mod tensor;

pub use error::{Result, TpmError};
pub use tensor::{ComponentSet, DenseTensor4, Rank1SumTensor, RankOneTerm};

/// Constant multiplying `κ √k τ³` in every reported proximity bound.
pub const NOISE_FLOOR_CONSTANT: f64 = 350.0;

/// `350 κ √k τ³`, the error level below which recovery is not guaranteed to improve.
pub fn noise_floor(k: usize, tau: f64, kappa: f64) -> f64 {
    NOISE_FLOOR_CONSTANT * kappa * (k as f64).sqrt() * tau.powi(3)
}

/// Smallest error bound ever reported. At τ = 0 the noise floor vanishes
/// while computed components still carry rounding error.
pub const NUMERICAL_FLOOR: f64 = 1e-8;

/// `max(350 κ √k τ³, 1e-8)`, the bound used by recovery and proximity checks.
pub fn recovery_bound(k: usize, tau: f64, kappa: f64) -> f64 {
    noise_floor(k, tau, kappa).max(NUMERICAL_FLOOR)
}
