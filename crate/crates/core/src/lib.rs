//! Numerical Lyapunov-Perron machinery for semilinear stochastic evolution
//! equations `du = Au dt + F(u) dt + u ∘ dW` whose linear part has a
//! non-densely defined generator.
//!
//! The crate builds, at desk scale, the objects that the classical theory
//! produces abstractly:
//!
//! * two-sided Brownian paths, the Wiener shift and the stationary
//!   Ornstein-Uhlenbeck process used to conjugate the noise away
//!   ([`noise`]),
//! * linear operator backends with exponential trichotomy, resolvents and
//!   Yosida approximations ([`model`]),
//! * the integrated semigroup and the Stieltjes convolution realized by a
//!   Yosida ladder ([`semigroup`]),
//! * the random linear flow and a mild-solution integrator ([`flow`]),
//! * every spectral-gap inequality with its explicit constants ([`gap`]),
//! * fixed points of the Lyapunov-Perron operators: graphs of
//!   center-unstable manifolds, leaves of center-stable foliations, their
//!   first derivatives and the leaf/manifold intersection
//!   ([`lyapunov_perron`]),
//! * quantitative verification of invariance, leaf convergence and
//!   derivative consistency ([`verify`]).
//!
//! The crate is `no_std`-compatible (requires `alloc`); disable the default
//! `std` feature for embedded or sandboxed targets.  All operations are
//! pure and deterministic given their inputs; nothing here performs IO.

#![cfg_attr(not(feature = "std"), no_std)]
#![deny(unsafe_code)]

extern crate alloc;

pub mod error;
pub mod flow;
pub mod gap;
pub mod lyapunov_perron;
mod math;
pub mod model;
pub mod noise;
pub mod semigroup;
pub mod verify;

pub use error::{Error, Result};

/// Euclidean vector helpers shared across modules.
pub(crate) mod linalg {
    use alloc::vec::Vec;

    pub fn norm(x: &[f64]) -> f64 {
        crate::math::sqrt(x.iter().map(|v| v * v).sum())
    }

    pub fn dot(x: &[f64], y: &[f64]) -> f64 {
        x.iter().zip(y).map(|(a, b)| a * b).sum()
    }

    pub fn scale(x: &[f64], c: f64) -> Vec<f64> {
        x.iter().map(|v| v * c).collect()
    }

    pub fn add(x: &[f64], y: &[f64]) -> Vec<f64> {
        x.iter().zip(y).map(|(a, b)| a + b).collect()
    }

    pub fn sub(x: &[f64], y: &[f64]) -> Vec<f64> {
        x.iter().zip(y).map(|(a, b)| a - b).collect()
    }

    pub fn dist(x: &[f64], y: &[f64]) -> f64 {
        crate::math::sqrt(x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum())
    }
}
