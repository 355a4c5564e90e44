//! Estimation of the Hurst index `H` and the vol-of-vol `eta` of a rough
//! volatility model from high-frequency prices.
//!
//! The crate is `no_std` (it needs `alloc`). It contains:
//!
//! * exact fractional Brownian motion sampling ([`fbm`]),
//! * price simulators for the piecewise-constant and the continuous
//!   log-volatility models ([`market`]),
//! * polygamma functions and log-chi-square moments ([`special`]),
//! * pre-averaged detail coefficients and energy ladders ([`wavelet`]),
//! * the scaling constants and higher-order bias functions ([`kappa`]),
//! * level selection and the (iterated) estimators ([`estimators`]),
//! * log-log rate fitting ([`rate`]).

#![no_std]
#![deny(rust_2018_idioms)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod error;
pub mod estimators;
pub mod fbm;
mod fft;
pub mod isserlis;
pub mod kappa;
pub mod market;
pub mod quadrature;
pub mod rate;
pub mod special;
pub mod wavelet;

pub use error::{Error, Result};
pub use fbm::{FbmPath, HurstParam};
pub use market::{ModelKind, ModelParams, ParamBounds, PriceSeries};

/// Deterministic generator used by every stochastic routine.
pub type SimRng = rand_chacha::ChaCha8Rng;

/// Builds the simulation generator for a seed.
pub fn rng_from_seed(seed: u64) -> SimRng {
    use rand_core::SeedableRng;
    SimRng::seed_from_u64(seed)
}
