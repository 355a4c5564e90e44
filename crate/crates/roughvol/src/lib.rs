//! File formats, kappa caches and the Monte Carlo experiment runner built on
//! [`roughvol_core`].

pub mod cache;
pub mod config;
mod error;
pub mod experiment;
pub mod formats;
pub mod svg;

pub use error::{Error, Result};
