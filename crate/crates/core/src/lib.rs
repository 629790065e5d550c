//! Routing core for double-RIS assisted multihop device-to-device networks.
//!
//! The crate is `no_std` (it needs `alloc`) and holds every piece of the
//! routing procedure that is pure computation: node geometry and directional
//! scans, ON/OFF traffic chains and their idle/busy estimators, RIS cascade
//! channels and the finite-blocklength rate, adaptive M-QAM link budgets,
//! per-hop delay budgets, the router itself, and route metrics.
//!
//! IO, configuration files, experiment sweeps and the command line live in
//! the companion `drams` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod channel;
pub mod delaymodel;
mod error;
pub mod linkbudget;
pub mod metrics;
pub mod rng;
pub mod router;
pub mod topology;
pub mod traffic;

pub use error::{Error, Result};

/// Converts decibels to a linear power ratio.
pub fn db_to_linear(db: f64) -> f64 {
    libm::pow(10.0, db / 10.0)
}

/// Converts a linear power ratio to decibels.
pub fn linear_to_db(x: f64) -> f64 {
    10.0 * libm::log10(x)
}

/// Converts dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    db_to_linear(dbm - 30.0)
}
