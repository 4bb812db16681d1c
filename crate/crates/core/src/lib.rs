//! Monte Carlo quantum-trajectory simulator and analytic calculator for the
//! preparation of spin-squeezed atomic states by optical phase-shift
//! measurement, including the degrading effect of photon scattering in
//! three cloud regimes (sub-wavelength, large dilute, large dense).

pub mod analytics;
pub mod commands;
pub mod config;
pub mod dense;
pub mod error;
pub mod optics;
pub mod report;
pub mod spin;
pub mod trajectory;

pub use error::{Error, Result};
