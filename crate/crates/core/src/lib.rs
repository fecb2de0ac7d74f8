//! Pilot-wave (de Broglie–Bohm) trajectories for two entangled particles.
//!
//! Two closed-form models are provided: a 1D superposition of counter-
//! propagating relative plane waves ([`planewave`]) and a 3D two-slit
//! superposition of spherical waves ([`spherical`]). Both expose their
//! wavefunction, phase and guidance velocities through [`model::GuidanceModel`],
//! so the integrator, the ensemble sampler and the distribution checks in
//! [`ensemble`] work with either.

pub mod checks;
pub mod config;
pub mod ensemble;
pub mod error;
pub mod model;
pub mod numerics;
pub mod planewave;
pub mod run;
pub mod spherical;

pub use error::{Error, Result};
