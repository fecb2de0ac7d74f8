//! Numerical kernel shared by the models: complex helpers, finite
//! differences, ODE integration, root finding, quadrature and the
//! one-sample statistics used for distribution checks.

pub mod diff;
pub mod ode;
pub mod phase;
pub mod quad;
pub mod roots;
pub mod stats;

pub use num_complex::Complex64;

/// Complex amplitude of a wavefunction.
pub type ComplexScalar = Complex64;

pub use diff::{default_step, finite_diff_gradient, finite_diff_gradient_auto, log_gradient_im};
pub use ode::{integrate_ode, IntegratorConfig, Method, Termination, Trajectory};
pub use phase::{unwrap_phase, wrap_angle};
pub use roots::{count_roots_scan, find_root_bracketed, RootScanReport};
