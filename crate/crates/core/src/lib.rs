//! Numerical toolkit for preparing quantum states with shaped controls:
//! Crank-Nicolson propagation of the 1D Schrodinger equation with transparent
//! boundaries, frequency-domain control algebra, finite-level Magnus
//! propagation, stationary-state solvers, and gradient-based pulse search.
//!
//! Units: the spatial equation is `i dpsi/dt = -psi_xx + V psi`, with the
//! kinetic prefactor absorbed (hbar = 2m = 1) except where a family declares
//! its own prefactor (charge qubits).

pub mod control;
pub mod eigen;
pub mod error;
pub mod grid;
pub mod magnus;
pub mod optimizer;
pub mod potential;
pub mod propagator;
pub mod spectral;
pub mod target;
pub mod tbc;

pub use error::{CoreError, Result};
pub use grid::{fidelity, Grid, Wavefunction};

pub type C64 = num_complex::Complex64;

/// Crate version string, embedded in emitted artifacts.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
