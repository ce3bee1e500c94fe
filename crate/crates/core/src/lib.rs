//! Numerical laboratory for the random quantum kicked rotor and its
//! time- and kick-symmetrized Floquet variants.
//!
//! The crate covers stroboscopic split-step propagation, disorder ensembles
//! with reproducible counter-based seeding, disorder-averaged densities and
//! return amplitudes, spectral functions and classical backgrounds (numeric
//! and closed-form), and exact diagonalization of small Floquet matrices.

pub mod analytic;
pub mod bessel;
pub mod eigen;
pub mod ensemble;
pub mod error;
pub mod floquet;
pub mod lattice;
pub mod observables;
pub mod params;

pub use error::{Error, Result};
pub use floquet::{DisorderRealization, FloquetKernel, FloquetVariant, UnitaryMatrix};
pub use lattice::{build_lattice, Basis, Lattice, StateVector};
pub use params::{Model, PhaseMode, SimulationParams};

pub use num_complex::Complex64;
