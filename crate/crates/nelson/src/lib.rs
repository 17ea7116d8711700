//! Desk-scale numerics for a variable-coefficient particle–boson model:
//! elliptic operator assembly on boxes, functional calculus for the
//! dispersion ω = h^{1/2}, truncated Fock space, Hamiltonian assembly with
//! infrared cutoffs, ground-state solvers, and verification of heat-kernel
//! and fractional-power operator bounds.

pub mod config;
pub mod error;
pub mod fock;
pub mod eigen;
pub mod grid;
pub mod model;
pub mod report;
pub mod run;
pub mod sparse;
pub mod spectral;
pub mod verify;

pub use error::{NelsonError, Result};
