//! Finite-dimensional quantum measurement toolkit: state vectors and Hermitian
//! eigendecomposition, measurements with Born-rule prediction and collapse,
//! executable incompatibility demonstrations, and a Monte-Carlo simulator of
//! sequential measurements.

pub mod error;
pub mod lab;
pub mod linalg;
pub mod measurement;
pub mod random;
pub mod simulator;
pub mod verify;

pub use error::{Error, Result};
pub use linalg::{ComplexMatrix, StateVector};
pub use measurement::{Measurement, Outcome, OutcomeDistribution};
pub use num_complex::Complex64;
pub use random::RandomStream;
