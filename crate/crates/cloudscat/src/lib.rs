//! Coupled-dipole Monte Carlo simulator for subwavelength atomic clouds.

pub mod atom;
pub mod bessel;
pub mod cloud;
pub mod ensemble;
pub mod error;
pub mod excitation;
pub mod greens;
pub mod multipole;
pub mod quadrature;
pub mod scan;
pub mod solver;
pub mod units;

pub use error::{Error, Result};
