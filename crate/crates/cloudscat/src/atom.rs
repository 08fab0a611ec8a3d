//! Two-level atom model.

use num_complex::Complex64;

use crate::units::{GAMMA0, UnitSystem};

/// A two-level atom with radiative linewidth `GAMMA0` and an optional
/// non-radiative decay channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtomModel {
    /// Non-radiative linewidth in units of `GAMMA0`. Zero for a closed
    /// (lossless) transition; the optical theorem for a single atom,
    /// `Im(alpha/alpha0) = |alpha/alpha0|^2`, holds exactly only then.
    pub gamma_nr: f64,
}

impl AtomModel {
    pub fn lossless() -> Self {
        AtomModel { gamma_nr: 0.0 }
    }

    /// Resonant dipole polarizability
    ///
    /// `alpha(w) = -(alpha0*Gamma0/2) / (w - w_a + i*(Gamma0 + Gamma_nr)/2)`
    ///
    /// with `detuning = w - w_a` in units of `GAMMA0`. On resonance and
    /// without losses this is `i*alpha0`.
    pub fn polarizability(&self, detuning: f64, units: &UnitSystem) -> Complex64 {
        let alpha0 = units.alpha0();
        let num = Complex64::new(-alpha0 * GAMMA0 / 2.0, 0.0);
        let den = Complex64::new(detuning, (GAMMA0 + self.gamma_nr) / 2.0);
        num / den
    }
}
