//! Natural-unit conventions shared by every module.
//!
//! The simulation works in units with `eps0 = c = Z0 = 1`, linewidth
//! `Gamma0 = 1` and resonance wavelength `lambda_a = 1`, so the wavenumber
//! is `k = 2*pi`. All geometric factors (Green's tensor, multipole kernels,
//! cross-section prefactors) use this fixed `k`; detuning enters the physics
//! only through the atomic polarizability. Time dependence is `e^{-i w t}`.

/// Vacuum permittivity in natural units.
pub const EPS0: f64 = 1.0;
/// Vacuum impedance in natural units.
pub const Z0: f64 = 1.0;
/// Speed of light in natural units.
pub const C0: f64 = 1.0;
/// Radiative linewidth in natural units.
pub const GAMMA0: f64 = 1.0;

/// Wavenumber and the constants derived from it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitSystem {
    /// Wavenumber used for every geometric factor.
    pub k: f64,
}

impl UnitSystem {
    /// Natural units: `lambda_a = 1`, hence `k = 2*pi`.
    pub fn natural() -> Self {
        UnitSystem {
            k: 2.0 * std::f64::consts::PI,
        }
    }

    pub fn wavelength(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.k
    }

    /// Dipole polarizability scale `alpha_0 = 6*pi/k^3`; on resonance a
    /// lossless two-level atom has `alpha = i*alpha_0`.
    pub fn alpha0(&self) -> f64 {
        6.0 * std::f64::consts::PI / self.k.powi(3)
    }

    /// Quadrupole polarizability scale `alpha_0' = 120*pi/k^5`.
    pub fn alpha0_prime(&self) -> f64 {
        120.0 * std::f64::consts::PI / self.k.powi(5)
    }

    /// Cross-section normalization `lambda^2/(2*pi)`. A single resonant
    /// atom scatters `3` in these units.
    pub fn cross_section_scale(&self) -> f64 {
        let lambda = self.wavelength();
        lambda * lambda / (2.0 * std::f64::consts::PI)
    }
}

impl Default for UnitSystem {
    fn default() -> Self {
        Self::natural()
    }
}
