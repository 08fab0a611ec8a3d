//! Free-space dyadic Green's tensor coupling point dipoles.
//!
//! With `zeta = k*|r_i - r_j|` and `n` the unit separation vector,
//!
//! `G(r_i, r_j) = 3/(2*alpha0*eps0) * e^{i zeta} * [ g1(zeta) I + g2(zeta) n(x)n ]`
//!
//! `g1(z) = 1/z - 1/z^3 + i/z^2`, `g2(z) = -1/z + 3/z^3 - 3i/z^2`.
//!
//! `G p_j` is the electric field at `r_i` radiated by dipole `p_j`
//! (`e^{-i w t}` convention). The tensor is symmetric and unchanged under
//! exchange of the two points. Its regular limit at coincidence,
//! `Im G(r, r) = k^3/(6*pi*eps0) * I`, is what the pairwise scattering
//! oracle uses for the self term.

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::units::EPS0;

/// Below this separation (in units of the wavelength scale `2*pi/k`) the
/// pair is treated as numerically coincident.
pub const SINGULAR_SEPARATION: f64 = 1e-12;

/// Dyadic Green's tensor between two distinct points.
pub fn greens_tensor(ri: &Vector3<f64>, rj: &Vector3<f64>, k: f64) -> Result<Matrix3<Complex64>> {
    let d = ri - rj;
    let r = d.norm();
    if r < SINGULAR_SEPARATION * (2.0 * std::f64::consts::PI / k) {
        return Err(Error::Degenerate(format!(
            "coincident dipoles: separation {r:.3e} below the singular floor"
        )));
    }
    let n = d / r;
    let zeta = k * r;
    let inv = 1.0 / zeta;
    let inv2 = inv * inv;
    let inv3 = inv2 * inv;
    let g1 = Complex64::new(inv - inv3, inv2);
    let g2 = Complex64::new(-inv + 3.0 * inv3, -3.0 * inv2);
    // 3/(2*alpha0*eps0) = k^3/(4*pi*eps0)
    let pref = Complex64::from_polar(k.powi(3) / (4.0 * std::f64::consts::PI * EPS0), zeta);
    let mut g = Matrix3::from_diagonal_element(pref * g1);
    let pg2 = pref * g2;
    for a in 0..3 {
        for b in 0..3 {
            g[(a, b)] += pg2 * (n[a] * n[b]);
        }
    }
    Ok(g)
}

/// `Im G` at coincidence: `k^3/(6*pi*eps0) * I`. Self term of the pairwise
/// radiated-power bilinear form.
pub fn greens_imag_self(k: f64) -> Matrix3<f64> {
    Matrix3::from_diagonal_element(k.powi(3) / (6.0 * std::f64::consts::PI * EPS0))
}
