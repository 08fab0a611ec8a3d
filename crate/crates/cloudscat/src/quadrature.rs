//! Gauss-Legendre quadrature and the spherical product grid used to
//! integrate far-field intensity over solid angle.
//!
//! The sphere grid pairs Gauss-Legendre nodes in cos(theta) with a
//! uniform periodic grid in the azimuth, so weights sum to 4*pi and the
//! rule is exact for spherical harmonics up to the grid order. Far-field
//! intensity of a quadrupole-truncated source is a low-order polynomial
//! on the sphere, which such grids integrate essentially exactly; the
//! residual against the pairwise bilinear form measures the source's
//! beyond-quadrupole content, not the quadrature.

use nalgebra::Vector3;

/// Gauss-Legendre nodes and weights on [-1, 1].
///
/// Newton iteration on P_n with the three-term recurrence; nodes are
/// symmetric and weights sum to 2. Accurate to ~1e-15 for n up to a few
/// hundred.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "quadrature order must be at least 1");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess for the i-th root (descending order).
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                let (p2, d2) = legendre_with_derivative(n, x);
                dp = d2;
                x -= p2 / d2;
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Product quadrature over the unit sphere: Gauss-Legendre in cos(theta),
/// uniform in azimuth. Returns (directions, solid-angle weights); the
/// weights sum to 4*pi.
pub fn sphere_product_grid(n_theta: usize, n_phi: usize) -> (Vec<Vector3<f64>>, Vec<f64>) {
    assert!(n_phi >= 1);
    let (ct, wt) = gauss_legendre(n_theta);
    let dphi = 2.0 * std::f64::consts::PI / n_phi as f64;
    let mut dirs = Vec::with_capacity(n_theta * n_phi);
    let mut weights = Vec::with_capacity(n_theta * n_phi);
    for (cos_t, w_t) in ct.iter().zip(&wt) {
        let sin_t = (1.0 - cos_t * cos_t).sqrt();
        for j in 0..n_phi {
            let phi = dphi * j as f64;
            dirs.push(Vector3::new(
                sin_t * phi.cos(),
                sin_t * phi.sin(),
                *cos_t,
            ));
            weights.push(w_t * dphi);
        }
    }
    (dirs, weights)
}
