//! Random cloud geometry.
//!
//! Atoms are distributed uniformly inside a ball of radius `R` centered at
//! the origin. Sampling is rejection-free per atom (inverse CDF in the
//! radius, uniform direction), so one candidate configuration always
//! consumes exactly `3 * n_atoms` uniform draws; reproducibility across
//! worker counts depends on that fixed consumption. Configurations with a
//! pair closer than `min_separation` are thrown away and redrawn whole.

use nalgebra::Vector3;
use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CloudSpec {
    pub n_atoms: usize,
    /// Ball radius in units of the resonance wavelength.
    pub radius: f64,
    /// Hard minimum pair distance; keeps the coupled-dipole system away
    /// from the contact singularity of the Green's tensor.
    pub min_separation: f64,
}

impl Default for CloudSpec {
    fn default() -> Self {
        CloudSpec {
            n_atoms: 25,
            radius: 0.2,
            min_separation: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CloudRealization {
    pub positions: Vec<Vector3<f64>>,
}

impl CloudRealization {
    /// A single atom pinned at the cloud center. Reference geometry for
    /// calibration tests and the validate command.
    pub fn single_at_origin() -> Self {
        CloudRealization {
            positions: vec![Vector3::zeros()],
        }
    }
}

/// Draw one candidate configuration: `r = R * u^{1/3}` with a uniform
/// direction (`cos theta` and azimuth uniform). Exactly three draws per
/// atom, no rejection.
pub fn draw_positions<R: Rng>(spec: &CloudSpec, rng: &mut R) -> Vec<Vector3<f64>> {
    (0..spec.n_atoms)
        .map(|_| {
            let r = spec.radius * rng.gen::<f64>().cbrt();
            let cos_t = 2.0 * rng.gen::<f64>() - 1.0;
            let sin_t = (1.0 - cos_t * cos_t).max(0.0).sqrt();
            let az = 2.0 * std::f64::consts::PI * rng.gen::<f64>();
            Vector3::new(r * sin_t * az.cos(), r * sin_t * az.sin(), r * cos_t)
        })
        .collect()
}

pub fn min_separation_ok(positions: &[Vector3<f64>], min_separation: f64) -> bool {
    for i in 0..positions.len() {
        for j in (i + 1)..positions.len() {
            if (positions[i] - positions[j]).norm() < min_separation {
                return false;
            }
        }
    }
    true
}

/// Sample one valid realization, resampling whole configurations until the
/// minimum pair distance holds. Returns the realization and the number of
/// rejected configurations. Fails once more than `budget` configurations
/// were rejected.
pub fn sample_realization<R: Rng>(
    spec: &CloudSpec,
    rng: &mut R,
    budget: u32,
) -> Result<(CloudRealization, u32)> {
    let mut rejected = 0u32;
    loop {
        let positions = draw_positions(spec, rng);
        if min_separation_ok(&positions, spec.min_separation) {
            return Ok((CloudRealization { positions }, rejected));
        }
        rejected += 1;
        if rejected > budget {
            return Err(Error::Degenerate(format!(
                "gave up sampling a cloud after {rejected} rejected configurations \
                 (n_atoms = {}, radius = {}, min_separation = {})",
                spec.n_atoms, spec.radius, spec.min_separation
            )));
        }
    }
}
