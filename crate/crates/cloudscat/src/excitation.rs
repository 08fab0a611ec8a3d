//! Incident field configurations.
//!
//! Three monochromatic drives, all with wavenumber `k`:
//!
//! * `PlaneWave`: x-polarized, propagating along +z.
//! * `FourWaveTe`: four plane waves in the x-z plane with the electric
//!   field along y (TE). Wavevectors `k1 = -k2 = k(sin psi, 0, cos psi)`,
//!   `k3 = -k4 = k(sin psi, 0, -cos psi)`; relative phases
//!   `phi1 = -phi2 = phi`, `phi3 = phi4 = 0`; each beam carries `E0/4`.
//! * `FourWaveTm`: the dual configuration with the magnetic field along y.
//!
//! The standing-wave phase `phi` moves the cloud between field extrema: at
//! `psi = pi/4` the TE drive at `phi = 0` couples only to the electric
//! dipole and at `phi = pi` only to the magnetic quadrupole, while TM
//! selects the magnetic dipole (`phi = 0`) or electric quadrupole
//! (`phi = pi`).
//!
//! All evaluations (fields and symmetrized gradients) are exact analytic
//! sums over the constituent beams.

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;

use crate::units::Z0;

/// One plane-wave component: `E(r) = amp * pol * e^{i k dir.r}`.
#[derive(Debug, Clone, Copy)]
pub struct Beam {
    /// Unit propagation direction.
    pub dir: Vector3<f64>,
    /// Unit polarization, perpendicular to `dir`.
    pub pol: Vector3<f64>,
    /// Complex amplitude including the beam phase.
    pub amp: Complex64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExcitationField {
    PlaneWave {
        e0: f64,
    },
    FourWaveTe {
        e0: f64,
        /// Standing-wave phase of the first beam pair.
        phi: f64,
        /// Beam half-opening angle from the z axis.
        psi: f64,
    },
    FourWaveTm {
        e0: f64,
        phi: f64,
        psi: f64,
    },
}

/// Incident-field data entering the extinction overlap: fields and
/// symmetrized gradients evaluated at one point.
#[derive(Debug, Clone, Copy)]
pub struct FieldDescriptors {
    pub e: Vector3<Complex64>,
    pub h: Vector3<Complex64>,
    /// `(grad E + E grad)_{mu nu} = dE_nu/dr_mu + dE_mu/dr_nu`
    pub grad_e_sym: Matrix3<Complex64>,
    pub grad_h_sym: Matrix3<Complex64>,
}

impl ExcitationField {
    pub fn e0(&self) -> f64 {
        match *self {
            ExcitationField::PlaneWave { e0 } => e0,
            ExcitationField::FourWaveTe { e0, .. } => e0,
            ExcitationField::FourWaveTm { e0, .. } => e0,
        }
    }

    /// The constituent beams (one or four).
    pub fn beams(&self) -> Vec<Beam> {
        match *self {
            ExcitationField::PlaneWave { e0 } => vec![Beam {
                dir: Vector3::z(),
                pol: Vector3::x(),
                amp: Complex64::new(e0, 0.0),
            }],
            ExcitationField::FourWaveTe { e0, phi, psi } => {
                let dirs = four_wave_dirs(psi);
                let phases = [phi, -phi, 0.0, 0.0];
                dirs.iter()
                    .zip(phases)
                    .map(|(&dir, ph)| Beam {
                        dir,
                        pol: Vector3::y(),
                        amp: Complex64::from_polar(e0 / 4.0, ph),
                    })
                    .collect()
            }
            ExcitationField::FourWaveTm { e0, phi, psi } => {
                let dirs = four_wave_dirs(psi);
                let phases = [phi, -phi, 0.0, 0.0];
                dirs.iter()
                    .zip(phases)
                    .map(|(&dir, ph)| Beam {
                        // H along y for every beam: E = Z0 H x dir
                        dir,
                        pol: Vector3::y().cross(&dir),
                        amp: Complex64::from_polar(e0 / 4.0, ph),
                    })
                    .collect()
            }
        }
    }

    /// Electric field at `r`.
    pub fn eval_e(&self, k: f64, r: &Vector3<f64>) -> Vector3<Complex64> {
        let mut e = Vector3::zeros();
        for b in self.beams() {
            let phase = b.amp * Complex64::from_polar(1.0, k * b.dir.dot(r));
            e += b.pol.map(|p| phase * p);
        }
        e
    }

    /// Magnetic field at `r` (`H = dir x E / Z0` per beam).
    pub fn eval_h(&self, k: f64, r: &Vector3<f64>) -> Vector3<Complex64> {
        let mut h = Vector3::zeros();
        for b in self.beams() {
            let phase = b.amp * Complex64::from_polar(1.0, k * b.dir.dot(r)) / Z0;
            let hp = b.dir.cross(&b.pol);
            h += hp.map(|p| phase * p);
        }
        h
    }

    /// Symmetrized gradients of E and H at `r`. Exact: each beam
    /// contributes `i k amp e^{i k dir.r} (dir_mu pol_nu + dir_nu pol_mu)`.
    pub fn eval_sym_gradients(&self, k: f64, r: &Vector3<f64>) -> (Matrix3<Complex64>, Matrix3<Complex64>) {
        let mut ge = Matrix3::zeros();
        let mut gh = Matrix3::zeros();
        for b in self.beams() {
            let phase = Complex64::new(0.0, k)
                * b.amp
                * Complex64::from_polar(1.0, k * b.dir.dot(r));
            let hp = b.dir.cross(&b.pol) / Z0;
            for mu in 0..3 {
                for nu in 0..3 {
                    let sym_e = b.dir[mu] * b.pol[nu] + b.dir[nu] * b.pol[mu];
                    let sym_h = b.dir[mu] * hp[nu] + b.dir[nu] * hp[mu];
                    ge[(mu, nu)] += phase * sym_e;
                    gh[(mu, nu)] += phase * sym_h;
                }
            }
        }
        (ge, gh)
    }

    /// Fields and gradients at the cloud center.
    pub fn descriptors_at_origin(&self, k: f64) -> FieldDescriptors {
        let origin = Vector3::zeros();
        let (grad_e_sym, grad_h_sym) = self.eval_sym_gradients(k, &origin);
        FieldDescriptors {
            e: self.eval_e(k, &origin),
            h: self.eval_h(k, &origin),
            grad_e_sym,
            grad_h_sym,
        }
    }
}

fn four_wave_dirs(psi: f64) -> [Vector3<f64>; 4] {
    let (s, c) = psi.sin_cos();
    let d1 = Vector3::new(s, 0.0, c);
    let d3 = Vector3::new(s, 0.0, -c);
    [d1, -d1, d3, -d3]
}

#[cfg(test)]
mod tests {
    use super::*;

    const K: f64 = 2.0 * std::f64::consts::PI;
    const PI: f64 = std::f64::consts::PI;

    /// Closed-form TE fields, written out independently of the beam sum.
    fn te_closed(e0: f64, phi: f64, psi: f64, r: &Vector3<f64>) -> (Vector3<Complex64>, Vector3<Complex64>) {
        let (kx, kz) = (K * psi.sin(), K * psi.cos());
        let a = kx * r.x + kz * r.z + phi;
        let b = kx * r.x - kz * r.z;
        let e = Vector3::new(
            Complex64::new(0.0, 0.0),
            Complex64::new(e0 / 2.0 * (a.cos() + b.cos()), 0.0),
            Complex64::new(0.0, 0.0),
        );
        let h0 = e0 / Z0;
        let h = Vector3::new(
            Complex64::new(0.0, -h0 / 2.0 * psi.cos() * (a.sin() - b.sin())),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, h0 / 2.0 * psi.sin() * (a.sin() + b.sin())),
        );
        (e, h)
    }

    /// Closed-form TM fields.
    fn tm_closed(e0: f64, phi: f64, psi: f64, r: &Vector3<f64>) -> (Vector3<Complex64>, Vector3<Complex64>) {
        let (kx, kz) = (K * psi.sin(), K * psi.cos());
        let a = kx * r.x + kz * r.z + phi;
        let b = kx * r.x - kz * r.z;
        let e = Vector3::new(
            Complex64::new(0.0, e0 / 2.0 * psi.cos() * (a.sin() - b.sin())),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, -e0 / 2.0 * psi.sin() * (a.sin() + b.sin())),
        );
        let h0 = e0 / Z0;
        let h = Vector3::new(
            Complex64::new(0.0, 0.0),
            Complex64::new(h0 / 2.0 * (a.cos() + b.cos()), 0.0),
            Complex64::new(0.0, 0.0),
        );
        (e, h)
    }

    fn sample_points() -> Vec<Vector3<f64>> {
        vec![
            Vector3::zeros(),
            Vector3::new(0.05, -0.02, 0.11),
            Vector3::new(-0.13, 0.08, -0.04),
            Vector3::new(0.2, 0.0, -0.2),
            Vector3::new(0.017, 0.093, 0.171),
        ]
    }

    #[test]
    fn plane_wave_values() {
        let f = ExcitationField::PlaneWave { e0: 2.0 };
        for r in sample_points() {
            let e = f.eval_e(K, &r);
            let h = f.eval_h(K, &r);
            let expect = Complex64::from_polar(2.0, K * r.z);
            assert!((e.x - expect).norm() < 1e-14);
            assert!(e.y.norm() < 1e-14 && e.z.norm() < 1e-14);
            assert!((h.y - expect / Z0).norm() < 1e-14);
            assert!(h.x.norm() < 1e-14 && h.z.norm() < 1e-14);
            let (ge, _) = f.eval_sym_gradients(K, &r);
            let want = Complex64::new(0.0, K) * expect;
            assert!((ge[(0, 2)] - want).norm() < 1e-13);
            assert!((ge[(2, 0)] - want).norm() < 1e-13);
            assert!(ge[(0, 0)].norm() < 1e-14 && ge[(1, 1)].norm() < 1e-14);
        }
    }

    #[test]
    fn te_beam_sum_matches_closed_form() {
        for (phi, psi) in [(0.0, PI / 4.0), (PI, PI / 4.0), (2.2, 0.6), (-1.3, 1.1)] {
            let f = ExcitationField::FourWaveTe { e0: 1.0, phi, psi };
            for r in sample_points() {
                let (ec, hc) = te_closed(1.0, phi, psi, &r);
                let e = f.eval_e(K, &r);
                let h = f.eval_h(K, &r);
                assert!((e - ec).norm() < 1e-13, "E mismatch at phi={phi} psi={psi}");
                assert!((h - hc).norm() < 1e-13, "H mismatch at phi={phi} psi={psi}");
            }
        }
    }

    #[test]
    fn tm_beam_sum_matches_closed_form() {
        for (phi, psi) in [(0.0, PI / 4.0), (PI, PI / 4.0), (2.2, 0.6), (-1.3, 1.1)] {
            let f = ExcitationField::FourWaveTm { e0: 1.0, phi, psi };
            for r in sample_points() {
                let (ec, hc) = tm_closed(1.0, phi, psi, &r);
                assert!((f.eval_e(K, &r) - ec).norm() < 1e-13);
                assert!((f.eval_h(K, &r) - hc).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn te_tm_duality() {
        // E_TM = -Z0 H_TE, H_TM = E_TE / Z0 for equal amplitudes.
        let te = ExcitationField::FourWaveTe { e0: 1.0, phi: 0.9, psi: 0.7 };
        let tm = ExcitationField::FourWaveTm { e0: 1.0, phi: 0.9, psi: 0.7 };
        for r in sample_points() {
            assert!((tm.eval_e(K, &r) + te.eval_h(K, &r) * Complex64::from(Z0)).norm() < 1e-13);
            assert!((tm.eval_h(K, &r) - te.eval_e(K, &r) / Complex64::from(Z0)).norm() < 1e-13);
        }
    }

    #[test]
    fn selective_descriptors_at_quarter_pi() {
        let psi = PI / 4.0;
        let tol = 1e-13;

        // TE, phi = 0: pure electric-dipole drive.
        let d = ExcitationField::FourWaveTe { e0: 1.0, phi: 0.0, psi }.descriptors_at_origin(K);
        assert!((d.e.y - Complex64::from(1.0)).norm() < tol);
        assert!(d.h.norm() < tol);
        assert!(d.grad_e_sym.norm() < tol && d.grad_h_sym.norm() < tol);

        // TE, phi = pi: pure magnetic-quadrupole drive,
        // (grad H + H grad) = i k H0 (xx - zz).
        let d = ExcitationField::FourWaveTe { e0: 1.0, phi: PI, psi }.descriptors_at_origin(K);
        assert!(d.e.norm() < tol && d.h.norm() < tol && d.grad_e_sym.norm() < tol);
        let want = Complex64::new(0.0, K / Z0);
        assert!((d.grad_h_sym[(0, 0)] - want).norm() < tol);
        assert!((d.grad_h_sym[(2, 2)] + want).norm() < tol);
        assert!(d.grad_h_sym[(0, 2)].norm() < tol && d.grad_h_sym[(1, 1)].norm() < tol);

        // TM, phi = 0: pure magnetic-dipole drive.
        let d = ExcitationField::FourWaveTm { e0: 1.0, phi: 0.0, psi }.descriptors_at_origin(K);
        assert!((d.h.y - Complex64::from(1.0 / Z0)).norm() < tol);
        assert!(d.e.norm() < tol);
        assert!(d.grad_e_sym.norm() < tol && d.grad_h_sym.norm() < tol);

        // TM, phi = pi: pure electric-quadrupole drive,
        // (grad E + E grad) = i k E0 (zz - xx).
        let d = ExcitationField::FourWaveTm { e0: 1.0, phi: PI, psi }.descriptors_at_origin(K);
        assert!(d.e.norm() < tol && d.h.norm() < tol && d.grad_h_sym.norm() < tol);
        let want = Complex64::new(0.0, K);
        assert!((d.grad_e_sym[(2, 2)] - want).norm() < tol);
        assert!((d.grad_e_sym[(0, 0)] + want).norm() < tol);
        assert!(d.grad_e_sym[(0, 2)].norm() < tol);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let fields = [
            ExcitationField::PlaneWave { e0: 1.0 },
            ExcitationField::FourWaveTe { e0: 1.0, phi: 1.7, psi: 0.9 },
            ExcitationField::FourWaveTm { e0: 1.0, phi: -0.4, psi: 1.2 },
        ];
        let h = 1e-6;
        for f in fields {
            for r in sample_points() {
                let (ge, gh) = f.eval_sym_gradients(K, &r);
                for mu in 0..3 {
                    let mut dr = Vector3::zeros();
                    dr[mu] = h;
                    let de = (f.eval_e(K, &(r + dr)) - f.eval_e(K, &(r - dr))) / Complex64::from(2.0 * h);
                    let dh = (f.eval_h(K, &(r + dr)) - f.eval_h(K, &(r - dr))) / Complex64::from(2.0 * h);
                    for nu in 0..3 {
                        let mut dr2 = Vector3::zeros();
                        dr2[nu] = h;
                        let de2 = (f.eval_e(K, &(r + dr2)) - f.eval_e(K, &(r - dr2)))
                            / Complex64::from(2.0 * h);
                        let dh2 = (f.eval_h(K, &(r + dr2)) - f.eval_h(K, &(r - dr2)))
                            / Complex64::from(2.0 * h);
                        assert!((ge[(mu, nu)] - (de[nu] + de2[mu])).norm() < 1e-8 * K);
                        assert!((gh[(mu, nu)] - (dh[nu] + dh2[mu])).norm() < 1e-8 * K);
                    }
                }
            }
        }
    }

    #[test]
    fn gradients_are_symmetric_and_fields_phi_periodic() {
        let f1 = ExcitationField::FourWaveTe { e0: 1.0, phi: 0.8, psi: 0.6 };
        let f2 = ExcitationField::FourWaveTe { e0: 1.0, phi: 0.8 + 2.0 * PI, psi: 0.6 };
        for r in sample_points() {
            let (ge, gh) = f1.eval_sym_gradients(K, &r);
            assert!((ge - ge.transpose()).norm() < 1e-14);
            assert!((gh - gh.transpose()).norm() < 1e-14);
            assert!((f1.eval_e(K, &r) - f2.eval_e(K, &r)).norm() < 1e-13);
            assert!((f1.eval_h(K, &r) - f2.eval_h(K, &r)).norm() < 1e-13);
        }
    }

    #[test]
    fn beams_are_transverse_unit_polarized() {
        let fields = [
            ExcitationField::PlaneWave { e0: 1.0 },
            ExcitationField::FourWaveTe { e0: 1.0, phi: 0.3, psi: 0.5 },
            ExcitationField::FourWaveTm { e0: 1.0, phi: 0.3, psi: 0.5 },
        ];
        for f in fields {
            for b in f.beams() {
                assert!((b.dir.norm() - 1.0).abs() < 1e-15);
                assert!((b.pol.norm() - 1.0).abs() < 1e-15);
                assert!(b.dir.dot(&b.pol).abs() < 1e-15);
            }
        }
    }
}
