//! Single-atom calibration.
//!
//! One lossless two-level atom has the textbook resonant cross section
//! sigma = 3 lambda^2 / 2 pi, and its normalized polarizability
//! a~ = alpha / alpha0 satisfies the optical theorem Im(a~) = |a~|^2 at
//! every detuning. A non-radiative linewidth turns the identity into the
//! strict inequality Im(a~) > |a~|^2 (absorption).

use cloudscat::atom::AtomModel;
use cloudscat::excitation::ExcitationField;
use cloudscat::multipole::exact_extinction;
use cloudscat::solver::solve_coupled_dipoles;
use cloudscat::units::UnitSystem;
use nalgebra::Vector3;

fn main() {
    let units = UnitSystem::natural();
    let field = ExcitationField::PlaneWave { e0: 1.0 };

    // Resonant total cross section in lambda^2 / 2 pi units.
    let atom = AtomModel::lossless();
    let positions = [Vector3::zeros()];
    let alpha = atom.polarizability(0.0, &units);
    let sol = solve_coupled_dipoles(&positions, alpha, &field, units.k).unwrap();
    let total = exact_extinction(&positions, &sol.dipoles, &field, &units);
    println!("resonant total cross section: {total:.12} (expected 3)");

    // Optical theorem across the line.
    println!("\ndetuning   Im(a/a0)      |a/a0|^2      residual");
    for det in [-8.0, -2.0, -0.5, 0.0, 0.5, 2.0, 8.0] {
        let a = atom.polarizability(det, &units) / units.alpha0();
        println!(
            "{det:>8.2}   {:<12.6}  {:<12.6}  {:+.1e}",
            a.im,
            a.norm_sqr(),
            a.im - a.norm_sqr()
        );
    }

    // Absorption opens a gap.
    let lossy = AtomModel { gamma_nr: 0.5 };
    println!("\nwith gamma_nr = 0.5 (absorbing):");
    for det in [-2.0, 0.0, 2.0] {
        let a = lossy.polarizability(det, &units) / units.alpha0();
        println!(
            "{det:>8.2}   Im(a/a0) - |a/a0|^2 = {:.6} > 0",
            a.im - a.norm_sqr()
        );
    }
}
