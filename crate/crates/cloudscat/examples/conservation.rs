//! Effective polarizabilities and their conservation identities.
//!
//! Driving the cloud with a single plane wave and averaging the induced
//! multipole moments retrieves one effective polarizability per channel:
//!
//! ```text
//! alpha_ED = <dE_x> / (eps0 E0)        alpha_MD = <dM_y> / H0
//! alpha_EQ = 2 <QE_xz> / (i k eps0 E0) alpha_MQ = 2 <QM_yz> / (i k H0)
//! ```
//!
//! For a lossless atom, energy conservation links each mean
//! polarizability to the configuration fluctuations around it:
//! Im(a~) - |a~|^2 equals the matching fluctuation sum. The residuals
//! shrink like 1/sqrt(N_R).

use cloudscat::atom::AtomModel;
use cloudscat::ensemble::{conservation_check, retrieve_polarizabilities, run_ensemble, EnsembleConfig};
use cloudscat::excitation::ExcitationField;
use cloudscat::units::UnitSystem;

fn main() {
    let units = UnitSystem::natural();
    let atom = AtomModel::lossless();
    let pw = ExcitationField::PlaneWave { e0: 1.0 };
    let cfg = EnsembleConfig {
        n_realizations: 4000,
        master_seed: 1,
        workers: 0,
        ..EnsembleConfig::default()
    };

    let t = std::time::Instant::now();
    let result = run_ensemble(&cfg, &atom, &units, &[0.0], &[pw]).unwrap();
    let pol = retrieve_polarizabilities(result.stat(0, 0), &pw, &units).unwrap();
    println!(
        "{} realizations at resonance in {:.1} s\n",
        cfg.n_realizations,
        t.elapsed().as_secs_f64()
    );

    let a = pol.alphas.normalized(&units);
    let names = ["ED", "MD", "EQ", "MQ"];
    println!("channel   alpha/alpha0 (quadrupoles: alpha0')      |alpha|");
    for i in 0..4 {
        println!(
            "{:>7}   {:>10.5} {:+.5} i                  {:.5}",
            names[i],
            a[i].re,
            a[i].im,
            a[i].norm()
        );
    }

    println!("\nconservation identities, Im(a~) - |a~|^2 = fluctuation sum:");
    println!("channel   lhs           rhs           residual");
    for r in conservation_check(&pol, &units).records {
        println!(
            "{:>7}   {:<12.6}  {:<12.6}  {:.2e}",
            r.channel, r.lhs, r.rhs, r.residual
        );
    }
}
