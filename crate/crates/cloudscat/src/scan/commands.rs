//! Command implementations behind the CLI subcommands. Every command
//! validates its configuration, runs the Monte Carlo engine, and emits
//! CSV tables, SVG plots, and a checksummed `manifest.json` into the
//! configured output directory.

use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::Vector3;

use crate::atom::AtomModel;
use crate::ensemble::{
    conservation_check, retrieve_polarizabilities, run_ensemble, run_pattern_ensemble, ScanResult,
};
use crate::error::{Error, Result};
use crate::excitation::ExcitationField;
use crate::multipole::{
    coherent_channels, cross_sections_from_polarizabilities, exact_extinction, exact_scattering,
    integrate_pattern, multipole_expansion, EffectivePolarizabilities,
};
use crate::quadrature::sphere_product_grid;
use crate::scan::config::{ExcitationVariant, RunConfig};
use crate::scan::csv::{format_field, Table};
use crate::scan::manifest::Manifest;
use crate::scan::svg::{heatmap, line_plot, polar_plot, Series};
use crate::solver::{factor, PairCoupling};
use crate::units::UnitSystem;

fn prepare(cfg: &RunConfig, command: &str) -> Result<(Manifest, PathBuf)> {
    cfg.validate()?;
    let dir = cfg.output.directory.clone();
    std::fs::create_dir_all(&dir)
        .map_err(|e| Error::Config(format!("output directory {}: {e}", dir.display())))?;
    Ok((Manifest::new(command, cfg.echo()), dir))
}

fn emit(dir: &Path, name: &str, contents: &str, manifest: &mut Manifest) -> Result<()> {
    std::fs::write(dir.join(name), contents)?;
    manifest.record_file(name, contents.as_bytes());
    Ok(())
}

fn record_resamples(manifest: &mut Manifest, result: &ScanResult) {
    manifest.resamples.geometry = result.geometry_resamples;
    manifest.resamples.degeneracy = result.degeneracy_resamples;
    manifest.resamples.configurations = result.configurations;
    manifest.resamples.rate = result.resample_rate();
}

fn finish(
    mut manifest: Manifest,
    dir: &Path,
    started: Instant,
    realizations: usize,
) -> Result<Manifest> {
    manifest.wall_seconds = started.elapsed().as_secs_f64();
    manifest.realizations_per_second = if manifest.wall_seconds > 0.0 {
        realizations as f64 / manifest.wall_seconds
    } else {
        0.0
    };
    manifest.write(dir)?;
    Ok(manifest)
}

/// Detuning spectrum under a single plane wave: retrieved effective
/// polarizabilities, per-channel cross sections, fluctuation statistics,
/// and conservation residuals.
pub fn cmd_spectrum(cfg: &RunConfig) -> Result<Manifest> {
    if cfg.excitation.variant != ExcitationVariant::Pw {
        return Err(Error::Config(
            "spectrum requires excitation.variant = pw (polarizability retrieval is defined \
             for the single plane wave); use phase-scan for the standing-wave drives"
                .into(),
        ));
    }
    let (mut manifest, dir) = prepare(cfg, "spectrum")?;
    let started = Instant::now();
    let units = UnitSystem::natural();
    let atom = AtomModel { gamma_nr: cfg.gamma_nr };
    let detunings = cfg.detuning.points();
    let field = cfg.excitation.field();
    let result = run_ensemble(&cfg.ensemble_config(), &atom, &units, &detunings, &[field])?;
    record_resamples(&mut manifest, &result);

    let a0 = units.alpha0();
    let a0p = units.alpha0_prime();
    let mut table = Table::new(&[
        "detuning",
        "alpha_ed_re", "alpha_ed_im", "alpha_ed_se",
        "alpha_md_re", "alpha_md_im", "alpha_md_se",
        "alpha_eq_re", "alpha_eq_im", "alpha_eq_se",
        "alpha_mq_re", "alpha_mq_im", "alpha_mq_se",
        "fluct_ed_d", "fluct_ed_od", "fluct_md_d", "fluct_md_od", "fluct_eq", "fluct_mq",
        "c_coh_ed", "c_coh_md", "c_coh_eq", "c_coh_mq", "c_coh",
        "c_incoh_ed", "c_incoh_md", "c_incoh_eq", "c_incoh_mq", "c_incoh",
        "c_total_ed", "c_total_md", "c_total_eq", "c_total_mq", "c_total", "c_total_se",
        "conservation_ed", "conservation_md", "conservation_eq", "conservation_mq",
        "exact_extinction", "exact_scattering",
    ]);
    for (i, &det) in detunings.iter().enumerate() {
        let stats = result.stat(i, 0);
        let pol = retrieve_polarizabilities(stats, &field, &units)?;
        let a = pol.alphas.normalized(&units);
        let se = [
            pol.alpha_se[0] / a0,
            pol.alpha_se[1] / a0,
            pol.alpha_se[2] / a0p,
            pol.alpha_se[3] / a0p,
        ];
        let xs = stats.cross_sections(&field, &units);
        let cons = conservation_check(&pol, &units);
        table.push(vec![
            det,
            a[0].re, a[0].im, se[0],
            a[1].re, a[1].im, se[1],
            a[2].re, a[2].im, se[2],
            a[3].re, a[3].im, se[3],
            pol.fluct_ed_d / (a0 * a0),
            pol.fluct_ed_od / (a0 * a0),
            pol.fluct_md_d / (a0 * a0),
            pol.fluct_md_od / (a0 * a0),
            pol.fluct_eq_sum / (a0p * a0p),
            pol.fluct_mq_sum / (a0p * a0p),
            xs.coherent.ed, xs.coherent.md, xs.coherent.eq, xs.coherent.mq, xs.coherent_sum(),
            xs.incoherent.ed, xs.incoherent.md, xs.incoherent.eq, xs.incoherent.mq,
            xs.incoherent_sum(),
            xs.total.ed, xs.total.md, xs.total.eq, xs.total.mq, xs.total_sum(),
            stats.extinction_total_se,
            cons.records[0].residual, cons.records[1].residual,
            cons.records[2].residual, cons.records[3].residual,
            stats.exact_extinction_mean,
            stats.exact_scattering_mean,
        ]);
    }

    let se_col = table.column("c_total_se").unwrap();
    manifest.add_noise("c_total_se_max", se_col.iter().cloned().fold(0.0, f64::max));
    manifest.add_noise(
        "c_total_se_mean",
        se_col.iter().sum::<f64>() / se_col.len() as f64,
    );

    if cfg.output.csv {
        emit(&dir, "spectrum.csv", &table.render(), &mut manifest)?;
    }
    if cfg.output.svg {
        let grab = |name: &str| table.column(name).unwrap();
        let svg = line_plot(
            "Cross sections vs detuning",
            "detuning (linewidths)",
            "cross section (lambda^2 / 2 pi)",
            &detunings,
            &[
                Series { label: "total", y: &grab("c_total") },
                Series { label: "coherent", y: &grab("c_coh") },
                Series { label: "incoherent", y: &grab("c_incoh") },
            ],
        );
        emit(&dir, "spectrum_cross_sections.svg", &svg, &mut manifest)?;
        let svg = line_plot(
            "Retrieved polarizabilities (imaginary part)",
            "detuning (linewidths)",
            "Im alpha (normalized)",
            &detunings,
            &[
                Series { label: "ED / alpha0", y: &grab("alpha_ed_im") },
                Series { label: "MD / alpha0", y: &grab("alpha_md_im") },
                Series { label: "EQ / alpha0'", y: &grab("alpha_eq_im") },
                Series { label: "MQ / alpha0'", y: &grab("alpha_mq_im") },
            ],
        );
        emit(&dir, "spectrum_polarizabilities.svg", &svg, &mut manifest)?;
        let svg = line_plot(
            "Channel cross sections (total)",
            "detuning (linewidths)",
            "cross section (lambda^2 / 2 pi)",
            &detunings,
            &[
                Series { label: "ED", y: &grab("c_total_ed") },
                Series { label: "MD", y: &grab("c_total_md") },
                Series { label: "EQ", y: &grab("c_total_eq") },
                Series { label: "MQ", y: &grab("c_total_mq") },
            ],
        );
        emit(&dir, "spectrum_channels.svg", &svg, &mut manifest)?;
    }
    finish(manifest, &dir, started, cfg.ensemble.realizations)
}

/// Phase x detuning scan under a four-wave drive, with the closed-form
/// prediction computed from a companion single-plane-wave retrieval at
/// the same seed.
pub fn cmd_phase_scan(cfg: &RunConfig) -> Result<Manifest> {
    if cfg.excitation.variant == ExcitationVariant::Pw {
        return Err(Error::Config(
            "phase-scan requires excitation.variant = te4 or tm4".into(),
        ));
    }
    let (mut manifest, dir) = prepare(cfg, "phase-scan")?;
    let started = Instant::now();
    let units = UnitSystem::natural();
    let atom = AtomModel { gamma_nr: cfg.gamma_nr };
    let detunings = cfg.detuning.points();
    let phis = cfg.excitation.phi_grid.points();
    let fields: Vec<ExcitationField> = phis.iter().map(|&p| cfg.excitation.field_at(p)).collect();
    let result = run_ensemble(&cfg.ensemble_config(), &atom, &units, &detunings, &fields)?;
    record_resamples(&mut manifest, &result);

    let pw = ExcitationField::PlaneWave { e0: 1.0 };
    let pw_result = run_ensemble(&cfg.ensemble_config(), &atom, &units, &detunings, &[pw])?;
    let alphas: Vec<EffectivePolarizabilities> = (0..detunings.len())
        .map(|i| Ok(retrieve_polarizabilities(pw_result.stat(i, 0), &pw, &units)?.alphas))
        .collect::<Result<_>>()?;

    let mut columns = vec!["detuning".to_string()];
    columns.extend(phis.iter().map(|&p| format!("phi_{}", format_field(p))));
    let mut total = Table::new(&columns);
    let mut total_se = Table::new(&columns);
    let mut coherent = Table::new(&columns);
    let mut closed = Table::new(&columns);
    let mut max_pull = 0.0f64;
    for (i, &det) in detunings.iter().enumerate() {
        let mut row_t = vec![det];
        let mut row_se = vec![det];
        let mut row_c = vec![det];
        let mut row_cl = vec![det];
        for (j, field) in fields.iter().enumerate() {
            let stats = result.stat(i, j);
            let measured = stats.extinction_total();
            let se = stats.extinction_total_se;
            let predicted = cross_sections_from_polarizabilities(&alphas[i], field, &units)
                .total_sum();
            row_t.push(measured);
            row_se.push(se);
            row_c.push(stats.cross_sections(field, &units).coherent_sum());
            row_cl.push(predicted);
            if se > 0.0 {
                max_pull = max_pull.max((measured - predicted).abs() / se);
            }
        }
        total.push(row_t);
        total_se.push(row_se);
        coherent.push(row_c);
        closed.push(row_cl);
    }
    manifest.add_noise("closed_form_max_pull", max_pull);
    manifest.add_noise(
        "c_total_se_max",
        total_se
            .rows
            .iter()
            .flat_map(|r| r[1..].iter().cloned())
            .fold(0.0, f64::max),
    );

    // Per-channel slices at the selective phases.
    let targets = [0.0, std::f64::consts::FRAC_PI_2, std::f64::consts::PI];
    let mut slices = Table::new(&[
        "phi", "detuning",
        "c_total", "c_total_se", "c_coh", "c_incoh",
        "c_ed", "c_md", "c_eq", "c_mq", "c_closed",
    ]);
    let nearest = |target: f64| -> usize {
        phis.iter()
            .enumerate()
            .min_by(|a, b| {
                (a.1 - target)
                    .abs()
                    .partial_cmp(&(b.1 - target).abs())
                    .unwrap()
            })
            .map(|(idx, _)| idx)
            .unwrap()
    };
    for &target in &targets {
        let j = nearest(target);
        for (i, &det) in detunings.iter().enumerate() {
            let stats = result.stat(i, j);
            let xs = stats.cross_sections(&fields[j], &units);
            let predicted = cross_sections_from_polarizabilities(&alphas[i], &fields[j], &units)
                .total_sum();
            slices.push(vec![
                phis[j], det,
                stats.extinction_total(), stats.extinction_total_se,
                xs.coherent_sum(), xs.incoherent_sum(),
                xs.total.ed, xs.total.md, xs.total.eq, xs.total.mq,
                predicted,
            ]);
        }
    }

    if cfg.output.csv {
        emit(&dir, "phase_scan_total.csv", &total.render(), &mut manifest)?;
        emit(&dir, "phase_scan_total_se.csv", &total_se.render(), &mut manifest)?;
        emit(&dir, "phase_scan_coherent.csv", &coherent.render(), &mut manifest)?;
        emit(&dir, "phase_scan_closed_form.csv", &closed.render(), &mut manifest)?;
        emit(&dir, "phase_scan_slices.csv", &slices.render(), &mut manifest)?;
    }
    if cfg.output.svg {
        let values: Vec<f64> = phis
            .iter()
            .enumerate()
            .flat_map(|(j, _)| {
                detunings
                    .iter()
                    .enumerate()
                    .map(move |(i, _)| (i, j))
            })
            .map(|(i, j)| result.stat(i, j).extinction_total())
            .collect();
        let (svg, lo, hi) = heatmap(
            "Total cross section vs detuning and phase",
            "detuning (linewidths)",
            "phase (radians)",
            &detunings,
            &phis,
            &values,
        );
        manifest.heatmap_range = Some([lo, hi]);
        emit(&dir, "phase_scan_total.svg", &svg, &mut manifest)?;

        let mut series_data: Vec<(String, Vec<f64>)> = Vec::new();
        for &target in &targets {
            let j = nearest(target);
            let measured: Vec<f64> = (0..detunings.len())
                .map(|i| result.stat(i, j).extinction_total())
                .collect();
            let predicted: Vec<f64> = (0..detunings.len())
                .map(|i| {
                    cross_sections_from_polarizabilities(&alphas[i], &fields[j], &units)
                        .total_sum()
                })
                .collect();
            series_data.push((format!("measured phi={:.3}", phis[j]), measured));
            series_data.push((format!("closed phi={:.3}", phis[j]), predicted));
        }
        let series: Vec<Series> = series_data
            .iter()
            .map(|(label, y)| Series { label, y })
            .collect();
        let svg = line_plot(
            "Selective-phase slices: measured vs closed form",
            "detuning (linewidths)",
            "total cross section (lambda^2 / 2 pi)",
            &detunings,
            &series,
        );
        emit(&dir, "phase_scan_slices.svg", &svg, &mut manifest)?;
    }
    finish(manifest, &dir, started, 2 * cfg.ensemble.realizations)
}

/// Ensemble radiation pattern at a fixed detuning and phase: total and
/// coherent intensities on a quadrature grid plus two plane cuts.
pub fn cmd_pattern(cfg: &RunConfig) -> Result<Manifest> {
    let (mut manifest, dir) = prepare(cfg, "pattern")?;
    let started = Instant::now();
    let units = UnitSystem::natural();
    let atom = AtomModel { gamma_nr: cfg.gamma_nr };
    let field = cfg.excitation.field();
    let (grid_dirs, weights) = sphere_product_grid(cfg.pattern.n_theta, cfg.pattern.n_phi);

    let n_cut = 181;
    let cut_angles: Vec<f64> = (0..n_cut)
        .map(|i| 2.0 * std::f64::consts::PI * i as f64 / (n_cut - 1) as f64)
        .collect();
    let xz_dirs: Vec<Vector3<f64>> = cut_angles
        .iter()
        .map(|a| Vector3::new(a.sin(), 0.0, a.cos()))
        .collect();
    let yz_dirs: Vec<Vector3<f64>> = cut_angles
        .iter()
        .map(|a| Vector3::new(0.0, a.sin(), a.cos()))
        .collect();
    let mut directions = grid_dirs.clone();
    directions.extend_from_slice(&xz_dirs);
    directions.extend_from_slice(&yz_dirs);

    let pat = run_pattern_ensemble(
        &cfg.ensemble_config(),
        &atom,
        &units,
        cfg.pattern.detuning,
        &field,
        &directions,
    )?;
    manifest.resamples.geometry = pat.geometry_resamples;
    manifest.resamples.degeneracy = pat.degeneracy_resamples;
    manifest.resamples.configurations = pat.n_realizations as u64;
    manifest.resamples.rate = (pat.geometry_resamples + pat.degeneracy_resamples) as f64
        / pat.n_realizations.max(1) as f64;

    let n_grid = grid_dirs.len();
    let quad_total: f64 = (0..n_grid).map(|i| pat.total[i] * weights[i]).sum();
    let quad_coherent: f64 = (0..n_grid).map(|i| pat.coherent[i] * weights[i]).sum();
    manifest.add_noise("quadrature_total", quad_total);
    manifest.add_noise("quadrature_coherent", quad_coherent);
    manifest.add_noise("exact_scattering_mean", pat.exact_scattering_mean);
    manifest.add_noise(
        "quadrature_over_exact",
        quad_total / pat.exact_scattering_mean,
    );

    let mut grid_table = Table::new(&["nx", "ny", "nz", "weight", "total", "total_se", "coherent"]);
    for i in 0..n_grid {
        let d = &grid_dirs[i];
        grid_table.push(vec![
            d.x, d.y, d.z, weights[i], pat.total[i], pat.total_se[i], pat.coherent[i],
        ]);
    }
    let cut_table = |offset: usize| {
        let mut t = Table::new(&["angle", "total", "total_se", "coherent"]);
        for (i, &a) in cut_angles.iter().enumerate() {
            let k = offset + i;
            t.push(vec![a, pat.total[k], pat.total_se[k], pat.coherent[k]]);
        }
        t
    };
    let xz = cut_table(n_grid);
    let yz = cut_table(n_grid + n_cut);

    if cfg.output.csv {
        emit(&dir, "pattern_grid.csv", &grid_table.render(), &mut manifest)?;
        emit(&dir, "pattern_cut_xz.csv", &xz.render(), &mut manifest)?;
        emit(&dir, "pattern_cut_yz.csv", &yz.render(), &mut manifest)?;
    }
    if cfg.output.svg {
        for (name, table, title) in [
            ("pattern_xz.svg", &xz, "Radiation pattern, x-z plane (angle from +z)"),
            ("pattern_yz.svg", &yz, "Radiation pattern, y-z plane (angle from +z)"),
        ] {
            let svg = polar_plot(
                title,
                &cut_angles,
                &[
                    Series { label: "total", y: &table.column("total").unwrap() },
                    Series { label: "coherent", y: &table.column("coherent").unwrap() },
                ],
            );
            emit(&dir, name, &svg, &mut manifest)?;
        }
    }
    finish(manifest, &dir, started, cfg.ensemble.realizations)
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub threshold: f64,
    pub detail: String,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct ValidationReport {
    pub passed: bool,
    pub checks: Vec<CheckResult>,
}

impl ValidationReport {
    pub fn lines(&self) -> Vec<String> {
        self.checks
            .iter()
            .map(|c| {
                format!(
                    "{} {} (value {:.3e}, threshold {:.3e}){}{}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.value,
                    c.threshold,
                    if c.detail.is_empty() { "" } else { " - " },
                    c.detail
                )
            })
            .collect()
    }
}

/// Invariant suite at reduced scale: single-atom calibration, exact
/// energy balance, truncation quality, route equivalence, conservation
/// identities, pattern quadrature, and worker-count determinism.
/// Writes `validation.json` and fails with a validation error (exit
/// status 3) if any check fails.
pub fn cmd_validate(cfg: &RunConfig) -> Result<Manifest> {
    let (mut manifest, dir) = prepare(cfg, "validate")?;
    let started = Instant::now();
    let units = UnitSystem::natural();
    let atom = AtomModel { gamma_nr: cfg.gamma_nr };
    let lossless = cfg.gamma_nr == 0.0;
    let mut checks: Vec<CheckResult> = Vec::new();
    let mut check = |name: &str, passed: bool, value: f64, threshold: f64, detail: String| {
        checks.push(CheckResult {
            name: name.to_string(),
            passed,
            value,
            threshold,
            detail,
        });
    };

    // Single-atom optical theorem on a detuning grid.
    {
        let mut worst_resid = 0.0f64;
        let mut min_gap = f64::INFINITY;
        let mut det = -20.0;
        while det <= 20.0 {
            let a = atom.polarizability(det, &units) / units.alpha0();
            let gap = a.im - a.norm_sqr();
            worst_resid = worst_resid.max(gap.abs());
            min_gap = min_gap.min(gap);
            det += 0.125;
        }
        if lossless {
            check(
                "single_atom_optical_theorem",
                worst_resid <= 1e-14,
                worst_resid,
                1e-14,
                "max |Im(a/a0) - |a/a0|^2| over detunings in [-20, 20]".into(),
            );
        } else {
            check(
                "single_atom_absorption_inequality",
                min_gap > 0.0,
                min_gap,
                0.0,
                "min Im(a/a0) - |a/a0|^2; positive when non-radiative loss is present".into(),
            );
        }
    }

    // Single-atom resonant total cross section (lossless only).
    if lossless {
        let positions = [Vector3::zeros()];
        let alpha = atom.polarizability(0.0, &units);
        let sol = crate::solver::solve_coupled_dipoles(&positions, alpha,
            &ExcitationField::PlaneWave { e0: 1.0 }, units.k)?;
        let c_total = exact_extinction(&positions, &sol.dipoles,
            &ExcitationField::PlaneWave { e0: 1.0 }, &units);
        check(
            "single_atom_resonant_total",
            (c_total - 3.0).abs() <= 1e-10,
            (c_total - 3.0).abs(),
            1e-10,
            format!("resonant C_total = {c_total} (lambda^2 / 2 pi)"),
        );
    }

    // Per-realization checks on the configured cloud: energy balance,
    // truncation quality, pattern quadrature.
    {
        use rand::SeedableRng;
        let alpha = atom.polarizability(0.0, &units);
        let pwf = ExcitationField::PlaneWave { e0: 1.0 };
        let (dirs, w) = sphere_product_grid(32, 64);
        let mut worst_balance = 0.0f64;
        let mut trunc_devs: Vec<f64> = Vec::with_capacity(100);
        let mut worst_quad = 0.0f64;
        let mut min_absorption = f64::INFINITY;
        for i in 0..100u64 {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.ensemble.master_seed);
            rng.set_stream(i);
            let (real, _) =
                crate::cloud::sample_realization(&cfg.cloud, &mut rng, cfg.ensemble.resample_limit)?;
            let coupling = PairCoupling::build(&real.positions, units.k)?;
            let fac = factor(coupling.assemble(alpha))?;
            let sol = fac.solve_excitation(&real.positions, &pwf, units.k)?;
            let ext = exact_extinction(&real.positions, &sol.dipoles, &pwf, &units);
            let sca = exact_scattering(&coupling, &sol.dipoles, 1.0, &units);
            if lossless {
                worst_balance = worst_balance.max((ext - sca).abs() / ext.abs().max(1e-300));
            } else {
                min_absorption = min_absorption.min(ext - sca);
            }
            let trunc = coherent_channels(
                &multipole_expansion(&real.positions, &sol.dipoles, units.k),
                1.0,
                &units,
            )
            .sum();
            trunc_devs.push((trunc - sca) / sca.abs().max(1e-300));
            if i < 5 {
                let intensities =
                    crate::multipole::far_field_pattern(&real.positions, &sol.dipoles, units.k, &dirs);
                let quad = integrate_pattern(&intensities, &w, 1.0, &units);
                worst_quad = worst_quad.max((quad - sca).abs() / sca.abs().max(1e-300));
            }
        }
        if lossless {
            check(
                "exact_energy_balance",
                worst_balance <= 1e-8,
                worst_balance,
                1e-8,
                "max relative |extinction - scattering| over 100 realizations".into(),
            );
        } else {
            check(
                "absorption_nonnegative",
                min_absorption >= 0.0,
                min_absorption,
                0.0,
                "min extinction - scattering over 100 realizations".into(),
            );
        }
        let max_signed = trunc_devs.iter().fold(f64::NEG_INFINITY, |m, d| m.max(*d));
        let max_abs = trunc_devs.iter().fold(0.0f64, |m, d| m.max(d.abs()));
        let mut mags: Vec<f64> = trunc_devs.iter().map(|d| d.abs()).collect();
        mags.sort_by(f64::total_cmp);
        let median = mags[mags.len() / 2];
        check(
            "multipole_truncation_bound",
            max_signed <= 1e-9,
            max_signed,
            1e-9,
            "max signed (truncated - exact)/exact over 100 realizations; exact dipole and \
             quadrupole projections can only undercount the scattered power"
                .into(),
        );
        check(
            "multipole_truncation",
            median <= 0.05,
            median,
            0.05,
            format!(
                "median relative undercount of the quadrupole-truncated total at resonance \
                 (max {max_abs:.3e}; the tail is octupole-and-higher power of close pairs)"
            ),
        );
        check(
            "pattern_quadrature",
            worst_quad <= 0.01,
            worst_quad,
            0.01,
            "max relative deviation of the solid-angle quadrature from the exact scattering"
                .into(),
        );
    }

    // Ensemble-level checks at resonance: route equivalence and the
    // statistical conservation identities.
    {
        let pwf = ExcitationField::PlaneWave { e0: 1.0 };
        let result = run_ensemble(&cfg.ensemble_config(), &atom, &units, &[0.0], &[pwf])?;
        record_resamples(&mut manifest, &result);
        let stats = result.stat(0, 0);
        let pol = retrieve_polarizabilities(stats, &pwf, &units)?;
        let closed = cross_sections_from_polarizabilities(&pol.alphas, &pwf, &units);
        let measured = stats.extinction_total();
        let route = (measured - closed.total_sum()).abs() / measured.abs().max(1e-300);
        check(
            "route_equivalence",
            route <= 1e-10,
            route,
            1e-10,
            "relative gap between moment-route and polarizability-route totals on \
             identical data"
                .into(),
        );
        if lossless {
            let n_r = cfg.ensemble.realizations as f64;
            let scale = (10_000.0 / n_r).sqrt();
            let report = conservation_check(&pol, &units);
            check(
                "conservation_ed",
                report.records[0].residual <= 0.05 * scale,
                report.records[0].residual,
                0.05 * scale,
                format!("relative residual at {} realizations", cfg.ensemble.realizations),
            );
            check(
                "conservation_md",
                report.records[1].residual <= 0.10 * scale,
                report.records[1].residual,
                0.10 * scale,
                format!("relative residual at {} realizations", cfg.ensemble.realizations),
            );
        }
    }

    // Worker-count determinism on a reduced ensemble.
    {
        let mut small = cfg.ensemble_config();
        small.n_realizations = cfg.ensemble.realizations.min(48);
        let fields = [cfg.excitation.field()];
        small.workers = 1;
        let a = run_ensemble(&small, &atom, &units, &[0.0, 1.0], &fields)?;
        small.workers = 2;
        let b = run_ensemble(&small, &atom, &units, &[0.0, 1.0], &fields)?;
        let mut identical = true;
        for (sa, sb) in a.stats.iter().zip(&b.stats) {
            identical &= format_field(sa.extinction_total())
                == format_field(sb.extinction_total());
            identical &= format_field(sa.extinction_total_se)
                == format_field(sb.extinction_total_se);
            identical &= format_field(sa.exact_scattering_mean)
                == format_field(sb.exact_scattering_mean);
        }
        check(
            "worker_determinism",
            identical,
            if identical { 0.0 } else { 1.0 },
            0.0,
            "statistics identical between 1 and 2 workers".into(),
        );
    }

    let report = ValidationReport {
        passed: checks.iter().all(|c| c.passed),
        checks,
    };
    for line in report.lines() {
        println!("{line}");
    }
    let mut json = serde_json::to_string_pretty(&report)
        .map_err(|e| Error::Config(format!("report serialization: {e}")))?;
    json.push('\n');
    emit(&dir, "validation.json", &json, &mut manifest)?;
    let manifest = finish(manifest, &dir, started, cfg.ensemble.realizations)?;
    if !report.passed {
        let failed: Vec<&str> = report
            .checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name.as_str())
            .collect();
        return Err(Error::Validation(format!(
            "{} of {} checks failed: {}",
            failed.len(),
            report.checks.len(),
            failed.join(", ")
        )));
    }
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scan::config::GridSpec;
    use crate::scan::manifest::verify_manifest;

    fn tiny_config(dir: &Path) -> RunConfig {
        let mut cfg = RunConfig::default();
        cfg.cloud.n_atoms = 5;
        cfg.detuning = GridSpec { min: -2.0, max: 2.0, count: 3 };
        cfg.excitation.phi_grid = GridSpec {
            min: 0.0,
            max: 2.0 * std::f64::consts::PI,
            count: 5,
        };
        cfg.ensemble.realizations = 20;
        cfg.pattern.n_theta = 8;
        cfg.pattern.n_phi = 16;
        cfg.workers = 1;
        cfg.output.directory = dir.to_path_buf();
        cfg
    }

    #[test]
    fn spectrum_emits_consistent_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny_config(dir.path());
        let manifest = cmd_spectrum(&cfg).unwrap();
        assert!(manifest.files.iter().any(|f| f.name == "spectrum.csv"));
        assert!(manifest
            .files
            .iter()
            .any(|f| f.name == "spectrum_cross_sections.svg"));
        verify_manifest(dir.path()).unwrap();

        let text = std::fs::read_to_string(dir.path().join("spectrum.csv")).unwrap();
        let table = Table::parse(&text).unwrap();
        assert_eq!(table.rows.len(), 3);
        assert_eq!(table.render(), text);
        let total = table.column("c_total").unwrap();
        let parts: Vec<f64> = ["c_total_ed", "c_total_md", "c_total_eq", "c_total_mq"]
            .iter()
            .map(|c| table.column(c).unwrap()[1])
            .collect();
        assert!((total[1] - parts.iter().sum::<f64>()).abs() < 1e-12 * total[1].abs());
    }

    #[test]
    fn spectrum_rejects_standing_wave_variants() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = tiny_config(dir.path());
        cfg.excitation.variant = ExcitationVariant::Te4;
        let err = cmd_spectrum(&cfg).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn spectrum_is_byte_deterministic_across_worker_counts() {
        let dir1 = tempfile::tempdir().unwrap();
        let dir2 = tempfile::tempdir().unwrap();
        let mut cfg1 = tiny_config(dir1.path());
        cfg1.detuning.count = 2;
        let mut cfg2 = cfg1.clone();
        cfg2.output.directory = dir2.path().to_path_buf();
        cfg2.workers = 4;
        cmd_spectrum(&cfg1).unwrap();
        cmd_spectrum(&cfg2).unwrap();
        let a = std::fs::read(dir1.path().join("spectrum.csv")).unwrap();
        let b = std::fs::read(dir2.path().join("spectrum.csv")).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn phase_scan_emits_matrix_and_slices() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = tiny_config(dir.path());
        cfg.excitation.variant = ExcitationVariant::Te4;
        let manifest = cmd_phase_scan(&cfg).unwrap();
        assert!(manifest.heatmap_range.is_some());
        verify_manifest(dir.path()).unwrap();

        let text = std::fs::read_to_string(dir.path().join("phase_scan_total.csv")).unwrap();
        let table = Table::parse(&text).unwrap();
        assert_eq!(table.columns.len(), 1 + 5);
        assert_eq!(table.rows.len(), 3);
        // phi = 0 and phi = 2 pi rows of the closed form agree exactly.
        let closed =
            std::fs::read_to_string(dir.path().join("phase_scan_closed_form.csv")).unwrap();
        let closed = Table::parse(&closed).unwrap();
        for row in &closed.rows {
            assert!(
                (row[1] - row[5]).abs() <= 1e-12 * row[1].abs(),
                "phi periodicity violated: {} vs {}",
                row[1],
                row[5]
            );
        }
        let slices =
            std::fs::read_to_string(dir.path().join("phase_scan_slices.csv")).unwrap();
        let slices = Table::parse(&slices).unwrap();
        assert_eq!(slices.rows.len(), 3 * 3);
    }

    #[test]
    fn phase_scan_rejects_plane_wave() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny_config(dir.path());
        assert!(matches!(cmd_phase_scan(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn pattern_quadrature_is_recorded_near_unity() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = tiny_config(dir.path());
        cfg.pattern.n_theta = 16;
        cfg.pattern.n_phi = 32;
        let manifest = cmd_pattern(&cfg).unwrap();
        verify_manifest(dir.path()).unwrap();
        let ratio = manifest
            .noise
            .iter()
            .find(|n| n.name == "quadrature_over_exact")
            .unwrap()
            .value;
        assert!((ratio - 1.0).abs() <= 0.01, "quadrature ratio {ratio}");
        assert!(manifest.files.iter().any(|f| f.name == "pattern_cut_xz.csv"));
        assert!(manifest.files.iter().any(|f| f.name == "pattern_yz.svg"));
    }

    #[test]
    fn validate_passes_on_a_small_healthy_config() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = tiny_config(dir.path());
        cfg.ensemble.realizations = 200;
        cfg.cloud.n_atoms = 8;
        cmd_validate(&cfg).unwrap();
        let text = std::fs::read_to_string(dir.path().join("validation.json")).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["passed"], true);
        assert!(v["checks"].as_array().unwrap().len() >= 6);
    }

    #[test]
    fn validate_reports_the_absorption_inequality_for_lossy_atoms() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = tiny_config(dir.path());
        cfg.ensemble.realizations = 60;
        cfg.gamma_nr = 0.5;
        cmd_validate(&cfg).unwrap();
        let text = std::fs::read_to_string(dir.path().join("validation.json")).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        let names: Vec<&str> = v["checks"]
            .as_array()
            .unwrap()
            .iter()
            .map(|c| c["name"].as_str().unwrap())
            .collect();
        assert!(names.contains(&"single_atom_absorption_inequality"));
        assert!(names.contains(&"absorption_nonnegative"));
        assert!(!names.contains(&"conservation_ed"));
    }
}
