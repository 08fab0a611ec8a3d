//! Monte Carlo orchestration over cloud realizations.
//!
//! Each realization draws atom positions, solves the coupled-dipole
//! system per detuning (one factorization per detuning, right-hand-side
//! re-solves across drive geometries), expands moments, and evaluates the
//! per-realization cross-section functionals. Statistics stream into
//! per-grid-point accumulators.
//!
//! Determinism contract: realization `i` always consumes stream `i` of a
//! ChaCha8 generator seeded with the master seed, realizations are
//! processed in fixed-size chunks, and chunk partials merge in index
//! order, so results are bit-identical for any worker count.
//!
//! Degenerate events (minimum-distance misses, solver condition or
//! residual failures) discard the whole configuration and resample from
//! the same stream; the events are counted and a post-run resample rate
//! above 10% aborts the run, since heavy resampling biases the position
//! distribution.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::atom::AtomModel;
use crate::cloud::{sample_realization, CloudSpec};
use crate::error::{Error, Result};
use crate::excitation::{ExcitationField, FieldDescriptors};
use crate::multipole::{
    coherent_channels, exact_extinction, exact_scattering, extinction_channels, ideal_moments,
    incoherent_channels, multipole_expansion, ChannelBreakdown, CrossSections,
    EffectivePolarizabilities, FluctuationMoments, MultipoleMoments,
};
use crate::solver::{factor, PairCoupling};
use crate::units::{UnitSystem, EPS0, Z0};

/// Post-run abort threshold on `resamples / configurations`.
pub const RESAMPLE_RATE_LIMIT: f64 = 0.10;

/// Realizations per work unit. Fixed so the reduction tree does not
/// depend on the worker count.
const CHUNK: usize = 32;

#[derive(Debug, Clone)]
pub struct EnsembleConfig {
    pub cloud: CloudSpec,
    pub n_realizations: usize,
    pub master_seed: u64,
    /// Reuse one position set across the whole grid per realization.
    /// `false` draws a fresh configuration per detuning (shared across
    /// the drive geometries at that detuning, where the matrix is
    /// identical anyway).
    pub position_reuse: bool,
    /// Maximum discarded configurations per realization.
    pub resample_limit: u32,
    /// Worker threads; 0 uses all available cores. Affects speed only.
    pub workers: usize,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig {
            cloud: CloudSpec::default(),
            n_realizations: 10_000,
            master_seed: 1,
            position_reuse: true,
            resample_limit: 100,
            workers: 0,
        }
    }
}

/// Streaming statistics of one grid point.
#[derive(Debug, Clone)]
pub struct EnsembleStatistics {
    pub n_realizations: usize,
    /// Ensemble-mean moments.
    pub mean: MultipoleMoments,
    /// Raw per-component second moments `<|m|^2>`.
    pub second: FluctuationMoments,
    /// Mean per-channel extinction overlap (the unbiased total cross
    /// section) and its standard errors.
    pub extinction_mean: ChannelBreakdown,
    pub extinction_se: ChannelBreakdown,
    pub extinction_total_se: f64,
    /// `|moment|^2`-route scattering of single realizations (diagnostic;
    /// carries cross-channel incoherent mixing under truncation).
    pub truncated_scattering_mean: f64,
    pub truncated_scattering_se: f64,
    /// Expansion-free oracles.
    pub exact_extinction_mean: f64,
    pub exact_extinction_se: f64,
    pub exact_scattering_mean: f64,
    pub exact_scattering_se: f64,
}

impl EnsembleStatistics {
    /// Central fluctuation moments `<|m|^2> - |<m>|^2`, clamped at zero.
    pub fn fluctuations(&self) -> FluctuationMoments {
        let mut f = FluctuationMoments {
            de: self.second.de,
            dm: self.second.dm,
            qe: self.second.qe,
            qm: self.second.qm,
        };
        for i in 0..3 {
            f.de[i] = (f.de[i] - self.mean.de[i].norm_sqr()).max(0.0);
            f.dm[i] = (f.dm[i] - self.mean.dm[i].norm_sqr()).max(0.0);
            for j in 0..3 {
                f.qe[(i, j)] = (f.qe[(i, j)] - self.mean.qe[(i, j)].norm_sqr()).max(0.0);
                f.qm[(i, j)] = (f.qm[(i, j)] - self.mean.qm[(i, j)].norm_sqr()).max(0.0);
            }
        }
        f
    }

    /// Standard error of each mean-moment component, `sqrt(var/n)`.
    pub fn moment_standard_errors(&self) -> FluctuationMoments {
        let n = self.n_realizations as f64;
        let f = self.fluctuations();
        FluctuationMoments {
            de: f.de.map(|v| (v / n).sqrt()),
            dm: f.dm.map(|v| (v / n).sqrt()),
            qe: f.qe.map(|v| (v / n).sqrt()),
            qm: f.qm.map(|v| (v / n).sqrt()),
        }
    }

    /// Unbiased total cross section (mean extinction overlap).
    pub fn extinction_total(&self) -> f64 {
        self.extinction_mean.sum()
    }

    /// Ensemble cross sections: coherent from mean moments, incoherent
    /// from fluctuations, total from the extinction overlap.
    pub fn cross_sections(&self, field: &ExcitationField, units: &UnitSystem) -> CrossSections {
        CrossSections {
            coherent: coherent_channels(&self.mean, field.e0(), units),
            incoherent: incoherent_channels(&self.fluctuations(), field.e0(), units),
            total: self.extinction_mean,
        }
    }
}

/// Results of one scan: `stats[i_det * fields.len() + i_field]`.
#[derive(Debug, Clone)]
pub struct ScanResult {
    pub detunings: Vec<f64>,
    pub fields: Vec<ExcitationField>,
    pub stats: Vec<EnsembleStatistics>,
    /// Configurations rejected by the minimum-distance gate.
    pub geometry_resamples: u64,
    /// Whole-configuration resamples forced by solver degeneracy.
    pub degeneracy_resamples: u64,
    /// Configurations actually used.
    pub configurations: u64,
}

impl ScanResult {
    pub fn stat(&self, i_det: usize, i_field: usize) -> &EnsembleStatistics {
        &self.stats[i_det * self.fields.len() + i_field]
    }

    pub fn resample_rate(&self) -> f64 {
        (self.geometry_resamples + self.degeneracy_resamples) as f64
            / self.configurations.max(1) as f64
    }
}

/// One realization's contribution at one grid point.
struct PointSample {
    moments: MultipoleMoments,
    x: ChannelBreakdown,
    trunc: f64,
    ext: f64,
    sca: f64,
}

#[derive(Clone)]
struct PointAccum {
    m_sum: MultipoleMoments,
    m2_sum: FluctuationMoments,
    x_sum: ChannelBreakdown,
    x2_sum: ChannelBreakdown,
    xtot2_sum: f64,
    trunc_sum: f64,
    trunc2_sum: f64,
    ext_sum: f64,
    ext2_sum: f64,
    sca_sum: f64,
    sca2_sum: f64,
}

impl PointAccum {
    fn zero() -> Self {
        PointAccum {
            m_sum: MultipoleMoments::zero(),
            m2_sum: FluctuationMoments {
                de: nalgebra::Vector3::zeros(),
                dm: nalgebra::Vector3::zeros(),
                qe: nalgebra::Matrix3::zeros(),
                qm: nalgebra::Matrix3::zeros(),
            },
            x_sum: ChannelBreakdown::default(),
            x2_sum: ChannelBreakdown::default(),
            xtot2_sum: 0.0,
            trunc_sum: 0.0,
            trunc2_sum: 0.0,
            ext_sum: 0.0,
            ext2_sum: 0.0,
            sca_sum: 0.0,
            sca2_sum: 0.0,
        }
    }

    fn add_sample(&mut self, s: &PointSample) {
        self.m_sum.accumulate(&s.moments);
        for i in 0..3 {
            self.m2_sum.de[i] += s.moments.de[i].norm_sqr();
            self.m2_sum.dm[i] += s.moments.dm[i].norm_sqr();
            for j in 0..3 {
                self.m2_sum.qe[(i, j)] += s.moments.qe[(i, j)].norm_sqr();
                self.m2_sum.qm[(i, j)] += s.moments.qm[(i, j)].norm_sqr();
            }
        }
        self.x_sum.accumulate(&s.x);
        self.x2_sum.accumulate(&s.x.squared());
        let xt = s.x.sum();
        self.xtot2_sum += xt * xt;
        self.trunc_sum += s.trunc;
        self.trunc2_sum += s.trunc * s.trunc;
        self.ext_sum += s.ext;
        self.ext2_sum += s.ext * s.ext;
        self.sca_sum += s.sca;
        self.sca2_sum += s.sca * s.sca;
    }

    fn merge(&mut self, other: &PointAccum) {
        self.m_sum.accumulate(&other.m_sum);
        self.m2_sum.de += other.m2_sum.de;
        self.m2_sum.dm += other.m2_sum.dm;
        self.m2_sum.qe += other.m2_sum.qe;
        self.m2_sum.qm += other.m2_sum.qm;
        self.x_sum.accumulate(&other.x_sum);
        self.x2_sum.accumulate(&other.x2_sum);
        self.xtot2_sum += other.xtot2_sum;
        self.trunc_sum += other.trunc_sum;
        self.trunc2_sum += other.trunc2_sum;
        self.ext_sum += other.ext_sum;
        self.ext2_sum += other.ext2_sum;
        self.sca_sum += other.sca_sum;
        self.sca2_sum += other.sca2_sum;
    }

    fn finalize(&self, n: usize) -> EnsembleStatistics {
        let nf = n as f64;
        let se_of = |sum: f64, sum2: f64| {
            let mean = sum / nf;
            ((sum2 / nf - mean * mean).max(0.0) / nf).sqrt()
        };
        let xa = self.x_sum.as_array();
        let x2a = self.x2_sum.as_array();
        let mut se = [0.0; 4];
        for i in 0..4 {
            se[i] = se_of(xa[i], x2a[i]);
        }
        EnsembleStatistics {
            n_realizations: n,
            mean: self.m_sum.scaled(1.0 / nf),
            second: FluctuationMoments {
                de: self.m2_sum.de / nf,
                dm: self.m2_sum.dm / nf,
                qe: self.m2_sum.qe / nf,
                qm: self.m2_sum.qm / nf,
            },
            extinction_mean: self.x_sum.scaled(1.0 / nf),
            extinction_se: ChannelBreakdown::from_array(se),
            extinction_total_se: se_of(self.x_sum.sum(), self.xtot2_sum),
            truncated_scattering_mean: self.trunc_sum / nf,
            truncated_scattering_se: se_of(self.trunc_sum, self.trunc2_sum),
            exact_extinction_mean: self.ext_sum / nf,
            exact_extinction_se: se_of(self.ext_sum, self.ext2_sum),
            exact_scattering_mean: self.sca_sum / nf,
            exact_scattering_se: se_of(self.sca_sum, self.sca2_sum),
        }
    }
}

fn point_sample(
    positions: &[nalgebra::Vector3<f64>],
    coupling: &PairCoupling,
    dipoles: &[nalgebra::Vector3<Complex64>],
    field: &ExcitationField,
    desc: &FieldDescriptors,
    units: &UnitSystem,
) -> PointSample {
    let e0 = field.e0();
    let m = multipole_expansion(positions, dipoles, units.k);
    PointSample {
        x: extinction_channels(&m, desc, e0, units),
        trunc: coherent_channels(&m, e0, units).sum(),
        ext: exact_extinction(positions, dipoles, field, units),
        sca: exact_scattering(coupling, dipoles, e0, units),
        moments: m,
    }
}

fn budget_check(limit: u32, used: u64, index: u64) -> Result<()> {
    if used > limit as u64 {
        return Err(Error::Degenerate(format!(
            "realization {index}: {used} resamples exceeded the limit of {limit}"
        )));
    }
    Ok(())
}

fn remaining_budget(limit: u32, used: u64) -> u32 {
    (limit as u64).saturating_sub(used) as u32
}

/// All grid samples of one realization, plus (geometry, degeneracy)
/// resample counts.
fn run_realization(
    cfg: &EnsembleConfig,
    atom: &AtomModel,
    units: &UnitSystem,
    detunings: &[f64],
    fields: &[ExcitationField],
    descriptors: &[FieldDescriptors],
    index: u64,
) -> Result<(Vec<PointSample>, u64, u64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.master_seed);
    rng.set_stream(index);
    let mut geo = 0u64;
    let mut deg = 0u64;
    let limit = cfg.resample_limit;

    if cfg.position_reuse {
        'config: loop {
            let (real, rejected) =
                sample_realization(&cfg.cloud, &mut rng, remaining_budget(limit, geo + deg))?;
            geo += rejected as u64;
            let coupling = match PairCoupling::build(&real.positions, units.k) {
                Ok(c) => c,
                Err(Error::Degenerate(_)) => {
                    deg += 1;
                    budget_check(limit, geo + deg, index)?;
                    continue 'config;
                }
                Err(e) => return Err(e),
            };
            let mut samples = Vec::with_capacity(detunings.len() * fields.len());
            for &det in detunings {
                let alpha = atom.polarizability(det, units);
                let fac = match factor(coupling.assemble(alpha)) {
                    Ok(f) => f,
                    Err(Error::Degenerate(_)) => {
                        deg += 1;
                        budget_check(limit, geo + deg, index)?;
                        continue 'config;
                    }
                    Err(e) => return Err(e),
                };
                for (field, desc) in fields.iter().zip(descriptors) {
                    let sol = match fac.solve_excitation(&real.positions, field, units.k) {
                        Ok(s) => s,
                        Err(Error::Degenerate(_)) => {
                            deg += 1;
                            budget_check(limit, geo + deg, index)?;
                            continue 'config;
                        }
                        Err(e) => return Err(e),
                    };
                    samples.push(point_sample(
                        &real.positions,
                        &coupling,
                        &sol.dipoles,
                        field,
                        desc,
                        units,
                    ));
                }
            }
            return Ok((samples, geo, deg));
        }
    }

    let mut samples = Vec::with_capacity(detunings.len() * fields.len());
    for &det in detunings {
        let alpha = atom.polarizability(det, units);
        'point: loop {
            let (real, rejected) =
                sample_realization(&cfg.cloud, &mut rng, remaining_budget(limit, geo + deg))?;
            geo += rejected as u64;
            let coupling = match PairCoupling::build(&real.positions, units.k) {
                Ok(c) => c,
                Err(Error::Degenerate(_)) => {
                    deg += 1;
                    budget_check(limit, geo + deg, index)?;
                    continue 'point;
                }
                Err(e) => return Err(e),
            };
            let fac = match factor(coupling.assemble(alpha)) {
                Ok(f) => f,
                Err(Error::Degenerate(_)) => {
                    deg += 1;
                    budget_check(limit, geo + deg, index)?;
                    continue 'point;
                }
                Err(e) => return Err(e),
            };
            let mut point_samples = Vec::with_capacity(fields.len());
            let mut degenerate = false;
            for (field, desc) in fields.iter().zip(descriptors) {
                match fac.solve_excitation(&real.positions, field, units.k) {
                    Ok(sol) => point_samples.push(point_sample(
                        &real.positions,
                        &coupling,
                        &sol.dipoles,
                        field,
                        desc,
                        units,
                    )),
                    Err(Error::Degenerate(_)) => {
                        degenerate = true;
                        break;
                    }
                    Err(e) => return Err(e),
                }
            }
            if degenerate {
                deg += 1;
                budget_check(limit, geo + deg, index)?;
                continue 'point;
            }
            samples.extend(point_samples);
            break 'point;
        }
    }
    Ok((samples, geo, deg))
}

/// Run the Monte Carlo scan over the detuning x drive grid.
pub fn run_ensemble(
    cfg: &EnsembleConfig,
    atom: &AtomModel,
    units: &UnitSystem,
    detunings: &[f64],
    fields: &[ExcitationField],
) -> Result<ScanResult> {
    if cfg.n_realizations == 0 {
        return Err(Error::Config("n_realizations must be at least 1".into()));
    }
    if cfg.resample_limit == 0 {
        return Err(Error::Config("resample_limit must be at least 1".into()));
    }
    if detunings.is_empty() || fields.is_empty() {
        return Err(Error::Config(
            "the scan grid needs at least one detuning and one drive".into(),
        ));
    }
    let descriptors: Vec<FieldDescriptors> = fields
        .iter()
        .map(|f| f.descriptors_at_origin(units.k))
        .collect();
    let n_grid = detunings.len() * fields.len();

    let work = || -> Result<(Vec<PointAccum>, u64, u64)> {
        let n_chunks = cfg.n_realizations.div_ceil(CHUNK);
        let partials: Result<Vec<(Vec<PointAccum>, u64, u64)>> = (0..n_chunks)
            .into_par_iter()
            .map(|chunk| {
                let lo = chunk * CHUNK;
                let hi = ((chunk + 1) * CHUNK).min(cfg.n_realizations);
                let mut acc = vec![PointAccum::zero(); n_grid];
                let mut geo = 0u64;
                let mut deg = 0u64;
                for idx in lo..hi {
                    let (samples, g, d) = run_realization(
                        cfg,
                        atom,
                        units,
                        detunings,
                        fields,
                        &descriptors,
                        idx as u64,
                    )?;
                    geo += g;
                    deg += d;
                    for (a, s) in acc.iter_mut().zip(&samples) {
                        a.add_sample(s);
                    }
                }
                Ok((acc, geo, deg))
            })
            .collect();
        let mut total = vec![PointAccum::zero(); n_grid];
        let mut geo = 0u64;
        let mut deg = 0u64;
        for (acc, g, d) in partials? {
            for (t, a) in total.iter_mut().zip(&acc) {
                t.merge(a);
            }
            geo += g;
            deg += d;
        }
        Ok((total, geo, deg))
    };

    let (accum, geo, deg) = if cfg.workers == 0 {
        work()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build()
            .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
        pool.install(work)?
    };

    let configurations = if cfg.position_reuse {
        cfg.n_realizations as u64
    } else {
        (cfg.n_realizations * detunings.len()) as u64
    };
    let result = ScanResult {
        detunings: detunings.to_vec(),
        fields: fields.to_vec(),
        stats: accum
            .iter()
            .map(|a| a.finalize(cfg.n_realizations))
            .collect(),
        geometry_resamples: geo,
        degeneracy_resamples: deg,
        configurations,
    };
    if result.resample_rate() > RESAMPLE_RATE_LIMIT {
        return Err(Error::Degenerate(format!(
            "resample rate {:.3} exceeds {RESAMPLE_RATE_LIMIT} \
             ({} geometry + {} degeneracy events over {} configurations)",
            result.resample_rate(),
            result.geometry_resamples,
            result.degeneracy_resamples,
            result.configurations
        )));
    }
    Ok(result)
}

/// Ensemble-averaged far-field statistics on a fixed direction set; all
/// intensities are normalized differential cross sections `dC/dOmega`.
#[derive(Debug, Clone)]
pub struct PatternStatistics {
    pub directions: Vec<nalgebra::Vector3<f64>>,
    /// `<dC/dOmega>` per direction.
    pub total: Vec<f64>,
    pub total_se: Vec<f64>,
    /// Coherent part from the mean far-field amplitude.
    pub coherent: Vec<f64>,
    pub exact_scattering_mean: f64,
    pub n_realizations: usize,
    pub geometry_resamples: u64,
    pub degeneracy_resamples: u64,
}

struct PatternAccum {
    amp_sum: Vec<nalgebra::Vector3<Complex64>>,
    i_sum: Vec<f64>,
    i2_sum: Vec<f64>,
    sca_sum: f64,
}

impl PatternAccum {
    fn zero(n: usize) -> Self {
        PatternAccum {
            amp_sum: vec![nalgebra::Vector3::zeros(); n],
            i_sum: vec![0.0; n],
            i2_sum: vec![0.0; n],
            sca_sum: 0.0,
        }
    }

    fn merge(&mut self, other: &PatternAccum) {
        for i in 0..self.amp_sum.len() {
            self.amp_sum[i] += other.amp_sum[i];
            self.i_sum[i] += other.i_sum[i];
            self.i2_sum[i] += other.i2_sum[i];
        }
        self.sca_sum += other.sca_sum;
    }
}

/// Monte Carlo far-field pattern at one detuning and one drive.
pub fn run_pattern_ensemble(
    cfg: &EnsembleConfig,
    atom: &AtomModel,
    units: &UnitSystem,
    detuning: f64,
    field: &ExcitationField,
    directions: &[nalgebra::Vector3<f64>],
) -> Result<PatternStatistics> {
    if cfg.n_realizations == 0 {
        return Err(Error::Config("n_realizations must be at least 1".into()));
    }
    if directions.is_empty() {
        return Err(Error::Config("the direction grid is empty".into()));
    }
    let alpha = atom.polarizability(detuning, units);
    let e0 = field.e0();
    let pre = crate::multipole::pattern_prefactor(e0, units);
    let n_dir = directions.len();

    let run_one = |index: u64| -> Result<(PatternAccum, u64, u64)> {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.master_seed);
        rng.set_stream(index);
        let mut geo = 0u64;
        let mut deg = 0u64;
        let limit = cfg.resample_limit;
        'config: loop {
            let (real, rejected) =
                sample_realization(&cfg.cloud, &mut rng, remaining_budget(limit, geo + deg))?;
            geo += rejected as u64;
            let solved = PairCoupling::build(&real.positions, units.k).and_then(|coupling| {
                let fac = factor(coupling.assemble(alpha))?;
                let sol = fac.solve_excitation(&real.positions, field, units.k)?;
                Ok((coupling, sol))
            });
            let (coupling, sol) = match solved {
                Ok(v) => v,
                Err(Error::Degenerate(_)) => {
                    deg += 1;
                    budget_check(limit, geo + deg, index)?;
                    continue 'config;
                }
                Err(e) => return Err(e),
            };
            let mut acc = PatternAccum::zero(n_dir);
            for (i, dir) in directions.iter().enumerate() {
                let amp =
                    crate::multipole::far_field_amplitude(&real.positions, &sol.dipoles, units.k, dir);
                let intensity = pre * amp.norm_squared();
                acc.amp_sum[i] = amp;
                acc.i_sum[i] = intensity;
                acc.i2_sum[i] = intensity * intensity;
            }
            acc.sca_sum = exact_scattering(&coupling, &sol.dipoles, e0, units);
            return Ok((acc, geo, deg));
        }
    };

    let work = || -> Result<(PatternAccum, u64, u64)> {
        let n_chunks = cfg.n_realizations.div_ceil(CHUNK);
        let partials: Result<Vec<(PatternAccum, u64, u64)>> = (0..n_chunks)
            .into_par_iter()
            .map(|chunk| {
                let lo = chunk * CHUNK;
                let hi = ((chunk + 1) * CHUNK).min(cfg.n_realizations);
                let mut acc = PatternAccum::zero(n_dir);
                let mut geo = 0u64;
                let mut deg = 0u64;
                for idx in lo..hi {
                    let (one, g, d) = run_one(idx as u64)?;
                    acc.merge(&one);
                    geo += g;
                    deg += d;
                }
                Ok((acc, geo, deg))
            })
            .collect();
        let mut total = PatternAccum::zero(n_dir);
        let mut geo = 0u64;
        let mut deg = 0u64;
        for (acc, g, d) in partials? {
            total.merge(&acc);
            geo += g;
            deg += d;
        }
        Ok((total, geo, deg))
    };

    let (acc, geo, deg) = if cfg.workers == 0 {
        work()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build()
            .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
        pool.install(work)?
    };

    let n = cfg.n_realizations as f64;
    let rate = (geo + deg) as f64 / cfg.n_realizations.max(1) as f64;
    if rate > RESAMPLE_RATE_LIMIT {
        return Err(Error::Degenerate(format!(
            "resample rate {rate:.3} exceeds {RESAMPLE_RATE_LIMIT}"
        )));
    }
    let mut total = vec![0.0; n_dir];
    let mut total_se = vec![0.0; n_dir];
    let mut coherent = vec![0.0; n_dir];
    for i in 0..n_dir {
        let mean = acc.i_sum[i] / n;
        total[i] = mean;
        total_se[i] = ((acc.i2_sum[i] / n - mean * mean).max(0.0) / n).sqrt();
        coherent[i] = pre * (acc.amp_sum[i] / Complex64::new(n, 0.0)).norm_squared();
    }
    Ok(PatternStatistics {
        directions: directions.to_vec(),
        total,
        total_se,
        coherent,
        exact_scattering_mean: acc.sca_sum / n,
        n_realizations: cfg.n_realizations,
        geometry_resamples: geo,
        degeneracy_resamples: deg,
    })
}

/// Retrieved polarizabilities with their fluctuation statistics, all in
/// bare polarizability units (divide by `alpha0`/`alpha0'` to normalize).
#[derive(Debug, Clone)]
pub struct PolarizabilityStatistics {
    pub alphas: EffectivePolarizabilities,
    /// Standard errors of the four retrieved means (modulus scale).
    pub alpha_se: [f64; 4],
    /// Off-diagonal electric-dipole response `dE_{y,z}/(eps0 E0)`: zero
    /// mean for an isotropic ensemble.
    pub ed_offdiag: [Complex64; 2],
    pub ed_offdiag_se: [f64; 2],
    /// `<|d alpha_ED^D|^2>` from the driven component.
    pub fluct_ed_d: f64,
    /// `<|d alpha_ED^OD|^2>` pooled over the two undriven components.
    pub fluct_ed_od: f64,
    pub fluct_md_d: f64,
    pub fluct_md_od: f64,
    /// `sum_{mu nu} <|d QE_{mu nu}|^2> / (eps0 k E0)^2` (alpha'-squared
    /// units; the conservation identity weighs it with a factor 2).
    pub fluct_eq_sum: f64,
    pub fluct_mq_sum: f64,
    pub n_realizations: usize,
}

/// Map single-plane-wave moment statistics onto effective
/// polarizabilities. Any other drive is a contract violation.
pub fn retrieve_polarizabilities(
    stats: &EnsembleStatistics,
    field: &ExcitationField,
    units: &UnitSystem,
) -> Result<PolarizabilityStatistics> {
    let e0 = match *field {
        ExcitationField::PlaneWave { e0 } => e0,
        _ => {
            return Err(Error::Config(
                "polarizability retrieval requires the single-plane-wave drive".into(),
            ))
        }
    };
    let fe = EPS0 * e0;
    let h0 = e0 / Z0;
    let ik = Complex64::new(0.0, units.k);
    let n = stats.n_realizations as f64;
    let fl = stats.fluctuations();
    let alphas = EffectivePolarizabilities {
        ed: stats.mean.de.x / fe,
        md: stats.mean.dm.y / h0,
        eq: stats.mean.qe[(0, 2)] * 2.0 / (ik * fe),
        mq: stats.mean.qm[(1, 2)] * 2.0 / (ik * h0),
    };
    let alpha_se = [
        (fl.de.x / n).sqrt() / fe,
        (fl.dm.y / n).sqrt() / h0,
        (fl.qe[(0, 2)] / n).sqrt() * 2.0 / (units.k * fe),
        (fl.qm[(1, 2)] / n).sqrt() * 2.0 / (units.k * h0),
    ];
    Ok(PolarizabilityStatistics {
        alphas,
        alpha_se,
        ed_offdiag: [stats.mean.de.y / fe, stats.mean.de.z / fe],
        ed_offdiag_se: [(fl.de.y / n).sqrt() / fe, (fl.de.z / n).sqrt() / fe],
        fluct_ed_d: fl.de.x / (fe * fe),
        fluct_ed_od: (fl.de.y + fl.de.z) / (2.0 * fe * fe),
        fluct_md_d: fl.dm.y / (h0 * h0),
        fluct_md_od: (fl.dm.x + fl.dm.z) / (2.0 * h0 * h0),
        fluct_eq_sum: fl.qe.sum() / (units.k * fe).powi(2),
        fluct_mq_sum: fl.qm.sum() / (units.k * h0).powi(2),
        n_realizations: stats.n_realizations,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct ConservationRecord {
    pub channel: &'static str,
    /// `Im(a/a0) - |a/a0|^2`.
    pub lhs: f64,
    /// Matching fluctuation sum.
    pub rhs: f64,
    /// Relative residual, or absolute when the identity is trivially 0=0.
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct ConservationReport {
    pub records: [ConservationRecord; 4],
}

/// Energy-conservation identities linking the mean polarizabilities to
/// the fluctuation statistics:
///
/// ```text
/// Im(a_ED/a0) - |a_ED/a0|^2 = [<|da^D|^2> + 2 <|da^OD|^2>] / a0^2
/// Im(a_EQ/a0') - |a_EQ/a0'|^2 = 2 sum <|d QE|^2> / (eps0 k E0 a0')^2
/// ```
///
/// and the MD/MQ analogs. Exact as N_R -> infinity for a lossless atom.
pub fn conservation_check(
    pol: &PolarizabilityStatistics,
    units: &UnitSystem,
) -> ConservationReport {
    let a = pol.alphas.normalized(units);
    let a0 = units.alpha0();
    let a0p = units.alpha0_prime();
    let rhs = [
        (pol.fluct_ed_d + 2.0 * pol.fluct_ed_od) / (a0 * a0),
        (pol.fluct_md_d + 2.0 * pol.fluct_md_od) / (a0 * a0),
        2.0 * pol.fluct_eq_sum / (a0p * a0p),
        2.0 * pol.fluct_mq_sum / (a0p * a0p),
    ];
    let names = ["ED", "MD", "EQ", "MQ"];
    let mut records = [ConservationRecord {
        channel: "",
        lhs: 0.0,
        rhs: 0.0,
        residual: 0.0,
    }; 4];
    for i in 0..4 {
        let lhs = a[i].im - a[i].norm_sqr();
        let residual = if lhs.abs() < 1e-13 {
            (lhs - rhs[i]).abs()
        } else {
            ((lhs - rhs[i]) / lhs).abs()
        };
        records[i] = ConservationRecord {
            channel: names[i],
            lhs,
            rhs: rhs[i],
            residual,
        };
    }
    ConservationReport { records }
}

#[derive(Debug, Clone, Copy)]
pub struct SelectivityRecord {
    pub channel: &'static str,
    /// Norm of (measured mean - prediction) over the channel components.
    pub deviation: f64,
    /// Norm of the prediction.
    pub predicted: f64,
    /// Noise floor: root-sum-square standard error of the measured
    /// channel components.
    pub noise: f64,
}

/// Compare measured mean moments of a standing-wave ensemble against the
/// predictions from single-plane-wave-retrieved polarizabilities.
pub fn verify_selective_excitation(
    stats: &EnsembleStatistics,
    pol: &EffectivePolarizabilities,
    field: &ExcitationField,
    units: &UnitSystem,
) -> [SelectivityRecord; 4] {
    let ideal = ideal_moments(pol, field, units);
    let se = stats.moment_standard_errors();
    let rss3 = |v: &nalgebra::Vector3<f64>| v.norm();
    let rss9 = |m: &nalgebra::Matrix3<f64>| m.norm();
    [
        SelectivityRecord {
            channel: "ED",
            deviation: (stats.mean.de - ideal.de).norm(),
            predicted: ideal.de.norm(),
            noise: rss3(&se.de),
        },
        SelectivityRecord {
            channel: "MD",
            deviation: (stats.mean.dm - ideal.dm).norm(),
            predicted: ideal.dm.norm(),
            noise: rss3(&se.dm),
        },
        SelectivityRecord {
            channel: "EQ",
            deviation: (stats.mean.qe - ideal.qe).norm(),
            predicted: ideal.qe.norm(),
            noise: rss9(&se.qe),
        },
        SelectivityRecord {
            channel: "MQ",
            deviation: (stats.mean.qm - ideal.qm).norm(),
            predicted: ideal.qm.norm(),
            noise: rss9(&se.qm),
        },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multipole::cross_sections_from_polarizabilities;
    use crate::solver::solve_coupled_dipoles;

    const PI: f64 = std::f64::consts::PI;

    fn small_cfg(n_atoms: usize, n_realizations: usize) -> EnsembleConfig {
        EnsembleConfig {
            cloud: CloudSpec {
                n_atoms,
                radius: 0.2,
                min_separation: 1e-3,
            },
            n_realizations,
            master_seed: 42,
            position_reuse: true,
            resample_limit: 100,
            workers: 1,
        }
    }

    #[test]
    fn single_realization_mean_matches_direct_solve() {
        let u = UnitSystem::natural();
        let atom = AtomModel::lossless();
        let cfg = small_cfg(5, 1);
        let field = ExcitationField::PlaneWave { e0: 1.0 };
        let out = run_ensemble(&cfg, &atom, &u, &[0.3], &[field]).unwrap();
        let stats = out.stat(0, 0);

        let mut rng = ChaCha8Rng::seed_from_u64(cfg.master_seed);
        rng.set_stream(0);
        let (real, _) = sample_realization(&cfg.cloud, &mut rng, 100).unwrap();
        let alpha = atom.polarizability(0.3, &u);
        let sol = solve_coupled_dipoles(&real.positions, alpha, &field, u.k).unwrap();
        let m = multipole_expansion(&real.positions, &sol.dipoles, u.k);

        assert!((stats.mean.de - m.de).norm() < 1e-15);
        assert!((stats.mean.qm - m.qm).norm() < 1e-15);
        let f = stats.fluctuations();
        assert_eq!(f.de.sum() + f.dm.sum() + f.qe.sum() + f.qm.sum(), 0.0);
        assert_eq!(stats.extinction_total_se, 0.0);
        assert_eq!(stats.exact_extinction_se, 0.0);
    }

    #[test]
    fn statistics_are_bit_identical_across_worker_counts() {
        let u = UnitSystem::natural();
        let atom = AtomModel::lossless();
        let mut cfg = small_cfg(6, 40);
        let fields = [
            ExcitationField::FourWaveTe { e0: 1.0, phi: 0.0, psi: PI / 4.0 },
            ExcitationField::FourWaveTe { e0: 1.0, phi: PI, psi: PI / 4.0 },
        ];
        let detunings = [0.0, 0.8];
        cfg.workers = 1;
        let a = run_ensemble(&cfg, &atom, &u, &detunings, &fields).unwrap();
        cfg.workers = 4;
        let b = run_ensemble(&cfg, &atom, &u, &detunings, &fields).unwrap();
        assert_eq!(a.geometry_resamples, b.geometry_resamples);
        for (sa, sb) in a.stats.iter().zip(&b.stats) {
            for i in 0..3 {
                assert_eq!(sa.mean.de[i].re.to_bits(), sb.mean.de[i].re.to_bits());
                assert_eq!(sa.mean.de[i].im.to_bits(), sb.mean.de[i].im.to_bits());
                assert_eq!(sa.mean.qm[(i, 2)].re.to_bits(), sb.mean.qm[(i, 2)].re.to_bits());
            }
            assert_eq!(
                sa.extinction_mean.sum().to_bits(),
                sb.extinction_mean.sum().to_bits()
            );
            assert_eq!(
                sa.exact_scattering_mean.to_bits(),
                sb.exact_scattering_mean.to_bits()
            );
            assert_eq!(
                sa.extinction_total_se.to_bits(),
                sb.extinction_total_se.to_bits()
            );
        }
    }

    #[test]
    fn retrieval_rejects_standing_wave_statistics() {
        let u = UnitSystem::natural();
        let atom = AtomModel::lossless();
        let cfg = small_cfg(4, 2);
        let field = ExcitationField::FourWaveTe { e0: 1.0, phi: 0.0, psi: PI / 4.0 };
        let out = run_ensemble(&cfg, &atom, &u, &[0.0], &[field]).unwrap();
        let err = retrieve_polarizabilities(out.stat(0, 0), &field, &u).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn fixed_single_atom_retrieves_bare_polarizability() {
        let u = UnitSystem::natural();
        let atom = AtomModel::lossless();
        let mut cfg = small_cfg(1, 4);
        cfg.cloud.radius = 0.0;
        let field = ExcitationField::PlaneWave { e0: 1.0 };
        let det = 0.7;
        let out = run_ensemble(&cfg, &atom, &u, &[det], &[field]).unwrap();
        let pol = retrieve_polarizabilities(out.stat(0, 0), &field, &u).unwrap();
        let want = atom.polarizability(det, &u);
        assert!((pol.alphas.ed - want).norm() < 1e-14 * want.norm());
        assert!(pol.alphas.md.norm() < 1e-14);
        assert!(pol.alphas.eq.norm() < 1e-14);
        assert!(pol.alphas.mq.norm() < 1e-14);
        assert!(pol.ed_offdiag[0].norm() < 1e-14 && pol.ed_offdiag[1].norm() < 1e-14);
        assert!(pol.fluct_ed_d < 1e-28 && pol.fluct_ed_od < 1e-28);

        // Identical realizations: the optical theorem zeroes both sides.
        let report = conservation_check(&pol, &u);
        assert!(report.records[0].lhs.abs() < 1e-14);
        assert!(report.records[0].rhs.abs() < 1e-28);
        assert!(report.records[0].residual < 1e-13);
    }

    #[test]
    fn conservation_identities_hold_statistically() {
        let u = UnitSystem::natural();
        let atom = AtomModel::lossless();
        let cfg = small_cfg(8, 400);
        let field = ExcitationField::PlaneWave { e0: 1.0 };
        let out = run_ensemble(&cfg, &atom, &u, &[0.0], &[field]).unwrap();
        let pol = retrieve_polarizabilities(out.stat(0, 0), &field, &u).unwrap();
        let report = conservation_check(&pol, &u);
        assert!(
            report.records[0].residual < 0.2,
            "ED residual {}",
            report.records[0].residual
        );
        assert!(
            report.records[1].residual < 0.5,
            "MD residual {}",
            report.records[1].residual
        );
        for r in &report.records {
            assert!(r.rhs >= 0.0);
        }
        // Off-diagonal means vanish within the noise.
        for (m, se) in pol.ed_offdiag.iter().zip(&pol.ed_offdiag_se) {
            assert!(m.norm() <= 5.0 * se, "offdiag {} vs se {}", m.norm(), se);
        }
    }

    #[test]
    fn selective_drive_matches_retrieved_predictions() {
        let u = UnitSystem::natural();
        let atom = AtomModel::lossless();
        let cfg = small_cfg(6, 300);
        let pw = ExcitationField::PlaneWave { e0: 1.0 };
        let te = ExcitationField::FourWaveTe { e0: 1.0, phi: PI, psi: PI / 4.0 };
        let det = 0.0;
        let pw_out = run_ensemble(&cfg, &atom, &u, &[det], &[pw]).unwrap();
        let pol = retrieve_polarizabilities(pw_out.stat(0, 0), &pw, &u).unwrap();
        let te_out = run_ensemble(&cfg, &atom, &u, &[det], &[te]).unwrap();
        let report = verify_selective_excitation(te_out.stat(0, 0), &pol.alphas, &te, &u);
        // phi = pi, psi = pi/4: only the magnetic quadrupole is driven.
        for r in &report[..3] {
            assert!(r.predicted < 1e-14, "{} predicted {}", r.channel, r.predicted);
            assert!(
                r.deviation <= 5.0 * r.noise,
                "{}: {} vs noise {}",
                r.channel,
                r.deviation,
                r.noise
            );
        }
        let mq = &report[3];
        assert!(
            mq.predicted > 5.0 * mq.noise,
            "MQ target should be resolved: {} vs noise {}",
            mq.predicted,
            mq.noise
        );
        assert!(
            mq.deviation <= 5.0 * (mq.noise + pol.alpha_se[3] * u.k / Z0),
            "MQ deviation {} noise {}",
            mq.deviation,
            mq.noise
        );
    }

    #[test]
    fn total_cross_section_matches_closed_form_through_both_routes() {
        let u = UnitSystem::natural();
        let atom = AtomModel::lossless();
        let cfg = small_cfg(6, 300);
        let pw = ExcitationField::PlaneWave { e0: 1.0 };
        let out = run_ensemble(&cfg, &atom, &u, &[0.0], &[pw]).unwrap();
        let stats = out.stat(0, 0);
        let pol = retrieve_polarizabilities(stats, &pw, &u).unwrap();
        let closed = cross_sections_from_polarizabilities(&pol.alphas, &pw, &u);
        let measured = stats.extinction_total();
        assert!(
            (measured - closed.total.sum()).abs() <= 1e-10 * measured.abs(),
            "extinction route should reproduce the closed form exactly on the same data: \
             {measured} vs {}",
            closed.total.sum()
        );
    }

    #[test]
    fn position_reuse_is_unbiased() {
        let u = UnitSystem::natural();
        let atom = AtomModel::lossless();
        let mut cfg = small_cfg(6, 300);
        let pw = ExcitationField::PlaneWave { e0: 1.0 };
        let a = run_ensemble(&cfg, &atom, &u, &[0.0], &[pw]).unwrap();
        cfg.position_reuse = false;
        cfg.master_seed = 43;
        let b = run_ensemble(&cfg, &atom, &u, &[0.0], &[pw]).unwrap();
        let pa = retrieve_polarizabilities(a.stat(0, 0), &pw, &u).unwrap();
        let pb = retrieve_polarizabilities(b.stat(0, 0), &pw, &u).unwrap();
        let se = (pa.alpha_se[0].powi(2) + pb.alpha_se[0].powi(2)).sqrt();
        assert!(
            (pa.alphas.ed - pb.alphas.ed).norm() <= 5.0 * se,
            "ed {} vs {} (se {se})",
            pa.alphas.ed,
            pb.alphas.ed
        );
    }

    #[test]
    fn pattern_quadrature_recovers_the_scattering_cross_section() {
        let u = UnitSystem::natural();
        let atom = AtomModel::lossless();
        let cfg = small_cfg(6, 50);
        let field = ExcitationField::PlaneWave { e0: 1.0 };
        let (dirs, w) = crate::quadrature::sphere_product_grid(16, 32);
        let pat = run_pattern_ensemble(&cfg, &atom, &u, 0.0, &field, &dirs).unwrap();
        let total: f64 = pat.total.iter().zip(&w).map(|(i, wi)| i * wi).sum();
        assert!(
            (total - pat.exact_scattering_mean).abs() <= 1e-2 * pat.exact_scattering_mean,
            "quadrature {total} vs bilinear {}",
            pat.exact_scattering_mean
        );
        let coherent: f64 = pat.coherent.iter().zip(&w).map(|(i, wi)| i * wi).sum();
        assert!(coherent > 0.0 && coherent < total);
    }

    #[test]
    fn pattern_rejects_an_empty_direction_grid() {
        let u = UnitSystem::natural();
        let atom = AtomModel::lossless();
        let cfg = small_cfg(4, 2);
        let err = run_pattern_ensemble(
            &cfg,
            &atom,
            &u,
            0.0,
            &ExcitationField::PlaneWave { e0: 1.0 },
            &[],
        )
        .unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn excessive_resampling_aborts_the_run() {
        let u = UnitSystem::natural();
        let atom = AtomModel::lossless();
        let mut cfg = small_cfg(10, 10);
        cfg.cloud.min_separation = 0.13;
        cfg.resample_limit = 500;
        let err = run_ensemble(&cfg, &atom, &u, &[0.0], &[ExcitationField::PlaneWave { e0: 1.0 }])
            .unwrap_err();
        assert!(matches!(err, Error::Degenerate(_)), "{err:?}");
    }
}
