//! Run configuration: flat `key = value` text grouped by `[section]`
//! headers. Unknown sections or keys are rejected with the offending
//! line number; `#` starts a comment. Every key has a default, so an
//! empty file is a valid configuration.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde_json::json;

use crate::cloud::CloudSpec;
use crate::ensemble::EnsembleConfig;
use crate::error::{Error, Result};
use crate::excitation::ExcitationField;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExcitationVariant {
    Pw,
    Te4,
    Tm4,
}

impl ExcitationVariant {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExcitationVariant::Pw => "pw",
            ExcitationVariant::Te4 => "te4",
            ExcitationVariant::Tm4 => "tm4",
        }
    }
}

impl FromStr for ExcitationVariant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "pw" => Ok(ExcitationVariant::Pw),
            "te4" => Ok(ExcitationVariant::Te4),
            "tm4" => Ok(ExcitationVariant::Tm4),
            other => Err(format!(
                "unknown excitation variant '{other}' (expected pw, te4, or tm4)"
            )),
        }
    }
}

/// Uniform grid, inclusive endpoints; `count == 1` collapses to `min`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl GridSpec {
    pub fn points(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.min];
        }
        let step = (self.max - self.min) / (self.count - 1) as f64;
        (0..self.count).map(|i| self.min + step * i as f64).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExcitationSpec {
    pub variant: ExcitationVariant,
    /// Beam half-opening angle from the z axis (four-wave variants).
    pub psi: f64,
    /// Standing-wave phase for single-phase commands.
    pub phi: f64,
    /// Phase grid for `phase-scan`.
    pub phi_grid: GridSpec,
}

impl ExcitationSpec {
    /// Drive amplitude is fixed at 1: the system is linear and every
    /// emitted quantity is normalized by the amplitude.
    pub fn field_at(&self, phi: f64) -> ExcitationField {
        match self.variant {
            ExcitationVariant::Pw => ExcitationField::PlaneWave { e0: 1.0 },
            ExcitationVariant::Te4 => ExcitationField::FourWaveTe {
                e0: 1.0,
                phi,
                psi: self.psi,
            },
            ExcitationVariant::Tm4 => ExcitationField::FourWaveTm {
                e0: 1.0,
                phi,
                psi: self.psi,
            },
        }
    }

    pub fn field(&self) -> ExcitationField {
        self.field_at(self.phi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleSettings {
    pub realizations: usize,
    pub master_seed: u64,
    pub position_reuse: bool,
    pub resample_limit: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatternSpec {
    /// Polar x azimuthal quadrature resolution.
    pub n_theta: usize,
    pub n_phi: usize,
    pub detuning: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputSpec {
    pub directory: PathBuf,
    pub csv: bool,
    pub svg: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub cloud: CloudSpec,
    /// Non-radiative linewidth in units of the radiative one.
    pub gamma_nr: f64,
    pub detuning: GridSpec,
    pub excitation: ExcitationSpec,
    pub ensemble: EnsembleSettings,
    pub pattern: PatternSpec,
    pub output: OutputSpec,
    /// Worker threads, 0 = all cores. Never changes numeric output.
    pub workers: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            cloud: CloudSpec {
                n_atoms: 25,
                radius: 0.2,
                min_separation: 1e-3,
            },
            gamma_nr: 0.0,
            detuning: GridSpec {
                min: -10.0,
                max: 10.0,
                count: 201,
            },
            excitation: ExcitationSpec {
                variant: ExcitationVariant::Pw,
                psi: std::f64::consts::FRAC_PI_4,
                phi: 0.0,
                phi_grid: GridSpec {
                    min: 0.0,
                    max: 2.0 * std::f64::consts::PI,
                    count: 101,
                },
            },
            ensemble: EnsembleSettings {
                realizations: 2000,
                master_seed: 1,
                position_reuse: true,
                resample_limit: 100,
            },
            pattern: PatternSpec {
                n_theta: 64,
                n_phi: 128,
                detuning: 0.0,
            },
            output: OutputSpec {
                directory: PathBuf::from("out"),
                csv: true,
                svg: true,
            },
            workers: 0,
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        parse_config(&text)
    }

    /// Ensemble engine settings for this run.
    pub fn ensemble_config(&self) -> EnsembleConfig {
        EnsembleConfig {
            cloud: self.cloud,
            n_realizations: self.ensemble.realizations,
            master_seed: self.ensemble.master_seed,
            position_reuse: self.ensemble.position_reuse,
            resample_limit: self.ensemble.resample_limit,
            workers: self.workers,
        }
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.ensemble.master_seed = seed;
        }
        if let Some(n) = o.realizations {
            self.ensemble.realizations = n;
        }
        if let Some(dir) = &o.out {
            self.output.directory = dir.clone();
        }
        if let Some(w) = o.workers {
            self.workers = w;
        }
        if let Some(v) = o.excitation {
            self.excitation.variant = v;
        }
        if let Some(phi) = o.phi {
            self.excitation.phi = phi;
        }
        if let Some(psi) = o.psi {
            self.excitation.psi = psi;
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.cloud.n_atoms == 0 {
            return fail("cloud.n_atoms must be at least 1".into());
        }
        if !self.cloud.radius.is_finite() || self.cloud.radius < 0.0 {
            return fail(format!("cloud.radius must be finite and >= 0, got {}", self.cloud.radius));
        }
        if !self.cloud.min_separation.is_finite() || self.cloud.min_separation < 0.0 {
            return fail(format!(
                "cloud.min_separation must be finite and >= 0, got {}",
                self.cloud.min_separation
            ));
        }
        if !self.gamma_nr.is_finite() || self.gamma_nr < 0.0 {
            return fail(format!("atom.gamma_nr must be finite and >= 0, got {}", self.gamma_nr));
        }
        for (name, grid) in [("detuning", &self.detuning), ("excitation.phi", &self.excitation.phi_grid)] {
            if grid.count == 0 {
                return fail(format!("{name} grid count must be at least 1"));
            }
            if !(grid.min.is_finite() && grid.max.is_finite()) || grid.min > grid.max {
                return fail(format!(
                    "{name} grid needs finite min <= max, got [{}, {}]",
                    grid.min, grid.max
                ));
            }
        }
        if !self.excitation.psi.is_finite() || !self.excitation.phi.is_finite() {
            return fail("excitation.psi and excitation.phi must be finite".into());
        }
        if self.ensemble.realizations == 0 {
            return fail("ensemble.realizations must be at least 1".into());
        }
        if self.ensemble.resample_limit == 0 {
            return fail("ensemble.resample_limit must be at least 1".into());
        }
        if self.pattern.n_theta == 0 || self.pattern.n_phi == 0 {
            return fail("pattern grid counts must be at least 1".into());
        }
        if !self.pattern.detuning.is_finite() {
            return fail("pattern.detuning must be finite".into());
        }
        Ok(())
    }

    /// JSON echo for the run manifest.
    pub fn echo(&self) -> serde_json::Value {
        json!({
            "cloud": {
                "n_atoms": self.cloud.n_atoms,
                "radius": self.cloud.radius,
                "min_separation": self.cloud.min_separation,
            },
            "atom": { "gamma_nr": self.gamma_nr },
            "detuning": {
                "min": self.detuning.min,
                "max": self.detuning.max,
                "count": self.detuning.count,
            },
            "excitation": {
                "variant": self.excitation.variant.as_str(),
                "psi": self.excitation.psi,
                "phi": self.excitation.phi,
                "phi_min": self.excitation.phi_grid.min,
                "phi_max": self.excitation.phi_grid.max,
                "phi_count": self.excitation.phi_grid.count,
            },
            "ensemble": {
                "realizations": self.ensemble.realizations,
                "master_seed": self.ensemble.master_seed,
                "position_reuse": self.ensemble.position_reuse,
                "resample_limit": self.ensemble.resample_limit,
            },
            "pattern": {
                "n_theta": self.pattern.n_theta,
                "n_phi": self.pattern.n_phi,
                "detuning": self.pattern.detuning,
            },
            "output": {
                "directory": self.output.directory.display().to_string(),
                "csv": self.output.csv,
                "svg": self.output.svg,
            },
            "run": { "workers": self.workers },
        })
    }
}

/// CLI-level overrides; every field trumps the config-file value.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub realizations: Option<usize>,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub excitation: Option<ExcitationVariant>,
    pub phi: Option<f64>,
    pub psi: Option<f64>,
}

const SECTIONS: [&str; 8] = [
    "cloud",
    "atom",
    "detuning",
    "excitation",
    "ensemble",
    "pattern",
    "output",
    "run",
];

fn line_err(lineno: usize, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("line {lineno}: {msg}"))
}

fn parse_value<T: FromStr>(value: &str, key: &str, lineno: usize) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse::<T>()
        .map_err(|e| line_err(lineno, format!("invalid value for '{key}': {e}")))
}

fn parse_bool(value: &str, key: &str, lineno: usize) -> Result<bool> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        other => Err(line_err(
            lineno,
            format!("invalid value for '{key}': expected true or false, got '{other}'"),
        )),
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    let mut section: Option<String> = None;
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(inner) = line.strip_prefix('[') {
            let name = inner
                .strip_suffix(']')
                .ok_or_else(|| line_err(lineno, "unterminated section header"))?
                .trim();
            if !SECTIONS.contains(&name) {
                return Err(line_err(lineno, format!("unknown section [{name}]")));
            }
            section = Some(name.to_string());
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| line_err(lineno, "expected 'key = value'"))?;
        let key = key.trim();
        let value = value.trim();
        let section = section
            .as_deref()
            .ok_or_else(|| line_err(lineno, format!("key '{key}' appears before any [section]")))?;
        apply_key(&mut cfg, section, key, value, lineno)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn apply_key(cfg: &mut RunConfig, section: &str, key: &str, value: &str, lineno: usize) -> Result<()> {
    match (section, key) {
        ("cloud", "n_atoms") => cfg.cloud.n_atoms = parse_value(value, key, lineno)?,
        ("cloud", "radius") => cfg.cloud.radius = parse_value(value, key, lineno)?,
        ("cloud", "min_separation") => cfg.cloud.min_separation = parse_value(value, key, lineno)?,
        ("atom", "gamma_nr") => cfg.gamma_nr = parse_value(value, key, lineno)?,
        ("detuning", "min") => cfg.detuning.min = parse_value(value, key, lineno)?,
        ("detuning", "max") => cfg.detuning.max = parse_value(value, key, lineno)?,
        ("detuning", "count") => cfg.detuning.count = parse_value(value, key, lineno)?,
        ("excitation", "variant") => {
            cfg.excitation.variant = value
                .parse()
                .map_err(|e| line_err(lineno, format!("invalid value for 'variant': {e}")))?
        }
        ("excitation", "psi") => cfg.excitation.psi = parse_value(value, key, lineno)?,
        ("excitation", "phi") => cfg.excitation.phi = parse_value(value, key, lineno)?,
        ("excitation", "phi_min") => cfg.excitation.phi_grid.min = parse_value(value, key, lineno)?,
        ("excitation", "phi_max") => cfg.excitation.phi_grid.max = parse_value(value, key, lineno)?,
        ("excitation", "phi_count") => {
            cfg.excitation.phi_grid.count = parse_value(value, key, lineno)?
        }
        ("ensemble", "realizations") => {
            cfg.ensemble.realizations = parse_value(value, key, lineno)?
        }
        ("ensemble", "master_seed") => cfg.ensemble.master_seed = parse_value(value, key, lineno)?,
        ("ensemble", "position_reuse") => {
            cfg.ensemble.position_reuse = parse_bool(value, key, lineno)?
        }
        ("ensemble", "resample_limit") => {
            cfg.ensemble.resample_limit = parse_value(value, key, lineno)?
        }
        ("pattern", "n_theta") => cfg.pattern.n_theta = parse_value(value, key, lineno)?,
        ("pattern", "n_phi") => cfg.pattern.n_phi = parse_value(value, key, lineno)?,
        ("pattern", "detuning") => cfg.pattern.detuning = parse_value(value, key, lineno)?,
        ("output", "directory") => cfg.output.directory = PathBuf::from(value),
        ("output", "csv") => cfg.output.csv = parse_bool(value, key, lineno)?,
        ("output", "svg") => cfg.output.svg = parse_bool(value, key, lineno)?,
        ("run", "workers") => cfg.workers = parse_value(value, key, lineno)?,
        _ => {
            return Err(line_err(
                lineno,
                format!("unknown key '{key}' in section [{section}]"),
            ))
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_yields_defaults() {
        let cfg = parse_config("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.detuning.count, 201);
        assert_eq!(cfg.excitation.phi_grid.count, 101);
    }

    #[test]
    fn full_example_parses() {
        let text = "\
# run description
[cloud]
n_atoms = 10          # small cloud
radius = 0.15
min_separation = 0.002

[atom]
gamma_nr = 0.1

[detuning]
min = -5.0
max = 5.0
count = 11

[excitation]
variant = te4
psi = 0.5
phi = 3.14
phi_min = 0.0
phi_max = 6.28
phi_count = 5

[ensemble]
realizations = 7
master_seed = 99
position_reuse = false
resample_limit = 20

[pattern]
n_theta = 8
n_phi = 16
detuning = 1.5

[output]
directory = /tmp/run1
csv = true
svg = false

[run]
workers = 3
";
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.cloud.n_atoms, 10);
        assert_eq!(cfg.cloud.radius, 0.15);
        assert_eq!(cfg.gamma_nr, 0.1);
        assert_eq!(cfg.detuning.count, 11);
        assert_eq!(cfg.excitation.variant, ExcitationVariant::Te4);
        assert_eq!(cfg.excitation.phi, 3.14);
        assert_eq!(cfg.excitation.phi_grid.count, 5);
        assert!(!cfg.ensemble.position_reuse);
        assert_eq!(cfg.ensemble.master_seed, 99);
        assert_eq!(cfg.pattern.n_phi, 16);
        assert_eq!(cfg.output.directory, PathBuf::from("/tmp/run1"));
        assert!(!cfg.output.svg);
        assert_eq!(cfg.workers, 3);
    }

    #[test]
    fn unknown_key_is_rejected_with_line_number() {
        let err = parse_config("[cloud]\nn_atoms = 3\nshape = cube\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 3"), "{msg}");
        assert!(msg.contains("unknown key 'shape'"), "{msg}");
    }

    #[test]
    fn unknown_section_is_rejected() {
        let err = parse_config("[laser]\npower = 1\n").unwrap_err();
        assert!(err.to_string().contains("unknown section [laser]"));
    }

    #[test]
    fn key_before_section_is_rejected() {
        let err = parse_config("n_atoms = 3\n").unwrap_err();
        assert!(err.to_string().contains("before any [section]"));
    }

    #[test]
    fn malformed_lines_are_rejected() {
        let err = parse_config("[cloud]\nn_atoms 3\n").unwrap_err();
        assert!(err.to_string().contains("line 2"));
        let err = parse_config("[cloud\nn_atoms = 3\n").unwrap_err();
        assert!(err.to_string().contains("unterminated"));
        let err = parse_config("[cloud]\nn_atoms = many\n").unwrap_err();
        assert!(err.to_string().contains("invalid value for 'n_atoms'"));
    }

    #[test]
    fn invariants_are_enforced() {
        assert!(parse_config("[detuning]\ncount = 0\n").is_err());
        assert!(parse_config("[detuning]\nmin = 2.0\nmax = -2.0\n").is_err());
        assert!(parse_config("[cloud]\nn_atoms = 0\n").is_err());
        assert!(parse_config("[cloud]\nradius = -1.0\n").is_err());
        assert!(parse_config("[ensemble]\nrealizations = 0\n").is_err());
        assert!(parse_config("[pattern]\nn_theta = 0\n").is_err());
        assert!(parse_config("[atom]\ngamma_nr = -0.5\n").is_err());
    }

    #[test]
    fn grid_points_are_inclusive_and_uniform() {
        let g = GridSpec { min: -1.0, max: 1.0, count: 5 };
        assert_eq!(g.points(), vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
        let single = GridSpec { min: 2.5, max: 7.0, count: 1 };
        assert_eq!(single.points(), vec![2.5]);
    }

    #[test]
    fn overrides_replace_config_values() {
        let mut cfg = RunConfig::default();
        cfg.apply(&Overrides {
            seed: Some(7),
            realizations: Some(12),
            out: Some(PathBuf::from("elsewhere")),
            workers: Some(2),
            excitation: Some(ExcitationVariant::Tm4),
            phi: Some(1.25),
            psi: Some(0.3),
        });
        assert_eq!(cfg.ensemble.master_seed, 7);
        assert_eq!(cfg.ensemble.realizations, 12);
        assert_eq!(cfg.output.directory, PathBuf::from("elsewhere"));
        assert_eq!(cfg.workers, 2);
        assert_eq!(cfg.excitation.variant, ExcitationVariant::Tm4);
        assert_eq!(cfg.excitation.phi, 1.25);
        assert_eq!(cfg.excitation.psi, 0.3);
    }

    #[test]
    fn variant_field_construction() {
        let spec = ExcitationSpec {
            variant: ExcitationVariant::Tm4,
            psi: 0.4,
            phi: 1.0,
            phi_grid: GridSpec { min: 0.0, max: 1.0, count: 2 },
        };
        match spec.field() {
            ExcitationField::FourWaveTm { e0, phi, psi } => {
                assert_eq!(e0, 1.0);
                assert_eq!(phi, 1.0);
                assert_eq!(psi, 0.4);
            }
            other => panic!("wrong variant: {other:?}"),
        }
    }
}
