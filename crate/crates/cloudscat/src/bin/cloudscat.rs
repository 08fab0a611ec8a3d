//! Command-line interface: detuning spectra, phase scans, radiation
//! patterns, and the validation suite for the coupled-dipole cloud
//! simulator.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cloudscat::scan::commands::{cmd_pattern, cmd_phase_scan, cmd_spectrum, cmd_validate};
use cloudscat::scan::config::{ExcitationVariant, Overrides, RunConfig};
use cloudscat::Error;

#[derive(Parser)]
#[command(
    name = "cloudscat",
    version,
    about = "Coupled-dipole Monte Carlo simulator for subwavelength atomic clouds"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Configuration file (key = value sections); defaults apply if omitted.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Master seed for the realization streams.
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,

    /// Number of Monte Carlo realizations.
    #[arg(long, value_name = "N")]
    realizations: Option<usize>,

    /// Output directory for CSV, SVG, and manifest artifacts.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Worker threads (0 = all cores); never changes numeric results.
    #[arg(long, value_name = "N")]
    workers: Option<usize>,

    /// Drive geometry: pw, te4, or tm4.
    #[arg(long, value_name = "VARIANT")]
    excitation: Option<String>,

    /// Standing-wave phase in radians (four-wave drives).
    #[arg(long, value_name = "F")]
    phi: Option<f64>,

    /// Beam half-opening angle in radians (four-wave drives).
    #[arg(long, value_name = "F")]
    psi: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Detuning spectrum under a single plane wave with polarizability
    /// retrieval and conservation diagnostics.
    Spectrum(CommonArgs),
    /// Detuning x phase scan under a four-wave drive with closed-form
    /// overlays from a companion plane-wave retrieval.
    PhaseScan(CommonArgs),
    /// Ensemble radiation pattern at a fixed detuning and phase.
    Pattern(CommonArgs),
    /// Reduced-scale invariant suite; exits 3 on any failed check.
    Validate(CommonArgs),
}

fn load_config(args: &CommonArgs) -> Result<RunConfig, Error> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    let excitation = match &args.excitation {
        Some(text) => Some(text.parse::<ExcitationVariant>().map_err(Error::Config)?),
        None => None,
    };
    cfg.apply(&Overrides {
        seed: args.seed,
        realizations: args.realizations,
        out: args.out.clone(),
        workers: args.workers,
        excitation,
        phi: args.phi,
        psi: args.psi,
    });
    cfg.validate()?;
    Ok(cfg)
}

fn run() -> Result<(), Error> {
    let cli = Cli::parse();
    let (args, runner): (&CommonArgs, fn(&RunConfig) -> Result<_, Error>) = match &cli.command {
        Command::Spectrum(a) => (a, |c| cmd_spectrum(c)),
        Command::PhaseScan(a) => (a, |c| cmd_phase_scan(c)),
        Command::Pattern(a) => (a, |c| cmd_pattern(c)),
        Command::Validate(a) => (a, |c| cmd_validate(c)),
    };
    let cfg = load_config(args)?;
    let manifest = runner(&cfg)?;
    println!(
        "wrote {} artifacts to {} in {:.2} s",
        manifest.files.len(),
        cfg.output.directory.display(),
        manifest.wall_seconds
    );
    Ok(())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
