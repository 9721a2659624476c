//! Command-line front end for the `fanolab` toolkit.
//!
//! Every subcommand reads one TOML configuration file, writes its outputs
//! into `--out`, and finishes with a `manifest.txt` recording the
//! invocation and an echo of the configuration. Runs are deterministic:
//! the same configuration, seed and subcommand produce byte-identical
//! files at any thread count.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure
//! (a failure report is still written), 4 I/O error.

mod commands;
mod config;
mod output;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{CliError, Ctx};
use config::ExperimentConfig;
use output::{write_manifest, OutputFormat, Report};

#[derive(Parser)]
#[command(
    name = "fanolab",
    version,
    about = "Simulation and parameter estimation for a single emitter coupled to an optical nanoantenna"
)]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Random seed; overrides the configuration's `seed` key.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory (created if missing).
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Size of the worker thread pool (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Output file format for data tables.
    #[arg(long, global = true, value_enum, default_value = "csv")]
    format: OutputFormat,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute a transmission spectrum of the configured system.
    Spectrum,
    /// Simulate transmission spectra across an axial stack.
    Zstack,
    /// Compute intensity-correlation curves g²(τ).
    G2,
    /// Compute a detected-rate saturation curve and fit its asymptote.
    Saturation,
    /// Simulate a set of repeated line scans with spectral jitter.
    Scans,
    /// Align, average and compare a previously generated scan set.
    Align,
    /// Fit a Lorentzian line to a two-column spectrum file.
    FitLorentzian,
    /// Fit the composite model globally across a z-stack.
    FitZstack,
    /// Jointly fit correlation curves for lifetime and dephasing.
    FitG2,
    /// Simulate a raster image of a point emitter.
    PsfSim,
    /// Localize the emitter in a previously simulated image.
    Localize,
    /// Report the antenna-induced modification of the emitter line.
    Hybridize,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Self::Spectrum => "spectrum",
            Self::Zstack => "zstack",
            Self::G2 => "g2",
            Self::Saturation => "saturation",
            Self::Scans => "scans",
            Self::Align => "align",
            Self::FitLorentzian => "fit-lorentzian",
            Self::FitZstack => "fit-zstack",
            Self::FitG2 => "fit-g2",
            Self::PsfSim => "psf-sim",
            Self::Localize => "localize",
            Self::Hybridize => "hybridize",
        }
    }

    fn run(&self, ctx: &Ctx) -> Result<Vec<String>, CliError> {
        match self {
            Self::Spectrum => commands::run_spectrum(ctx),
            Self::Zstack => commands::run_zstack(ctx),
            Self::G2 => commands::run_g2(ctx),
            Self::Saturation => commands::run_saturation(ctx),
            Self::Scans => commands::run_scans(ctx),
            Self::Align => commands::run_align(ctx),
            Self::FitLorentzian => commands::run_fit_lorentzian(ctx),
            Self::FitZstack => commands::run_fit_zstack(ctx),
            Self::FitG2 => commands::run_fit_g2(ctx),
            Self::PsfSim => commands::run_psf_sim(ctx),
            Self::Localize => commands::run_localize(ctx),
            Self::Hybridize => commands::run_hybridize(ctx),
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        // Ignore failure: the global pool can only be configured once.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }

    let config_text = match &cli.config {
        Some(path) => fs::read_to_string(path).map_err(|e| {
            CliError::Config(format!("cannot read config {}: {e}", path.display()))
        })?,
        None => String::new(),
    };
    let config = ExperimentConfig::from_toml(&config_text).map_err(CliError::Config)?;
    let seed = cli.seed.or(config.seed).unwrap_or(0);
    fs::create_dir_all(&cli.out)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", cli.out.display())))?;

    let ctx = Ctx {
        config,
        out_dir: cli.out.clone(),
        seed,
        format: cli.format,
    };
    match cli.command.run(&ctx) {
        Ok(outputs) => {
            write_manifest(
                &ctx.out_dir,
                cli.command.name(),
                seed,
                cli.format,
                &outputs,
                &config_text,
            )
            .map_err(|e| CliError::Io(e.to_string()))?;
            Ok(())
        }
        Err(e @ CliError::Numeric(_)) => {
            // Leave a diagnosable trail even when the computation fails.
            let mut report = Report::new();
            report.entry("status", "\"failed\"");
            report.entry("error", format!("{:?}", e.message()));
            let _ = report.write(&ctx.out_dir, "fit_report.txt");
            let _ = write_manifest(
                &ctx.out_dir,
                cli.command.name(),
                seed,
                cli.format,
                &["fit_report.txt".to_string()],
                &config_text,
            );
            Err(e)
        }
        Err(e) => Err(e),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}
