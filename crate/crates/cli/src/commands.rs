//! One function per subcommand, each returning the list of files it wrote.
//!
//! Error mapping: failures while turning configuration into model
//! parameters are configuration errors (exit 2); failures inside a
//! simulation or fit are numerical errors (exit 3); unreadable or
//! unwritable files are I/O errors (exit 4).

use std::fs;
use std::io::BufReader;
use std::path::PathBuf;

use rand::Rng;
use rand_distr::Poisson;

use fanolab::bloch::{self, DriveParams};
use fanolab::fit::models::{
    fit_g2, fit_lorentzian, fit_saturation, fit_zstack, G2Dataset, G2Guess, ZstackFitOptions,
};
use fanolab::image::{localize_psf, simulate_psf_image, RasterImage};
use fanolab::lineshape::{fano_asymmetry, feature_contrast, single_scatterer_transmission};
use fanolab::rng::stream_rng;
use fanolab::scan::{align_and_average, naive_average, simulate_scan_set, ScanSet};
use fanolab::spectrum::{centered_grid, linspace, Spectrum, SpectrumKind};
use fanolab::units::TAU;

use crate::config::ExperimentConfig;
use crate::output::{data_dir, read_table, OutputFormat, Report, Table};

/// Failure classified by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad or missing configuration (exit 2).
    Config(String),
    /// A simulation or fit failed (exit 3).
    Numeric(String),
    /// A file could not be read or written (exit 4).
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) => 2,
            Self::Numeric(_) => 3,
            Self::Io(_) => 4,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Self::Config(m) | Self::Numeric(m) | Self::Io(m) => m,
        }
    }
}

fn cfg_err(msg: impl std::fmt::Display) -> CliError {
    CliError::Config(msg.to_string())
}

fn run_err(e: fanolab::Error) -> CliError {
    match e {
        fanolab::Error::Io(io) => CliError::Io(io.to_string()),
        other => CliError::Numeric(other.to_string()),
    }
}

/// Errors while reading a data file produced by an earlier run.
fn data_err(e: fanolab::Error) -> CliError {
    match e {
        fanolab::Error::Io(io) => CliError::Io(io.to_string()),
        fanolab::Error::Parse(m) => CliError::Io(m),
        other => CliError::Numeric(other.to_string()),
    }
}

fn io_err(e: std::io::Error) -> CliError {
    CliError::Io(e.to_string())
}

fn open_data(path: &std::path::Path) -> Result<fs::File, CliError> {
    fs::File::open(path).map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))
}

/// Shared invocation state for every subcommand.
pub struct Ctx {
    pub config: ExperimentConfig,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub format: OutputFormat,
}

type Outputs = Result<Vec<String>, CliError>;

fn lorentzian_peak(center: f64, fwhm: f64) -> impl Fn(f64) -> f64 + Sync + Send + Copy {
    move |f: f64| {
        let hw = fwhm / 2.0;
        hw * hw / ((f - center) * (f - center) + hw * hw)
    }
}

fn spectrum_table(s: &Spectrum) -> Table {
    let mut table = Table::new(&["frequency_hz", "value"]);
    for (&f, &v) in s.frequency_hz.iter().zip(&s.values) {
        table.push(vec![f, v]);
    }
    table
}

/// Transmission (or extinction) spectrum of the configured model.
pub fn run_spectrum(ctx: &Ctx) -> Outputs {
    let s = ctx
        .config
        .spectrum
        .as_ref()
        .ok_or_else(|| cfg_err("config section [spectrum] is required by this subcommand"))?;
    let focus = ctx.config.focus().map_err(cfg_err)?;
    let grid = centered_grid(s.center_hz, s.span_hz, s.n_points).map_err(cfg_err)?;
    let z = s.z_nm.unwrap_or(focus.axial_position_nm);
    let spectrum = match s.mode.as_str() {
        "composite" => {
            let model = ctx.config.hybrid_model().map_err(cfg_err)?;
            model.transmission(&grid, z).map_err(run_err)?
        }
        "antenna" => {
            let model = ctx.config.hybrid_model().map_err(cfg_err)?;
            model.antenna_only().transmission(&grid, z).map_err(run_err)?
        }
        "molecule" => {
            let (osc, zeta) = ctx.config.molecule_scatterer().map_err(cfg_err)?;
            single_scatterer_transmission(
                &grid,
                &osc,
                zeta,
                ctx.config.detection_phase_offset(),
                &focus,
                z,
            )
            .map_err(run_err)?
        }
        other => {
            return Err(cfg_err(format!(
                "[spectrum]: unknown mode {other:?} (expected \"composite\", \"antenna\" or \
                 \"molecule\")"
            )))
        }
    };
    let name = spectrum_table(&spectrum)
        .write(&ctx.out_dir, "spectrum", ctx.format)
        .map_err(io_err)?;
    Ok(vec![name])
}

fn poissonize(rng: &mut impl Rng, mean: f64) -> f64 {
    if mean > 0.0 {
        rng.sample(Poisson::new(mean).expect("positive finite mean"))
    } else {
        0.0
    }
}

/// Transmission spectra across an axial stack, plus the per-position
/// asymmetry-metric table.
pub fn run_zstack(ctx: &Ctx) -> Outputs {
    let zs = ctx
        .config
        .zstack
        .as_ref()
        .ok_or_else(|| cfg_err("config section [zstack] is required by this subcommand"))?;
    if zs.n_positions < 2 {
        return Err(cfg_err("[zstack]: n_positions must be at least 2"));
    }
    let model = ctx.config.hybrid_model().map_err(cfg_err)?;
    let center = zs.center_hz.unwrap_or_else(|| model.molecule.resonance_hz());
    let grid = centered_grid(center, zs.span_hz, zs.n_points).map_err(cfg_err)?;
    let counts = zs.counts_per_point.unwrap_or(0.0);
    if counts < 0.0 {
        return Err(cfg_err("[zstack]: counts_per_point must be non-negative"));
    }

    let mut outputs = Vec::new();
    let mut index = Table::new(&["z_index", "z_nm", "asymmetry_metric", "contrast"]);
    for k in 0..zs.n_positions {
        let z = -zs.z_span_nm / 2.0
            + zs.z_span_nm * k as f64 / (zs.n_positions as f64 - 1.0);
        let mut spectrum = model.transmission(&grid, z).map_err(run_err)?;
        if counts > 0.0 {
            let mut rng = stream_rng(ctx.seed, k as u64);
            for v in &mut spectrum.values {
                *v = poissonize(&mut rng, counts * *v) / counts;
            }
        }
        let asymmetry = fano_asymmetry(&spectrum).map_err(run_err)?;
        let contrast = feature_contrast(&spectrum).map_err(run_err)?;
        index.push(vec![k as f64, z, asymmetry, contrast]);
        let name = spectrum_table(&spectrum)
            .write(&ctx.out_dir, &format!("zstack_{k}"), ctx.format)
            .map_err(io_err)?;
        outputs.push(name);
    }
    outputs.push(
        index
            .write(&ctx.out_dir, "zstack_index", ctx.format)
            .map_err(io_err)?,
    );
    Ok(outputs)
}

fn g2_file_base(n_datasets: usize, k: usize) -> String {
    if n_datasets == 1 {
        "g2".to_string()
    } else {
        format!("g2_{k}")
    }
}

/// Intensity-correlation curves for each configured drive strength.
pub fn run_g2(ctx: &Ctx) -> Outputs {
    let g = ctx
        .config
        .g2
        .as_ref()
        .ok_or_else(|| cfg_err("config section [g2] is required by this subcommand"))?;
    if g.rabi_mhz.is_empty() {
        return Err(cfg_err("[g2]: rabi_mhz needs at least one entry"));
    }
    let emitter = ctx.config.emitter().map_err(cfg_err)?;
    let tau = linspace(0.0, g.tau_max_ns * 1e-9, g.n_points).map_err(cfg_err)?;
    let signal_fraction = g.signal_fraction.unwrap_or(1.0);

    let mut outputs = Vec::new();
    let mut index = Table::new(&["dataset_index", "rabi_mhz"]);
    for (k, &rabi_mhz) in g.rabi_mhz.iter().enumerate() {
        let drive = DriveParams::resonant(TAU * rabi_mhz * 1e6).map_err(cfg_err)?;
        let mut values = bloch::g2(&tau, &drive, &emitter).map_err(run_err)?;
        if signal_fraction < 1.0 {
            values = bloch::g2_with_background(&values, signal_fraction).map_err(cfg_err)?;
        }
        let mut table = Table::new(&["tau_ns", "g2"]);
        for (&t, &v) in tau.iter().zip(&values) {
            table.push(vec![t * 1e9, v]);
        }
        index.push(vec![k as f64, rabi_mhz]);
        let name = table
            .write(&ctx.out_dir, &g2_file_base(g.rabi_mhz.len(), k), ctx.format)
            .map_err(io_err)?;
        outputs.push(name);
    }
    outputs.push(
        index
            .write(&ctx.out_dir, "g2_index", ctx.format)
            .map_err(io_err)?,
    );
    Ok(outputs)
}

/// Detected-rate saturation curve plus its asymptote fit.
pub fn run_saturation(ctx: &Ctx) -> Outputs {
    let s = ctx
        .config
        .saturation
        .as_ref()
        .ok_or_else(|| cfg_err("config section [saturation] is required by this subcommand"))?;
    let emitter = ctx.config.emitter().map_err(cfg_err)?;
    if !(s.power_min > 0.0 && s.power_max > s.power_min) {
        return Err(cfg_err("[saturation]: need 0 < power_min < power_max"));
    }
    if s.n_points < 4 {
        return Err(cfg_err("[saturation]: n_points must be at least 4"));
    }
    let detected_fraction = 1.0 - emitter.branching_ratio;
    if !(detected_fraction > 0.0) {
        return Err(cfg_err(
            "[saturation]: branching_ratio must be below 1 for any light to be detected",
        ));
    }
    let scale = 2.0 * s.max_rate_cps / (emitter.radiative_rate * detected_fraction);
    let ratio = s.power_max / s.power_min;
    let powers: Vec<f64> = (0..s.n_points)
        .map(|k| s.power_min * ratio.powf(k as f64 / (s.n_points as f64 - 1.0)))
        .collect();
    let mut rates =
        bloch::saturation_curve(&powers, &emitter, s.saturation_power, scale).map_err(run_err)?;
    let integration = s.integration_s.unwrap_or(0.0);
    if integration > 0.0 {
        for (k, rate) in rates.iter_mut().enumerate() {
            let mut rng = stream_rng(ctx.seed, k as u64);
            *rate = poissonize(&mut rng, *rate * integration) / integration;
        }
    }

    let mut table = Table::new(&["power", "rate_cps"]);
    for (&p, &r) in powers.iter().zip(&rates) {
        table.push(vec![p, r]);
    }
    let mut outputs = vec![table
        .write(&ctx.out_dir, "saturation", ctx.format)
        .map_err(io_err)?];

    let fit = fit_saturation(&powers, &rates).map_err(run_err)?;
    let mut report = Report::new();
    report.entry("max_rate_cps", fit.max_rate);
    report.entry("saturation_power", fit.saturation_power);
    if let Some(e) = fit.result.std_error("max_rate") {
        report.entry("max_rate_cps_std_error", e);
    }
    if let Some(e) = fit.result.std_error("saturation_power") {
        report.entry("saturation_power_std_error", e);
    }
    report.text_block("");
    report.text_block(&fit.result.report());
    outputs.push(report.write(&ctx.out_dir, "fit_report.txt").map_err(io_err)?);
    Ok(outputs)
}

/// Generate a synthetic fast-scan set and write it with its metadata.
pub fn run_scans(ctx: &Ctx) -> Outputs {
    let (cfg, jitter, line_center, line_fwhm) = ctx.config.scan_setup().map_err(cfg_err)?;
    if !(line_fwhm > 0.0) {
        return Err(cfg_err("[scans]: line_fwhm_hz must be positive"));
    }
    let set = simulate_scan_set(
        &cfg,
        &jitter,
        lorentzian_peak(line_center, line_fwhm),
        ctx.seed,
    )
    .map_err(run_err)?;
    let mut csv = fs::File::create(ctx.out_dir.join("scans.csv")).map_err(io_err)?;
    set.write_csv(&mut csv).map_err(run_err)?;
    let mut meta = fs::File::create(ctx.out_dir.join("scans_meta.txt")).map_err(io_err)?;
    set.write_metadata(&cfg, &jitter, &mut meta).map_err(run_err)?;
    Ok(vec!["scans.csv".into(), "scans_meta.txt".into()])
}

/// Align and average a generated scan set; also write the naive average and
/// the width comparison.
pub fn run_align(ctx: &Ctx) -> Outputs {
    let override_dir = ctx
        .config
        .scans
        .as_ref()
        .and_then(|s| s.data_dir.clone());
    let dir = data_dir(&ctx.out_dir, &override_dir);
    let file = open_data(&dir.join("scans.csv"))?;
    let set = ScanSet::read_csv(BufReader::new(file)).map_err(data_err)?;

    let (aligned, diag) = align_and_average(&set).map_err(run_err)?;
    let naive = naive_average(&set);

    let mut aligned_table = Table::new(&["frequency_hz", "mean_counts"]);
    for (&f, &v) in aligned.frequency_hz.iter().zip(&aligned.mean_counts) {
        aligned_table.push(vec![f, v]);
    }
    let mut naive_table = Table::new(&["frequency_hz", "mean_counts"]);
    for (&f, &v) in naive.frequency_hz.iter().zip(&naive.mean_counts) {
        naive_table.push(vec![f, v]);
    }
    let mut outputs = vec![
        aligned_table
            .write(&ctx.out_dir, "aligned", ctx.format)
            .map_err(io_err)?,
        naive_table
            .write(&ctx.out_dir, "naive", ctx.format)
            .map_err(io_err)?,
    ];

    let aligned_fit =
        fit_lorentzian(&aligned.to_spectrum().map_err(run_err)?, None).map_err(run_err)?;
    let naive_fit =
        fit_lorentzian(&naive.to_spectrum().map_err(run_err)?, None).map_err(run_err)?;
    let mut report = Report::new();
    report.entry("n_accepted", diag.n_accepted);
    report.entry("n_rejected", diag.n_rejected);
    report.entry("midpoint_mean_hz", diag.midpoint_mean_hz);
    report.entry("midpoint_scatter_hz", diag.midpoint_scatter_hz);
    report.entry("n_trimmed_bins", diag.n_trimmed_bins);
    report.entry("aligned_fwhm_hz", aligned_fit.fwhm_hz);
    report.entry("naive_fwhm_hz", naive_fit.fwhm_hz);
    report.entry("broadening_ratio", naive_fit.fwhm_hz / aligned_fit.fwhm_hz);
    outputs.push(
        report
            .write(&ctx.out_dir, "align_report.txt")
            .map_err(io_err)?,
    );
    Ok(outputs)
}

/// Fit a Lorentzian to a two-column spectrum CSV.
pub fn run_fit_lorentzian(ctx: &Ctx) -> Outputs {
    let input = ctx
        .config
        .fit
        .as_ref()
        .and_then(|f| f.input.clone())
        .map(PathBuf::from)
        .unwrap_or_else(|| ctx.out_dir.join("aligned.csv"));
    let (columns, rows) = read_table(&input).map_err(CliError::Io)?;
    if columns.len() < 2 {
        return Err(CliError::Io(format!(
            "{} needs at least two columns",
            input.display()
        )));
    }
    let freq: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    let values: Vec<f64> = rows.iter().map(|r| r[1]).collect();
    let spectrum =
        Spectrum::new(freq, values, SpectrumKind::Fluorescence).map_err(run_err)?;
    let fit = fit_lorentzian(&spectrum, None).map_err(run_err)?;
    let mut report = Report::new();
    report.entry("center_hz", fit.center_hz);
    report.entry("fwhm_hz", fit.fwhm_hz);
    report.entry("amplitude", fit.amplitude);
    report.entry("baseline", fit.baseline);
    if let Some(e) = fit.result.std_error("center_hz") {
        report.entry("center_hz_std_error", e);
    }
    if let Some(e) = fit.result.std_error("fwhm_hz") {
        report.entry("fwhm_hz_std_error", e);
    }
    report.text_block("");
    report.text_block(&fit.result.report());
    Ok(vec![report
        .write(&ctx.out_dir, "fit_report.txt")
        .map_err(io_err)?])
}

fn column(columns: &[String], rows: &[Vec<f64>], name: &str, path: &str) -> Result<Vec<f64>, CliError> {
    let idx = columns
        .iter()
        .position(|c| c == name)
        .ok_or_else(|| CliError::Io(format!("{path} is missing column {name:?}")))?;
    Ok(rows.iter().map(|r| r[idx]).collect())
}

/// Global fit of the composite model across a stack of spectra.
pub fn run_fit_zstack(ctx: &Ctx) -> Outputs {
    let zs = ctx
        .config
        .zstack
        .as_ref()
        .ok_or_else(|| cfg_err("config section [zstack] is required by this subcommand"))?;
    let dir = data_dir(&ctx.out_dir, &zs.data_dir);
    let index_path = dir.join("zstack_index.csv");
    let (columns, rows) = read_table(&index_path).map_err(CliError::Io)?;
    let path_str = index_path.display().to_string();
    let ks = column(&columns, &rows, "z_index", &path_str)?;
    let zs_nm = column(&columns, &rows, "z_nm", &path_str)?;

    let mut stack = Vec::new();
    for (&k, &z) in ks.iter().zip(&zs_nm) {
        let path = dir.join(format!("zstack_{}.csv", k as usize));
        let (_, data_rows) = read_table(&path).map_err(CliError::Io)?;
        let freq: Vec<f64> = data_rows.iter().map(|r| r[0]).collect();
        let values: Vec<f64> = data_rows.iter().map(|r| r[1]).collect();
        let spectrum =
            Spectrum::new(freq, values, SpectrumKind::Transmission).map_err(run_err)?;
        stack.push((z, spectrum));
    }

    let template = ctx.config.hybrid_model().map_err(cfg_err)?;
    let options = ZstackFitOptions {
        fit_coupling: zs.fit_coupling.unwrap_or(true),
        per_spectrum_baseline: zs.per_spectrum_baseline.unwrap_or(false),
    };
    let fit = fit_zstack(&stack, &template, &options).map_err(run_err)?;

    let mut report = Report::new();
    report.entry("molecule_resonance_hz", fit.model.molecule.resonance_hz());
    report.entry("molecule_fwhm_hz", fit.model.molecule.fwhm_hz());
    report.entry("coupling", fit.model.coupling);
    report.entry("antenna_zeta", fit.model.plasmon.scatter_coupling);
    report.entry("detection_phase_offset", fit.model.detection_phase_offset);
    report.entry("z_offset_nm", fit.z_offset_nm);
    report.entry("z_step_nm", fit.z_step_nm);
    let hybrid = fit.model.hybridized_emitter().map_err(run_err)?;
    report.entry("lamb_shift_hz", hybrid.lamb_shift_hz);
    report.entry("induced_fwhm_hz", hybrid.induced_fwhm_hz);
    report.entry("total_emitter_fwhm_hz", hybrid.total_emitter_fwhm_hz);
    report.text_block("");
    report.text_block(&fit.result.report());
    Ok(vec![report
        .write(&ctx.out_dir, "fit_report.txt")
        .map_err(io_err)?])
}

/// Joint fit of the correlation datasets written by `g2`.
pub fn run_fit_g2(ctx: &Ctx) -> Outputs {
    let g = ctx
        .config
        .g2
        .as_ref()
        .ok_or_else(|| cfg_err("config section [g2] is required by this subcommand"))?;
    let emitter = ctx.config.emitter().map_err(cfg_err)?;
    let dir = data_dir(&ctx.out_dir, &g.data_dir);
    let index_path = dir.join("g2_index.csv");
    let (columns, rows) = read_table(&index_path).map_err(CliError::Io)?;
    let path_str = index_path.display().to_string();
    let ks = column(&columns, &rows, "dataset_index", &path_str)?;
    let rabis = column(&columns, &rows, "rabi_mhz", &path_str)?;

    let mut datasets = Vec::new();
    for (&k, &rabi_mhz) in ks.iter().zip(&rabis) {
        let base = g2_file_base(rows.len(), k as usize);
        let (_, data_rows) = read_table(&dir.join(format!("{base}.csv"))).map_err(CliError::Io)?;
        datasets.push(G2Dataset {
            tau_s: data_rows.iter().map(|r| r[0] * 1e-9).collect(),
            g2: data_rows.iter().map(|r| r[1]).collect(),
            rabi_frequency: TAU * rabi_mhz * 1e6,
        });
    }

    let guess = G2Guess {
        gamma1: emitter.gamma1(),
        pure_dephasing: emitter.pure_dephasing,
        signal_fraction: g.signal_fraction.unwrap_or(1.0),
    };
    let fit = fit_g2(&datasets, &guess).map_err(run_err)?;
    let mut report = Report::new();
    report.entry("t1_ns", fit.t1_seconds() * 1e9);
    report.entry("gamma1_per_s", fit.gamma1);
    report.entry("pure_dephasing_mhz", fit.pure_dephasing / (TAU * 1e6));
    report.entry("signal_fraction", fit.signal_fraction);
    report.text_block("");
    report.text_block(&fit.result.report());
    Ok(vec![report
        .write(&ctx.out_dir, "fit_report.txt")
        .map_err(io_err)?])
}

/// Simulate a raster image of the configured emitter.
pub fn run_psf_sim(ctx: &Ctx) -> Outputs {
    let im = ctx
        .config
        .image
        .as_ref()
        .ok_or_else(|| cfg_err("config section [image] is required by this subcommand"))?;
    let focus = ctx.config.focus().map_err(cfg_err)?;
    let image = simulate_psf_image(
        (im.center_x_nm, im.center_y_nm),
        &focus,
        im.total_counts,
        im.pixel_pitch_nm,
        (im.nx, im.ny),
        ctx.seed,
    )
    .map_err(cfg_err)?;
    let mut csv = fs::File::create(ctx.out_dir.join("image.csv")).map_err(io_err)?;
    image.write_csv(&mut csv).map_err(run_err)?;
    let mut meta = fs::File::create(ctx.out_dir.join("image_meta.txt")).map_err(io_err)?;
    image.write_metadata(&mut meta).map_err(run_err)?;
    Ok(vec!["image.csv".into(), "image_meta.txt".into()])
}

/// Localize the emitter in a previously written raster image.
pub fn run_localize(ctx: &Ctx) -> Outputs {
    let override_dir = ctx.config.image.as_ref().and_then(|i| i.data_dir.clone());
    let dir = data_dir(&ctx.out_dir, &override_dir);
    let meta = open_data(&dir.join("image_meta.txt"))?;
    let matrix = open_data(&dir.join("image.csv"))?;
    let image = RasterImage::read_csv(BufReader::new(meta), BufReader::new(matrix))
        .map_err(data_err)?;
    let loc = localize_psf(&image).map_err(run_err)?;
    let mut report = Report::new();
    report.entry("x_nm", loc.x_nm);
    report.entry("y_nm", loc.y_nm);
    report.entry("precision_nm", loc.precision_nm);
    report.entry("sigma_nm", loc.sigma_nm);
    report.entry("total_counts", loc.total_counts);
    report.entry("baseline", loc.baseline);
    report.text_block("");
    report.text_block(&loc.result.report());
    Ok(vec![report
        .write(&ctx.out_dir, "fit_report.txt")
        .map_err(io_err)?])
}

/// Report the emitter-line modification induced by the antenna coupling.
pub fn run_hybridize(ctx: &Ctx) -> Outputs {
    let model = ctx.config.hybrid_model().map_err(cfg_err)?;
    let hybrid = model.hybridized_emitter().map_err(run_err)?;
    let mut report = Report::new();
    report.entry("lamb_shift_hz", hybrid.lamb_shift_hz);
    report.entry("lamb_shift_mhz", hybrid.lamb_shift_hz / 1e6);
    report.entry("induced_fwhm_hz", hybrid.induced_fwhm_hz);
    report.entry("induced_fwhm_mhz", hybrid.induced_fwhm_hz / 1e6);
    report.entry("total_emitter_fwhm_hz", hybrid.total_emitter_fwhm_hz);
    report.entry("scale_separation_ok", hybrid.scale_separation_ok);
    Ok(vec![report
        .write(&ctx.out_dir, "hybridize_report.txt")
        .map_err(io_err)?])
}
