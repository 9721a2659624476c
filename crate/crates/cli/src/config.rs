//! Experiment configuration: strict TOML sections mirroring the library's
//! parameter types, with explicit unit suffixes in every key name.
//!
//! Unknown keys are rejected so typos fail loudly, and every section is
//! re-validated through the library constructors when it is turned into
//! model parameters.

use serde::Deserialize;

use fanolab::beam::{zeta_from_dip, FocusParams};
use fanolab::bloch::EmitterParams;
use fanolab::lineshape::{HybridModel, OscillatorParams};
use fanolab::scan::{JitterModel, ScanConfig};
use fanolab::units::TAU;

/// Top-level configuration file. Each subcommand requires only the sections
/// it uses.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Root seed; `--seed` overrides it.
    pub seed: Option<u64>,
    pub focus: Option<FocusSection>,
    pub antenna: Option<AntennaSection>,
    pub molecule: Option<MoleculeSection>,
    pub hybrid: Option<HybridSection>,
    pub emitter: Option<EmitterSection>,
    pub spectrum: Option<SpectrumSection>,
    pub zstack: Option<ZstackSection>,
    pub g2: Option<G2Section>,
    pub saturation: Option<SaturationSection>,
    pub scans: Option<ScansSection>,
    pub image: Option<ImageSection>,
    pub fit: Option<FitSection>,
}

/// Focused-beam geometry.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FocusSection {
    pub wavelength_nm: f64,
    pub focal_fwhm_nm: f64,
    /// Explicit Rayleigh range; omit to derive it from the spot size.
    pub rayleigh_range_nm: Option<f64>,
    /// Medium index used when deriving the Rayleigh range (default 1.0).
    pub refractive_index: Option<f64>,
    /// Scatterer position along the axis (default 0, the focus).
    pub axial_position_nm: Option<f64>,
}

/// Broad antenna resonance, calibrated by its on-focus extinction dip.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AntennaSection {
    pub resonance_hz: f64,
    pub fwhm_hz: f64,
    /// On-focus transmission dip depth of the lone antenna, in (0, 1).
    pub extinction_dip: f64,
}

/// Narrow molecular resonance inside the composite model.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MoleculeSection {
    pub resonance_hz: f64,
    pub fwhm_hz: f64,
    /// On-focus dip depth of the directly detected molecule (default 0:
    /// only its back-action on the antenna is observed).
    pub extinction_dip: Option<f64>,
}

/// Oscillator coupling and detection geometry of the composite model.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HybridSection {
    /// Oscillator coupling constant g, rad²/s².
    pub coupling: f64,
    /// Constant detection-phase offset added to the Gouy phase, radians.
    pub detection_phase_offset: Option<f64>,
}

/// Two-level emitter for the Bloch-equation commands.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmitterSection {
    pub resonance_hz: f64,
    /// Excited-state lifetime T₁, ns.
    pub t1_ns: f64,
    /// Pure dephasing Γ*/2π, MHz (default 0).
    pub pure_dephasing_mhz: Option<f64>,
    /// Fraction of emission on the purely electronic line, in (0, 1]
    /// (default 1; must be below 1 for any red-shifted light to reach the
    /// detector in saturation simulations).
    pub branching_ratio: Option<f64>,
}

/// Grid and variant for the `spectrum` subcommand.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumSection {
    /// One of "composite", "antenna", "molecule".
    pub mode: String,
    pub center_hz: f64,
    pub span_hz: f64,
    pub n_points: usize,
    /// Axial position override, nm (default: the focus setting).
    pub z_nm: Option<f64>,
}

/// Axial stack settings for `zstack` and `fit-zstack`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZstackSection {
    pub n_positions: usize,
    /// Full axial extent of the stack, nm (positions span ±half of it).
    pub z_span_nm: f64,
    /// Scan grid center (default: the molecule resonance).
    pub center_hz: Option<f64>,
    pub span_hz: f64,
    pub n_points: usize,
    /// Mean detected counts per spectral point; > 0 adds shot noise.
    pub counts_per_point: Option<f64>,
    /// Where `fit-zstack` finds the stack (default: the output directory).
    pub data_dir: Option<String>,
    /// Whether `fit-zstack` frees the oscillator coupling (default true).
    pub fit_coupling: Option<bool>,
    /// Whether `fit-zstack` adds a per-spectrum baseline (default false).
    pub per_spectrum_baseline: Option<bool>,
}

/// Delay grid and drives for `g2` and `fit-g2`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct G2Section {
    /// One dataset per entry: Rabi frequency Ω/2π, MHz.
    pub rabi_mhz: Vec<f64>,
    pub tau_max_ns: f64,
    pub n_points: usize,
    /// Fraction of detected light from the emitter (default 1).
    pub signal_fraction: Option<f64>,
    /// Where `fit-g2` finds the datasets (default: the output directory).
    pub data_dir: Option<String>,
}

/// Saturation-curve settings.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SaturationSection {
    /// Asymptotic detected rate, counts/s.
    pub max_rate_cps: f64,
    /// Power at which the rate reaches half the asymptote (power units are
    /// the caller's; the curve only uses the ratio P/P_sat).
    pub saturation_power: f64,
    pub power_min: f64,
    pub power_max: f64,
    /// Number of log-spaced powers.
    pub n_points: usize,
    /// Integration time per point, s; > 0 adds shot noise (default 0).
    pub integration_s: Option<f64>,
}

/// Fast-scan generation for `scans` and input location for `align`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScansSection {
    pub center_hz: f64,
    pub span_hz: f64,
    pub n_bins: usize,
    pub n_scans: Option<usize>,
    pub scan_rate_hz_per_s: Option<f64>,
    pub mean_peak_counts: f64,
    pub baseline_counts: f64,
    pub noiseless: Option<bool>,
    /// Scanned line center (default: the window center).
    pub line_center_hz: Option<f64>,
    pub line_fwhm_hz: f64,
    /// "gaussian_per_scan" or "random_walk".
    pub jitter_kind: String,
    pub jitter_sigma_hz: f64,
    /// Where `align` finds the scan CSV (default: the output directory).
    pub data_dir: Option<String>,
}

/// Raster-image settings for `psf-sim` and input location for `localize`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageSection {
    pub center_x_nm: f64,
    pub center_y_nm: f64,
    pub total_counts: f64,
    pub pixel_pitch_nm: f64,
    pub nx: usize,
    pub ny: usize,
    /// Where `localize` finds the image (default: the output directory).
    pub data_dir: Option<String>,
}

/// Generic fit-input settings.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSection {
    /// Spectrum CSV for `fit-lorentzian` (default: `aligned.csv` in the
    /// output directory).
    pub input: Option<String>,
}

impl ExperimentConfig {
    /// Parse and structurally validate a TOML configuration.
    pub fn from_toml(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| format!("config does not parse: {e}"))
    }

    fn section<'a, T>(opt: &'a Option<T>, name: &str) -> Result<&'a T, String> {
        opt.as_ref()
            .ok_or_else(|| format!("config section [{name}] is required by this subcommand"))
    }

    /// Beam geometry from `[focus]`.
    pub fn focus(&self) -> Result<FocusParams, String> {
        let f = Self::section(&self.focus, "focus")?;
        let z = f.axial_position_nm.unwrap_or(0.0);
        let params = match f.rayleigh_range_nm {
            Some(zr) => FocusParams::new(f.wavelength_nm, f.focal_fwhm_nm, zr, z),
            None => FocusParams::with_derived_rayleigh_range(
                f.wavelength_nm,
                f.focal_fwhm_nm,
                f.refractive_index.unwrap_or(1.0),
                z,
            ),
        };
        params.map_err(|e| format!("[focus]: {e}"))
    }

    /// Composite antenna–molecule model from `[antenna]`, `[molecule]`,
    /// `[hybrid]` and `[focus]`.
    pub fn hybrid_model(&self) -> Result<HybridModel, String> {
        let focus = self.focus()?;
        let a = Self::section(&self.antenna, "antenna")?;
        let m = Self::section(&self.molecule, "molecule")?;
        let h = Self::section(&self.hybrid, "hybrid")?;
        let zeta_p = zeta_from_dip(a.extinction_dip).map_err(|e| format!("[antenna]: {e}"))?;
        let zeta_m = match m.extinction_dip {
            Some(dip) => zeta_from_dip(dip).map_err(|e| format!("[molecule]: {e}"))?,
            None => 0.0,
        };
        HybridModel::calibrated(
            a.resonance_hz,
            a.fwhm_hz,
            zeta_p,
            m.resonance_hz,
            m.fwhm_hz,
            zeta_m,
            h.coupling,
            h.detection_phase_offset.unwrap_or(0.0),
            focus,
        )
        .map_err(|e| format!("[hybrid]: {e}"))
    }

    /// Lone molecular scatterer (oscillator plus extinction coupling) from
    /// `[molecule]`.
    pub fn molecule_scatterer(&self) -> Result<(OscillatorParams, f64), String> {
        let m = Self::section(&self.molecule, "molecule")?;
        let osc = OscillatorParams::from_hz(m.resonance_hz, m.fwhm_hz, 1.0, 0.0, 0.0)
            .map_err(|e| format!("[molecule]: {e}"))?;
        let zeta = match m.extinction_dip {
            Some(dip) => zeta_from_dip(dip).map_err(|e| format!("[molecule]: {e}"))?,
            None => {
                return Err(
                    "[molecule]: extinction_dip is required to scan a lone molecule".into(),
                )
            }
        };
        Ok((osc, zeta))
    }

    /// Two-level emitter from `[emitter]`.
    pub fn emitter(&self) -> Result<EmitterParams, String> {
        let e = Self::section(&self.emitter, "emitter")?;
        EmitterParams::from_lifetime(
            e.resonance_hz,
            e.t1_ns * 1e-9,
            e.pure_dephasing_mhz.unwrap_or(0.0) * 1e6 * TAU,
            e.branching_ratio.unwrap_or(1.0),
        )
        .map_err(|err| format!("[emitter]: {err}"))
    }

    /// Detection-phase offset (0 when `[hybrid]` is absent).
    pub fn detection_phase_offset(&self) -> f64 {
        self.hybrid
            .as_ref()
            .and_then(|h| h.detection_phase_offset)
            .unwrap_or(0.0)
    }

    /// Scan acquisition settings and jitter model from `[scans]`.
    pub fn scan_setup(&self) -> Result<(ScanConfig, JitterModel, f64, f64), String> {
        let s = Self::section(&self.scans, "scans")?;
        let mut cfg = ScanConfig::new(
            s.center_hz,
            s.span_hz,
            s.n_bins,
            s.mean_peak_counts,
            s.baseline_counts,
        )
        .map_err(|e| format!("[scans]: {e}"))?;
        if let Some(n) = s.n_scans {
            cfg.n_scans = n;
        }
        if let Some(r) = s.scan_rate_hz_per_s {
            cfg.scan_rate_hz_per_s = r;
        }
        cfg.noiseless = s.noiseless.unwrap_or(false);
        cfg.validate().map_err(|e| format!("[scans]: {e}"))?;
        let jitter = match s.jitter_kind.as_str() {
            "gaussian_per_scan" => JitterModel::gaussian_per_scan(s.jitter_sigma_hz),
            "random_walk" => JitterModel::random_walk(s.jitter_sigma_hz),
            other => {
                return Err(format!(
                    "[scans]: unknown jitter_kind {other:?} (expected \
                     \"gaussian_per_scan\" or \"random_walk\")"
                ))
            }
        }
        .map_err(|e| format!("[scans]: {e}"))?;
        let line_center = s.line_center_hz.unwrap_or(s.center_hz);
        Ok((cfg, jitter, line_center, s.line_fwhm_hz))
    }
}
