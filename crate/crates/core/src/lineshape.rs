//! Steady-state driven coupled-oscillator model of the emitter–antenna
//! hybrid and the resulting interferometric transmission spectra.
//!
//! Two damped oscillators (a broad antenna resonance and a narrow emitter
//! line) are driven at frequency ω and coupled with strength `g`. The
//! detected transmission is the interference of the incident beam with the
//! fields scattered by both oscillators,
//!
//! ```text
//! T(ω) = |1 + i·a(z)·e^{−iφ(z)}·(κ_p·x_p + κ_m·x_m)|²,
//! ```
//!
//! where `a(z)` and `φ(z) = φ₀ + arctan(z/z_R)` carry the focused-beam
//! axial envelope and Gouy phase. On focus a weak scatterer produces a
//! symmetric dip; away from focus the extra phase turns the narrow line
//! dispersive and finally into a peak. The module also provides the
//! adiabatic-elimination corrections (frequency pull and induced broadening
//! of the narrow line) and an asymmetry metric for classifying lineshapes.
//!
//! Frequencies inside this module are angular (rad/s); every public axis or
//! reported width is ordinary frequency (Hz).

use num_complex::Complex64;

use crate::beam::{axial_envelope, gouy_phase, FocusParams};
use crate::error::{Error, Result};
use crate::spectrum::{Spectrum, SpectrumKind};
use crate::units::{angular_to_hz, hz_to_angular};

/// One damped, driven harmonic oscillator of the hybrid model.
///
/// The equation-of-motion denominator is D(ω) = ω₀² − ω² − iγω. The drive
/// entering the steady state is F = f·γ·ω₀·e^{iθ} with dimensionless
/// amplitude `f`; this normalization makes a unit-amplitude oscillator
/// driven on resonance scatter with unit strength, so the on-focus
/// resonance dip of a lone scatterer is (1 − κ·f)².
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OscillatorParams {
    /// Resonance frequency ω₀, rad/s.
    pub omega: f64,
    /// Damping rate γ (angular FWHM), rad/s. Zero is allowed for a line
    /// whose width is supplied externally.
    pub gamma: f64,
    /// Dimensionless drive amplitude f ≥ 0.
    pub drive_amplitude: f64,
    /// Drive phase θ, radians.
    pub drive_phase: f64,
    /// Dimensionless detection coupling κ ≥ 0.
    pub scatter_coupling: f64,
}

impl OscillatorParams {
    /// Validated constructor in angular units.
    pub fn new(
        omega: f64,
        gamma: f64,
        drive_amplitude: f64,
        drive_phase: f64,
        scatter_coupling: f64,
    ) -> Result<Self> {
        if !(omega > 0.0) {
            return Err(Error::Domain(format!(
                "resonance frequency must be positive, got {omega} rad/s"
            )));
        }
        if !(gamma >= 0.0) {
            return Err(Error::Domain(format!(
                "damping must be non-negative, got {gamma} rad/s"
            )));
        }
        if !(drive_amplitude >= 0.0) {
            return Err(Error::Domain(format!(
                "drive amplitude must be non-negative, got {drive_amplitude}"
            )));
        }
        if !(scatter_coupling >= 0.0) {
            return Err(Error::Domain(format!(
                "scatter coupling must be non-negative, got {scatter_coupling}"
            )));
        }
        Ok(Self {
            omega,
            gamma,
            drive_amplitude,
            drive_phase,
            scatter_coupling,
        })
    }

    /// Constructor taking resonance and FWHM in Hz.
    pub fn from_hz(
        resonance_hz: f64,
        fwhm_hz: f64,
        drive_amplitude: f64,
        drive_phase: f64,
        scatter_coupling: f64,
    ) -> Result<Self> {
        Self::new(
            hz_to_angular(resonance_hz),
            hz_to_angular(fwhm_hz),
            drive_amplitude,
            drive_phase,
            scatter_coupling,
        )
    }

    /// Resonance frequency, Hz.
    pub fn resonance_hz(&self) -> f64 {
        angular_to_hz(self.omega)
    }

    /// Linewidth (FWHM), Hz.
    pub fn fwhm_hz(&self) -> f64 {
        angular_to_hz(self.gamma)
    }

    /// Equation-of-motion denominator D(ω) = ω₀² − ω² − iγω.
    pub fn denominator(&self, omega: f64) -> Complex64 {
        Complex64::new(
            self.omega * self.omega - omega * omega,
            -self.gamma * omega,
        )
    }

    /// Complex drive F = f·γ·ω₀·e^{iθ}.
    pub fn drive(&self) -> Complex64 {
        Complex64::from_polar(
            self.drive_amplitude * self.gamma * self.omega,
            self.drive_phase,
        )
    }
}

/// Coupled pair of oscillators plus the detection geometry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HybridModel {
    /// Broad antenna resonance.
    pub plasmon: OscillatorParams,
    /// Narrow emitter line.
    pub molecule: OscillatorParams,
    /// Coupling strength g, (rad/s)².
    pub coupling: f64,
    /// Detection phase offset φ₀ added to the Gouy phase, radians.
    pub detection_phase_offset: f64,
    /// Beam geometry supplying z_R and the axial envelope.
    pub focus: FocusParams,
}

/// Frequency pull and broadening of the narrow line caused by the antenna.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HybridizationReport {
    /// Shift of the emitter resonance, Hz (sign follows the detuning of the
    /// emitter from the antenna).
    pub lamb_shift_hz: f64,
    /// Extra FWHM of the emitter line induced by the antenna, Hz.
    pub induced_fwhm_hz: f64,
    /// Total emitter FWHM: intrinsic width plus induced width, Hz.
    pub total_emitter_fwhm_hz: f64,
    /// False when the antenna is less than 10× broader than the emitter,
    /// where the adiabatic elimination behind these numbers degrades.
    pub scale_separation_ok: bool,
}

impl HybridModel {
    /// Validated constructor.
    pub fn new(
        plasmon: OscillatorParams,
        molecule: OscillatorParams,
        coupling: f64,
        detection_phase_offset: f64,
        focus: FocusParams,
    ) -> Result<Self> {
        if !coupling.is_finite() {
            return Err(Error::Domain(format!(
                "coupling must be finite, got {coupling}"
            )));
        }
        Ok(Self {
            plasmon,
            molecule,
            coupling,
            detection_phase_offset,
            focus,
        })
    }

    /// Convenience constructor in Hz with the dip-calibrated drive
    /// convention: both drive amplitudes are 1 with zero drive phase, and
    /// each detection coupling equals the extinction coupling ζ of its
    /// oscillator, so a lone scatterer dips to (1 − ζ)² on focus.
    #[allow(clippy::too_many_arguments)]
    pub fn calibrated(
        plasmon_resonance_hz: f64,
        plasmon_fwhm_hz: f64,
        zeta_p: f64,
        molecule_resonance_hz: f64,
        molecule_fwhm_hz: f64,
        zeta_m: f64,
        coupling: f64,
        detection_phase_offset: f64,
        focus: FocusParams,
    ) -> Result<Self> {
        let plasmon = OscillatorParams::from_hz(plasmon_resonance_hz, plasmon_fwhm_hz, 1.0, 0.0, zeta_p)?;
        let molecule =
            OscillatorParams::from_hz(molecule_resonance_hz, molecule_fwhm_hz, 1.0, 0.0, zeta_m)?;
        Self::new(plasmon, molecule, coupling, detection_phase_offset, focus)
    }

    /// Copy with the emitter disconnected (no coupling, no emitter drive or
    /// detection): the antenna-only reference model.
    pub fn antenna_only(&self) -> Self {
        let mut bare = *self;
        bare.coupling = 0.0;
        bare.molecule.drive_amplitude = 0.0;
        bare.molecule.scatter_coupling = 0.0;
        bare
    }

    /// Steady-state complex amplitudes (x_p, x_m) at drive frequency ω
    /// (rad/s), from the 2×2 linear system
    /// D_p·x_p + g·x_m = F_p, g·x_p + D_m·x_m = F_m.
    pub fn coupled_response(&self, omega: f64) -> Result<(Complex64, Complex64)> {
        let d_p = self.plasmon.denominator(omega);
        let d_m = self.molecule.denominator(omega);
        let g = self.coupling;
        let den = d_p * d_m - g * g;
        let scale = d_p.norm() * d_m.norm() + g * g;
        if den.norm() <= 1e-12 * scale {
            return Err(Error::Singular(format!(
                "coupled-oscillator denominator vanishes at omega = {omega} rad/s"
            )));
        }
        let f_p = self.plasmon.drive();
        let f_m = self.molecule.drive();
        let x_p = (f_p * d_m - g * f_m) / den;
        let x_m = (f_m * d_p - g * f_p) / den;
        Ok((x_p, x_m))
    }

    /// Transmission spectrum on the given frequency grid (Hz) with the
    /// scatterer at axial position `z_nm`.
    pub fn transmission(&self, grid_hz: &[f64], z_nm: f64) -> Result<Spectrum> {
        let phase = self.detection_phase_offset + gouy_phase(z_nm, self.focus.rayleigh_range_nm)?;
        let envelope = axial_envelope(z_nm, self.focus.rayleigh_range_nm)?;
        let prefactor = Complex64::i() * envelope * Complex64::from_polar(1.0, -phase);
        let values = grid_hz
            .iter()
            .map(|&f| {
                let omega = hz_to_angular(f);
                let (x_p, x_m) = self.coupled_response(omega)?;
                let scattered = self.plasmon.scatter_coupling * x_p
                    + self.molecule.scatter_coupling * x_m;
                Ok((Complex64::new(1.0, 0.0) + prefactor * scattered).norm_sqr())
            })
            .collect::<Result<Vec<f64>>>()?;
        Spectrum::new(grid_hz.to_vec(), values, SpectrumKind::Transmission)
    }

    /// Frequency pull and induced broadening of the narrow line from
    /// adiabatic elimination of the antenna: with Σ(ω) = g²/D_p(ω),
    /// the shift is −Re Σ(ω_m)/(2ω_m) and the induced angular width is
    /// Im Σ(ω_m)/ω_m, both reported in Hz.
    pub fn hybridized_emitter(&self) -> Result<HybridizationReport> {
        let omega_m = self.molecule.omega;
        let d_p = self.plasmon.denominator(omega_m);
        if d_p.norm() == 0.0 {
            return Err(Error::Singular(
                "antenna response diverges at the emitter frequency".into(),
            ));
        }
        let sigma = Complex64::new(self.coupling * self.coupling, 0.0) / d_p;
        let lamb_shift_hz = angular_to_hz(-sigma.re / (2.0 * omega_m));
        let induced_fwhm_hz = angular_to_hz(sigma.im / omega_m);
        let total_emitter_fwhm_hz = self.molecule.fwhm_hz() + induced_fwhm_hz;
        let scale_separation_ok =
            self.molecule.gamma <= 0.0 || self.plasmon.gamma / self.molecule.gamma >= 10.0;
        Ok(HybridizationReport {
            lamb_shift_hz,
            induced_fwhm_hz,
            total_emitter_fwhm_hz,
            scale_separation_ok,
        })
    }
}

/// Transmission of a single scatterer with extinction coupling ζ:
/// T(ω) = |1 − ζ·a(z)·e^{−iφ(z)}·Λ(ω)|² with the resonance profile
/// Λ(ω) = D(ω₀)/D(ω) (equal to the familiar half-width Lorentzian
/// (γ/2)/(i(ω₀−ω)+γ/2) in the narrow-line limit, and exactly the
/// antenna-only reduction of [`HybridModel::transmission`]).
pub fn single_scatterer_transmission(
    grid_hz: &[f64],
    osc: &OscillatorParams,
    zeta: f64,
    detection_phase_offset: f64,
    focus: &FocusParams,
    z_nm: f64,
) -> Result<Spectrum> {
    if !(0.0..1.0).contains(&zeta) {
        return Err(Error::Domain(format!(
            "extinction coupling must lie in [0, 1), got {zeta}"
        )));
    }
    if !(osc.gamma > 0.0) {
        return Err(Error::Domain(
            "a lone scatterer needs a positive linewidth".into(),
        ));
    }
    let phase = detection_phase_offset + gouy_phase(z_nm, focus.rayleigh_range_nm)?;
    let envelope = axial_envelope(z_nm, focus.rayleigh_range_nm)?;
    // Λ = D(ω₀)/D(ω) is normalized to 1 at the line center, so the on-focus
    // resonance transmission is (1 − ζ)².
    let prefactor = -envelope * Complex64::from_polar(zeta, -phase);
    let resonance_response = Complex64::new(0.0, -osc.gamma * osc.omega);
    let values: Vec<f64> = grid_hz
        .iter()
        .map(|&f| {
            let omega = hz_to_angular(f);
            let lambda = resonance_response / osc.denominator(omega);
            (Complex64::new(1.0, 0.0) + prefactor * lambda).norm_sqr()
        })
        .collect();
    Spectrum::new(grid_hz.to_vec(), values, SpectrumKind::Transmission)
}

/// Coupling strength g that induces the given extra FWHM (Hz) on an emitter
/// at `emitter_resonance_hz`: inversion of [`HybridModel::hybridized_emitter`],
/// g = |D_p(ω_m)|·√(Γ_induced/γ_p).
pub fn coupling_from_induced_width(
    plasmon: &OscillatorParams,
    emitter_resonance_hz: f64,
    induced_fwhm_hz: f64,
) -> Result<f64> {
    if !(plasmon.gamma > 0.0) {
        return Err(Error::Domain(
            "antenna damping must be positive to induce width".into(),
        ));
    }
    if !(induced_fwhm_hz >= 0.0) {
        return Err(Error::Domain(format!(
            "induced width must be non-negative, got {induced_fwhm_hz} Hz"
        )));
    }
    let omega_m = hz_to_angular(emitter_resonance_hz);
    let d_p = plasmon.denominator(omega_m).norm();
    Ok(d_p * (hz_to_angular(induced_fwhm_hz) / plasmon.gamma).sqrt())
}

/// Outcome of the narrow-feature analysis shared by [`fano_asymmetry`] and
/// [`feature_contrast`].
struct FeatureExcursions {
    /// Largest excursion above the local baseline and its frequency.
    above: (f64, f64),
    /// Largest excursion below the local baseline and its frequency.
    below: (f64, f64),
}

/// Locate the single narrow feature of a spectrum and measure its maximum
/// excursions above and below a local linear baseline.
///
/// A first baseline through the edge segments flags the feature; the
/// baseline is then refit on points away from the feature and excursions
/// are measured within a window of a few feature widths. This two-pass
/// scheme keeps a symmetric dip or peak from leaking tail amplitude into
/// the opposite-sign excursion.
fn feature_excursions(s: &Spectrum) -> Result<FeatureExcursions> {
    let n = s.len();
    if n < 16 {
        return Err(Error::Sampling(format!(
            "feature analysis needs at least 16 points, got {n}"
        )));
    }
    let f = &s.frequency_hz;
    let v = &s.values;
    let edge = (n / 10).max(3);

    let segment_mean = |lo: usize, hi: usize| {
        let fx = f[lo..hi].iter().sum::<f64>() / (hi - lo) as f64;
        let fy = v[lo..hi].iter().sum::<f64>() / (hi - lo) as f64;
        (fx, fy)
    };
    let (xl, yl) = segment_mean(0, edge);
    let (xr, yr) = segment_mean(n - edge, n);
    let slope = (yr - yl) / (xr - xl);
    let line = |x: f64| yl + slope * (x - xl);

    let residual: Vec<f64> = (0..n).map(|i| v[i] - line(f[i])).collect();
    let edge_rms = {
        let mut acc = 0.0;
        for i in (0..edge).chain(n - edge..n) {
            acc += residual[i] * residual[i];
        }
        (acc / (2 * edge) as f64).sqrt()
    };
    let vmax = v.iter().cloned().fold(0.0f64, f64::max);
    let threshold = (6.0 * edge_rms).max(1e-9 * vmax.max(1e-300));

    let core = residual
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .map(|(i, _)| i)
        .expect("non-empty");
    if residual[core].abs() <= threshold {
        return Err(Error::Detection(format!(
            "no spectral feature above the noise threshold {threshold:.3e}"
        )));
    }

    // Feature width from the half-amplitude crossings of |residual|.
    let half = residual[core].abs() / 2.0;
    let mut left = f[0];
    for i in (0..core).rev() {
        if residual[i].abs() <= half {
            left = f[i];
            break;
        }
    }
    let mut right = f[n - 1];
    for i in core + 1..n {
        if residual[i].abs() <= half {
            right = f[i];
            break;
        }
    }
    let width = (right - left).max(s.bin_width_hz());
    let center = f[core];
    let lo_f = center - 5.0 * width;
    let hi_f = center + 5.0 * width;

    // Refit the baseline on points clear of the feature when enough remain.
    let outside: Vec<usize> = (0..n).filter(|&i| f[i] < lo_f || f[i] > hi_f).collect();
    let refined_line: Box<dyn Fn(f64) -> f64> = if outside.len() >= 4 {
        let m = outside.len() as f64;
        let mx = outside.iter().map(|&i| f[i]).sum::<f64>() / m;
        let my = outside.iter().map(|&i| v[i]).sum::<f64>() / m;
        let mut sxx = 0.0;
        let mut sxy = 0.0;
        for &i in &outside {
            sxx += (f[i] - mx) * (f[i] - mx);
            sxy += (f[i] - mx) * (v[i] - my);
        }
        let b = if sxx > 0.0 { sxy / sxx } else { 0.0 };
        Box::new(move |x: f64| my + b * (x - mx))
    } else {
        Box::new(line)
    };

    let mut above = (0.0, center);
    let mut below = (0.0, center);
    for i in 0..n {
        if f[i] < lo_f || f[i] > hi_f {
            continue;
        }
        let r = v[i] - refined_line(f[i]);
        if r > above.0 {
            above = (r, f[i]);
        }
        if -r > below.0 {
            below = (-r, f[i]);
        }
    }
    Ok(FeatureExcursions { above, below })
}

/// Signed asymmetry of the narrow feature in a spectrum.
///
/// Zero for a symmetric dip or peak; for a dispersive profile the magnitude
/// is the ratio of the smaller to the larger excursion and the sign records
/// which side of the feature rises above the baseline. The metric flips
/// sign when the scatterer crosses the focal plane.
pub fn fano_asymmetry(s: &Spectrum) -> Result<f64> {
    let FeatureExcursions { above, below } = feature_excursions(s)?;
    let (a_plus, nu_plus) = above;
    let (a_minus, nu_minus) = below;
    let larger = a_plus.max(a_minus);
    let smaller = a_plus.min(a_minus);
    if smaller == 0.0 || larger == 0.0 {
        return Ok(0.0);
    }
    Ok((nu_plus - nu_minus).signum() * smaller / larger)
}

/// Absolute contrast of the narrow feature: the larger of the excursions
/// above/below the local baseline.
pub fn feature_contrast(s: &Spectrum) -> Result<f64> {
    let FeatureExcursions { above, below } = feature_excursions(s)?;
    Ok(above.0.max(below.0))
}
