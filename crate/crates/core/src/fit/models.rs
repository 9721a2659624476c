//! Packaged fit front ends: each wraps [`lm_minimize`] with a forward
//! model, self-initialization heuristics and named, unit-carrying results.
//!
//! Weighting follows the data kind: photon-counting spectra are weighted by
//! 1/max(counts, 1) per bin (shot noise), normalized transmission spectra
//! uniformly.

use crate::beam::{zeta_from_dip, FocusParams};
use crate::bloch::{
    g2_with_background, g2_with_substeps, plan_substeps, DriveParams, EmitterParams,
};
use crate::error::{Error, Result};
use crate::fit::{lm_minimize, FitOptions, FitResult, ParamSpec};
use crate::lineshape::{fano_asymmetry, single_scatterer_transmission, HybridModel, OscillatorParams};
use crate::par::map_indexed;
use crate::spectrum::{dip_summary, peak_summary, Spectrum, SpectrumKind};
use crate::units::hz_to_angular;

/// Square-root weights per data point for the given spectrum kind.
fn sqrt_weights(s: &Spectrum) -> Vec<f64> {
    match s.kind {
        SpectrumKind::Fluorescence => s
            .values
            .iter()
            .map(|&c| (1.0 / c.max(1.0)).sqrt())
            .collect(),
        SpectrumKind::Transmission => vec![1.0; s.len()],
    }
}

/// Lorentzian profile value: baseline + amplitude·hw²/((f−center)² + hw²).
fn lorentzian_value(f: f64, center: f64, fwhm: f64, amplitude: f64, baseline: f64) -> f64 {
    let hw = fwhm / 2.0;
    baseline + amplitude * hw * hw / ((f - center) * (f - center) + hw * hw)
}

/// Result of a Lorentzian line fit.
#[derive(Debug, Clone)]
pub struct LorentzianFit {
    /// Line center, Hz.
    pub center_hz: f64,
    /// Full width at half maximum, Hz.
    pub fwhm_hz: f64,
    /// Signed peak amplitude relative to the baseline (negative for dips).
    pub amplitude: f64,
    /// Constant baseline level.
    pub baseline: f64,
    /// Raw minimizer output (errors, covariance, diagnostics).
    pub result: FitResult,
}

/// Starting point for [`fit_lorentzian`] when self-initialization is not
/// wanted.
#[derive(Debug, Clone, Copy)]
pub struct LorentzianGuess {
    /// Line center, Hz.
    pub center_hz: f64,
    /// Full width at half maximum, Hz.
    pub fwhm_hz: f64,
    /// Signed amplitude.
    pub amplitude: f64,
    /// Baseline level.
    pub baseline: f64,
}

fn lorentzian_self_init(s: &Spectrum) -> LorentzianGuess {
    let n = s.len();
    let edge = (n / 10).max(2);
    let baseline = (s.values[..edge].iter().sum::<f64>()
        + s.values[n - edge..].iter().sum::<f64>())
        / (2 * edge) as f64;
    let span = s.frequency_hz[n - 1] - s.frequency_hz[0];
    let up = peak_summary(&s.frequency_hz, &s.values, baseline);
    let down = dip_summary(&s.frequency_hz, &s.values, baseline);
    let summary = match (&up, &down) {
        (Ok(a), Ok(b)) => Some(if a.height >= b.height { (a, 1.0) } else { (b, -1.0) }),
        (Ok(a), Err(_)) => Some((a, 1.0)),
        (Err(_), Ok(b)) => Some((b, -1.0)),
        (Err(_), Err(_)) => None,
    };
    match summary {
        Some((peak, sign)) => LorentzianGuess {
            center_hz: peak.center_hz,
            fwhm_hz: peak.fwhm_hz.max(span * 1e-3),
            amplitude: sign * peak.height,
            baseline,
        },
        // Degenerate (flat or edge-peaked) data: a benign starting point
        // that lets the minimizer report a zero-amplitude solution.
        None => LorentzianGuess {
            center_hz: s.frequency_hz[n / 2],
            fwhm_hz: span / 4.0,
            amplitude: 0.0,
            baseline,
        },
    }
}

/// Fit a Lorentzian line (center, FWHM, amplitude, baseline) to a spectrum,
/// self-initializing from the data when no guess is given.
pub fn fit_lorentzian(s: &Spectrum, guess: Option<LorentzianGuess>) -> Result<LorentzianFit> {
    if s.len() < 8 {
        return Err(Error::Sampling(format!(
            "a Lorentzian fit needs at least 8 points, got {}",
            s.len()
        )));
    }
    let init = guess.unwrap_or_else(|| lorentzian_self_init(s));
    let span = s.frequency_hz[s.len() - 1] - s.frequency_hz[0];
    let value_scale = init
        .amplitude
        .abs()
        .max(init.baseline.abs())
        .max(1e-12);
    let specs = [
        ParamSpec::linear("center_hz", init.center_hz).with_step_scale(span / 100.0),
        ParamSpec::log("fwhm_hz", init.fwhm_hz.max(span * 1e-4)),
        ParamSpec::linear("amplitude", init.amplitude).with_step_scale(value_scale),
        ParamSpec::linear("baseline", init.baseline).with_step_scale(value_scale),
    ];
    let freq = s.frequency_hz.clone();
    let data = s.values.clone();
    let w = sqrt_weights(s);
    let residual = move |p: &[f64]| -> Result<Vec<f64>> {
        Ok(freq
            .iter()
            .zip(&data)
            .zip(&w)
            .map(|((&f, &d), &wi)| wi * (lorentzian_value(f, p[0], p[1], p[2], p[3]) - d))
            .collect())
    };
    let result = lm_minimize(residual, &specs, &FitOptions::default())?;
    Ok(LorentzianFit {
        center_hz: result.parameters[0],
        fwhm_hz: result.parameters[1],
        amplitude: result.parameters[2],
        baseline: result.parameters[3],
        result,
    })
}

/// Detection phase guess from the asymmetry metric of a dispersive line:
/// inverts the small-phase lobe-ratio relation |metric| = tan²(φ/2), with
/// the sign convention that a positive phase puts the transmission dip lobe
/// on the high-frequency side.
pub fn phase_from_asymmetry(metric: f64) -> f64 {
    -metric.signum() * 2.0 * metric.abs().sqrt().atan()
}

/// Result of a single-scatterer dispersive-profile fit.
#[derive(Debug, Clone)]
pub struct SingleScattererFit {
    /// Resonance frequency, Hz.
    pub resonance_hz: f64,
    /// Linewidth (FWHM), Hz.
    pub fwhm_hz: f64,
    /// Extinction coupling ζ.
    pub zeta: f64,
    /// Total interference phase at the scatterer, radians.
    pub phase: f64,
    /// Raw minimizer output.
    pub result: FitResult,
}

/// Fit the interferometric profile of one scatterer at a known axial
/// position: free parameters are resonance, width, extinction coupling and
/// the detection phase offset.
pub fn fit_single_scatterer(
    s: &Spectrum,
    focus: &FocusParams,
    z_nm: f64,
) -> Result<SingleScattererFit> {
    if s.len() < 16 {
        return Err(Error::Sampling(format!(
            "a dispersive-profile fit needs at least 16 points, got {}",
            s.len()
        )));
    }
    let n = s.len();
    let edge = (n / 10).max(2);
    let baseline = (s.values[..edge].iter().sum::<f64>()
        + s.values[n - edge..].iter().sum::<f64>())
        / (2 * edge) as f64;
    let span = s.frequency_hz[n - 1] - s.frequency_hz[0];

    // Depth and width from whichever orientation shows a feature; phase
    // sign from the asymmetry metric.
    let summary = dip_summary(&s.frequency_hz, &s.values, baseline)
        .or_else(|_| peak_summary(&s.frequency_hz, &s.values, baseline))?;
    let phase_init = fano_asymmetry(s).map(phase_from_asymmetry).unwrap_or(0.0);
    let depth = (summary.height / baseline.max(1e-12)).min(0.95);
    let zeta_init = zeta_from_dip(depth).unwrap_or(0.01).max(1e-4);

    let specs = [
        ParamSpec::linear("resonance_hz", summary.center_hz).with_step_scale(span / 100.0),
        ParamSpec::log("fwhm_hz", summary.fwhm_hz.max(span * 1e-4)),
        ParamSpec::linear("zeta", zeta_init).with_bounds(0.0, 0.999).with_step_scale(0.02),
        ParamSpec::linear("phase", phase_init).with_step_scale(0.1),
    ];
    let freq = s.frequency_hz.clone();
    let data = s.values.clone();
    let w = sqrt_weights(s);
    let focus = *focus;
    let residual = move |p: &[f64]| -> Result<Vec<f64>> {
        let osc = OscillatorParams::from_hz(p[0], p[1], 0.0, 0.0, 0.0)?;
        let model = single_scatterer_transmission(&freq, &osc, p[2], p[3], &focus, z_nm)?;
        Ok(model
            .values
            .iter()
            .zip(&data)
            .zip(&w)
            .map(|((&m, &d), &wi)| wi * (m - d))
            .collect())
    };
    let result = lm_minimize(residual, &specs, &FitOptions::default())?;
    Ok(SingleScattererFit {
        resonance_hz: result.parameters[0],
        fwhm_hz: result.parameters[1],
        zeta: result.parameters[2],
        phase: result.parameters[3],
        result,
    })
}

/// Options of the global axial-stack fit.
#[derive(Debug, Clone, Copy)]
pub struct ZstackFitOptions {
    /// Fit the emitter–antenna coupling (otherwise hold the template's).
    pub fit_coupling: bool,
    /// Add one additive baseline offset per spectrum.
    pub per_spectrum_baseline: bool,
}

impl Default for ZstackFitOptions {
    fn default() -> Self {
        Self {
            fit_coupling: true,
            per_spectrum_baseline: false,
        }
    }
}

/// Result of the global axial-stack fit.
#[derive(Debug, Clone)]
pub struct ZstackFit {
    /// Best-fit hybrid model (shared across the stack).
    pub model: HybridModel,
    /// Axial position of the first spectrum, nm.
    pub z_offset_nm: f64,
    /// Axial step between consecutive spectra, nm.
    pub z_step_nm: f64,
    /// Per-spectrum additive baselines (empty unless enabled).
    pub baselines: Vec<f64>,
    /// Residual sum of squares per spectrum.
    pub per_spectrum_rss: Vec<f64>,
    /// Raw minimizer output.
    pub result: FitResult,
}

/// Globally fit one hybrid model to a stack of transmission spectra taken
/// at equally spaced axial positions z_k = z_offset + k·z_step.
///
/// Shared free parameters: coupling (optional), emitter resonance offset
/// and width, antenna extinction coupling, detection phase offset, and the
/// two axial-geometry numbers. The antenna resonance and width, the beam
/// geometry and the drive conventions are taken from the template.
pub fn fit_zstack(
    stack: &[(f64, Spectrum)],
    template: &HybridModel,
    options: &ZstackFitOptions,
) -> Result<ZstackFit> {
    if stack.len() < 3 {
        return Err(Error::InsufficientScans(format!(
            "a stack fit needs at least 3 spectra, got {}",
            stack.len()
        )));
    }
    for pair in stack.windows(2) {
        if pair[0].0 == pair[1].0 {
            return Err(Error::Sampling(
                "stack spectra must sit at distinct axial positions".into(),
            ));
        }
    }
    if options.fit_coupling && !(template.coupling > 0.0) {
        return Err(Error::Domain(
            "coupling fit needs a positive starting coupling in the template".into(),
        ));
    }
    if !(template.molecule.gamma > 0.0) {
        return Err(Error::Domain(
            "stack fit needs a positive emitter width in the template".into(),
        ));
    }

    let n_spectra = stack.len();
    let z0_init = stack[0].0;
    let dz_init = (stack[n_spectra - 1].0 - z0_init) / (n_spectra - 1) as f64;

    let mut specs = Vec::new();
    if options.fit_coupling {
        specs.push(ParamSpec::log("coupling", template.coupling));
    }
    specs.push(
        ParamSpec::linear("emitter_offset_hz", 0.0).with_step_scale(2e7),
    );
    specs.push(ParamSpec::log("emitter_fwhm_hz", template.molecule.fwhm_hz()));
    specs.push(
        ParamSpec::linear("antenna_zeta", template.plasmon.scatter_coupling)
            .with_bounds(0.0, 0.99)
            .with_step_scale(0.01),
    );
    specs.push(
        ParamSpec::linear("phase_offset", template.detection_phase_offset).with_step_scale(0.1),
    );
    specs.push(
        ParamSpec::linear("z_offset_nm", z0_init)
            .with_step_scale(dz_init.abs().max(10.0)),
    );
    specs.push(
        ParamSpec::linear("z_step_nm", dz_init).with_step_scale(dz_init.abs().max(10.0) / 4.0),
    );
    if options.per_spectrum_baseline {
        for k in 0..n_spectra {
            specs.push(ParamSpec::linear(&format!("baseline_{k}"), 0.0).with_step_scale(0.01));
        }
    }

    let template = *template;
    let opts = *options;
    let unpack = move |p: &[f64]| -> (HybridModel, f64, f64, Vec<f64>) {
        let mut idx = 0;
        let mut model = template;
        if opts.fit_coupling {
            model.coupling = p[idx];
            idx += 1;
        }
        model.molecule.omega = template.molecule.omega + hz_to_angular(p[idx]);
        idx += 1;
        model.molecule.gamma = hz_to_angular(p[idx]);
        idx += 1;
        model.plasmon.scatter_coupling = p[idx];
        idx += 1;
        model.detection_phase_offset = p[idx];
        idx += 1;
        let z0 = p[idx];
        idx += 1;
        let dz = p[idx];
        idx += 1;
        let baselines = if opts.per_spectrum_baseline {
            p[idx..idx + n_spectra].to_vec()
        } else {
            vec![0.0; n_spectra]
        };
        (model, z0, dz, baselines)
    };

    let grids: Vec<Vec<f64>> = stack.iter().map(|(_, s)| s.frequency_hz.clone()).collect();
    let data: Vec<Vec<f64>> = stack.iter().map(|(_, s)| s.values.clone()).collect();
    let unpack2 = unpack.clone();
    let residual = move |p: &[f64]| -> Result<Vec<f64>> {
        let (model, z0, dz, baselines) = unpack2(p);
        let per_spectrum = map_indexed(grids.len(), |k| -> Result<Vec<f64>> {
            let z = z0 + k as f64 * dz;
            let s = model.transmission(&grids[k], z)?;
            Ok(s.values
                .iter()
                .zip(&data[k])
                .map(|(&m, &d)| m + baselines[k] - d)
                .collect())
        });
        let mut out = Vec::new();
        for r in per_spectrum {
            out.extend(r?);
        }
        Ok(out)
    };

    let result = lm_minimize(residual, &specs, &FitOptions::default())?;
    let (model, z0, dz, baselines) = unpack(&result.parameters);

    // Per-spectrum residual norms at the solution.
    let mut per_spectrum_rss = Vec::with_capacity(n_spectra);
    for (k, (_, s)) in stack.iter().enumerate() {
        let z = z0 + k as f64 * dz;
        let m = model.transmission(&s.frequency_hz, z)?;
        per_spectrum_rss.push(
            m.values
                .iter()
                .zip(&s.values)
                .map(|(&mv, &d)| {
                    let r = mv + baselines[k] - d;
                    r * r
                })
                .sum(),
        );
    }

    Ok(ZstackFit {
        model,
        z_offset_nm: z0,
        z_step_nm: dz,
        baselines: if options.per_spectrum_baseline {
            baselines
        } else {
            Vec::new()
        },
        per_spectrum_rss,
        result,
    })
}

/// One measured correlation curve under a known drive.
///
/// The Rabi frequency is an input, not a fitted parameter: a resonantly
/// driven two-level system re-excited from the ground state produces a
/// correlation curve that depends only on the eigenvalue pair of the
/// (coherence, population) system — equivalently on Γ₁+Γ₂ and Γ₁Γ₂+Ω² —
/// so rates and drive strength cannot all be determined from the curves
/// alone. The drive is calibrated independently (saturation curve or power
/// meter) and pinning it makes the shared rates identifiable.
#[derive(Debug, Clone)]
pub struct G2Dataset {
    /// Delay grid, seconds, strictly increasing and non-negative.
    pub tau_s: Vec<f64>,
    /// Measured g² per delay.
    pub g2: Vec<f64>,
    /// Known Rabi frequency of the resonant drive, rad/s.
    pub rabi_frequency: f64,
}

/// Result of a joint correlation fit across drive powers.
#[derive(Debug, Clone)]
pub struct G2Fit {
    /// Population decay rate Γ₁, rad/s.
    pub gamma1: f64,
    /// Pure dephasing rate Γ*, rad/s.
    pub pure_dephasing: f64,
    /// Signal fraction ρ_s of the detected light.
    pub signal_fraction: f64,
    /// Raw minimizer output.
    pub result: FitResult,
}

impl G2Fit {
    /// Excited-state lifetime T₁ = 1/Γ₁, seconds.
    pub fn t1_seconds(&self) -> f64 {
        1.0 / self.gamma1
    }
}

/// Starting rates for [`fit_g2`].
#[derive(Debug, Clone, Copy)]
pub struct G2Guess {
    /// Population decay rate Γ₁, rad/s.
    pub gamma1: f64,
    /// Pure dephasing rate Γ*, rad/s.
    pub pure_dephasing: f64,
    /// Signal fraction in (0, 1].
    pub signal_fraction: f64,
}

/// Jointly fit g²(τ) curves taken at several known drive strengths,
/// sharing the emitter rates (Γ₁, Γ*) and the background level ρ_s across
/// all datasets.
///
/// Caveat: when both of the rate assignments (Γ₁, Γ₂) and (Γ₂, Γ₁) yield a
/// non-negative Γ*, they produce identical curves, and the fit returns the
/// solution nearest the starting point. Start Γ₁ from an independent
/// lifetime estimate to select the physical branch.
pub fn fit_g2(datasets: &[G2Dataset], guess: &G2Guess) -> Result<G2Fit> {
    if datasets.is_empty() {
        return Err(Error::Sampling("need at least one dataset".into()));
    }
    let t1_init = 1.0 / guess.gamma1;
    for (j, d) in datasets.iter().enumerate() {
        if d.tau_s.len() != d.g2.len() || d.tau_s.len() < 8 {
            return Err(Error::Sampling(format!(
                "dataset {j} needs at least 8 matched (tau, g2) points"
            )));
        }
        if !(d.rabi_frequency > 0.0) {
            return Err(Error::Domain(format!(
                "dataset {j} needs a positive Rabi frequency"
            )));
        }
        let span = *d.tau_s.last().expect("non-empty");
        if span < 5.0 * t1_init {
            return Err(Error::Coverage(format!(
                "dataset {j} spans {span:.3e} s, less than 5 lifetimes ({:.3e} s)",
                5.0 * t1_init
            )));
        }
    }

    // The discretization is frozen at the starting point (with headroom for
    // the rates to grow during fitting) so that finite-difference steps see
    // a smooth model.
    let reference = probe_emitter(2.0 * guess.gamma1, 2.0 * guess.pure_dephasing)?;
    let plans: Vec<Vec<usize>> = datasets
        .iter()
        .map(|d| {
            let drive = DriveParams::resonant(d.rabi_frequency)?;
            plan_substeps(&d.tau_s, &drive, &reference, 1.5)
        })
        .collect::<Result<_>>()?;

    let specs = [
        ParamSpec::log("gamma1", guess.gamma1),
        ParamSpec::linear("pure_dephasing", guess.pure_dephasing)
            .with_bounds(0.0, f64::INFINITY)
            .with_step_scale(0.2 * guess.gamma1),
        ParamSpec::linear("signal_fraction", guess.signal_fraction)
            .with_bounds(1e-3, 1.0)
            .with_step_scale(0.02),
    ];

    let taus: Vec<Vec<f64>> = datasets.iter().map(|d| d.tau_s.clone()).collect();
    let data: Vec<Vec<f64>> = datasets.iter().map(|d| d.g2.clone()).collect();
    let drives: Vec<f64> = datasets.iter().map(|d| d.rabi_frequency).collect();
    let n_sets = datasets.len();
    let residual = move |p: &[f64]| -> Result<Vec<f64>> {
        let emitter = probe_emitter(p[0], p[1])?;
        let rho_s = p[2];
        let per_set = map_indexed(n_sets, |j| -> Result<Vec<f64>> {
            let drive = DriveParams::resonant(drives[j])?;
            let ideal = g2_with_substeps(&taus[j], &drive, &emitter, &plans[j])?;
            let mixed = g2_with_background(&ideal, rho_s)?;
            Ok(mixed
                .iter()
                .zip(&data[j])
                .map(|(&m, &d)| m - d)
                .collect())
        });
        let mut out = Vec::new();
        for r in per_set {
            out.extend(r?);
        }
        Ok(out)
    };

    let result = lm_minimize(residual, &specs, &FitOptions::default())?;
    Ok(G2Fit {
        gamma1: result.parameters[0],
        pure_dephasing: result.parameters[1],
        signal_fraction: result.parameters[2],
        result,
    })
}

/// Internal emitter carrier for correlation fits: resonance and branching
/// play no role in g²(τ), only the rates do.
fn probe_emitter(gamma1: f64, pure_dephasing: f64) -> Result<EmitterParams> {
    EmitterParams::new(1e14, gamma1, 0.0, pure_dephasing, 0.5)
}

/// Result of a saturation-curve fit R(P) = R_∞·(P/P_sat)/(1 + P/P_sat).
#[derive(Debug, Clone)]
pub struct SaturationFit {
    /// Asymptotic detected rate R_∞.
    pub max_rate: f64,
    /// Saturation power P_sat (same units as the input powers).
    pub saturation_power: f64,
    /// Raw minimizer output.
    pub result: FitResult,
}

/// Fit a two-parameter saturation curve to detected rates versus power,
/// with shot-noise weighting.
pub fn fit_saturation(powers: &[f64], rates: &[f64]) -> Result<SaturationFit> {
    if powers.len() != rates.len() || powers.len() < 4 {
        return Err(Error::Sampling(format!(
            "a saturation fit needs at least 4 matched points, got {}",
            powers.len().min(rates.len())
        )));
    }
    let r_max = rates.iter().cloned().fold(0.0f64, f64::max);
    if !(r_max > 0.0) {
        return Err(Error::Detection("all rates are zero".into()));
    }
    // Initialize P_sat from the first power whose rate exceeds half of the
    // largest observed rate.
    let p_half = powers
        .iter()
        .zip(rates)
        .find(|(_, &r)| r >= r_max / 2.0)
        .map(|(&p, _)| p)
        .unwrap_or(powers[powers.len() / 2]);
    let specs = [
        ParamSpec::log("max_rate", 1.2 * r_max),
        ParamSpec::log("saturation_power", p_half.max(1e-12)),
    ];
    let powers2 = powers.to_vec();
    let rates2 = rates.to_vec();
    let residual = move |p: &[f64]| -> Result<Vec<f64>> {
        Ok(powers2
            .iter()
            .zip(&rates2)
            .map(|(&pw, &r)| {
                let s = pw / p[1];
                let w = (1.0 / r.max(1.0)).sqrt();
                w * (p[0] * s / (1.0 + s) - r)
            })
            .collect())
    };
    let result = lm_minimize(residual, &specs, &FitOptions::default())?;
    Ok(SaturationFit {
        max_rate: result.parameters[0],
        saturation_power: result.parameters[1],
        result,
    })
}
