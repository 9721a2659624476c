//! Transparency-window observables and the inverse problem of finding a
//! hybrid model that exhibits a prescribed window.
//!
//! A narrow emitter coupled to a broad antenna carves a transparency
//! window into the antenna's extinction dip: on focus the transmission
//! rises at the emitter frequency, by an amount set by the coupling, over
//! a width set by intrinsic plus induced broadening, around a center
//! pulled away from the bare emitter line. This module measures those
//! observables from spectra and solves for model parameters that hit
//! target values.

use crate::beam::{zeta_from_dip, FocusParams};
use crate::error::{Error, Result};
use crate::fit::{lm_minimize, FitOptions, FitResult, ParamSpec};
use crate::lineshape::{coupling_from_induced_width, fano_asymmetry, HybridModel, OscillatorParams};
use crate::spectrum::{centered_grid, peak_summary};

/// Fixed scene around which the transparency solver works: everything but
/// the coupling, the antenna detuning, the intrinsic emitter width and the
/// detection phase.
#[derive(Debug, Clone, Copy)]
pub struct TransparencyScene {
    /// Bare emitter resonance, Hz.
    pub molecule_resonance_hz: f64,
    /// Antenna linewidth (FWHM), Hz.
    pub plasmon_fwhm_hz: f64,
    /// On-focus extinction dip of the antenna alone, in (0, 1).
    pub antenna_dip: f64,
    /// Beam geometry.
    pub focus: FocusParams,
}

impl TransparencyScene {
    /// Scene of a strongly scattering antenna (50% dip, 20 THz wide) and a
    /// narrow emitter in a tight near-infrared focus.
    pub fn strong_antenna_weak_emitter() -> Result<Self> {
        let focus = FocusParams::with_derived_rayleigh_range(740.3, 270.0, 1.5, 0.0)?;
        Ok(Self {
            molecule_resonance_hz: 4.049_606_917_465_892e14,
            plasmon_fwhm_hz: 2.0e13,
            antenna_dip: 0.5,
            focus,
        })
    }
}

/// Target observables of the transparency window.
#[derive(Debug, Clone, Copy)]
pub struct TransparencyTargets {
    /// Relative on-focus transmission increase at the window center.
    pub relative_increase: f64,
    /// Full width of the window, Hz.
    pub total_fwhm_hz: f64,
    /// Shift of the window center from the bare emitter resonance, Hz.
    pub center_shift_hz: f64,
}

/// Measured properties of a transparency window at focus.
#[derive(Debug, Clone, Copy)]
pub struct TransparencyObservables {
    /// Relative transmission increase over the emitter-free baseline at
    /// the window center.
    pub relative_increase: f64,
    /// Full width at half maximum of the window, Hz.
    pub total_fwhm_hz: f64,
    /// Window center minus the bare emitter resonance, Hz.
    pub center_shift_hz: f64,
    /// Asymmetry metric of the on-focus composite spectrum (0 for a
    /// symmetric window).
    pub focus_asymmetry: f64,
}

/// Measure the transparency window of a model at focus on the given grid.
///
/// The window is the difference between the composite transmission and the
/// emitter-free baseline; its height is referenced to the baseline level
/// at the window center.
pub fn transparency_observables_on_grid(
    model: &HybridModel,
    grid_hz: &[f64],
) -> Result<TransparencyObservables> {
    let with_emitter = model.transmission(grid_hz, 0.0)?;
    let bare = model.antenna_only().transmission(grid_hz, 0.0)?;
    let diff: Vec<f64> = with_emitter
        .values
        .iter()
        .zip(&bare.values)
        .map(|(&a, &b)| a - b)
        .collect();
    let window = peak_summary(grid_hz, &diff, 0.0)?;
    let baseline_level = bare.values[window.peak_index].max(f64::MIN_POSITIVE);
    let focus_asymmetry = fano_asymmetry(&with_emitter)?;
    Ok(TransparencyObservables {
        relative_increase: window.height / baseline_level,
        total_fwhm_hz: window.fwhm_hz,
        center_shift_hz: window.center_hz - model.molecule.resonance_hz(),
        focus_asymmetry,
    })
}

/// [`transparency_observables_on_grid`] on a self-chosen grid: centered on
/// the predicted window, spanning twelve predicted widths.
pub fn transparency_observables(model: &HybridModel) -> Result<TransparencyObservables> {
    let report = model.hybridized_emitter()?;
    let width = report.total_emitter_fwhm_hz.max(model.molecule.fwhm_hz());
    if !(width > 0.0) {
        return Err(Error::Domain(
            "the emitter line has zero width; no window to measure".into(),
        ));
    }
    let center = model.molecule.resonance_hz() + report.lamb_shift_hz;
    let grid = centered_grid(center, 12.0 * width, 901)?;
    transparency_observables_on_grid(model, &grid)
}

/// Solution of the observables-to-model inversion.
#[derive(Debug, Clone)]
pub struct TransparencySolution {
    /// Model whose on-focus window matches the targets.
    pub model: HybridModel,
    /// Window observables of the returned model.
    pub observables: TransparencyObservables,
    /// Raw minimizer output of the inversion.
    pub result: FitResult,
}

/// Find a hybrid model whose on-focus transparency window matches the
/// targets, adjusting the emitter–antenna coupling, the antenna detuning,
/// the intrinsic emitter width and the detection phase.
///
/// The window is carved by the emitter's back-action on the antenna
/// response (the emitter itself is not detected): its depth fraction is
/// governed by induced/total broadening, its width by the total
/// broadening, its position by the antenna detuning, and its on-focus
/// symmetry by the detection phase — so the four targets pin the four free
/// parameters.
pub fn model_from_transparency_targets(
    targets: &TransparencyTargets,
    scene: &TransparencyScene,
) -> Result<TransparencySolution> {
    if !(targets.relative_increase > 0.0) {
        return Err(Error::Domain(format!(
            "target relative increase must be positive, got {}",
            targets.relative_increase
        )));
    }
    if !(targets.total_fwhm_hz > 0.0) {
        return Err(Error::Domain(format!(
            "target width must be positive, got {} Hz",
            targets.total_fwhm_hz
        )));
    }
    let zeta_p = zeta_from_dip(scene.antenna_dip)?;
    let nu_m = scene.molecule_resonance_hz;

    // Initial point from the linearized window algebra: a window of
    // induced/total ratio r lifts transmission by ≈ 2ζ_p·r/(1−ζ_p)
    // relative, and the adiabatic shift-to-broadening ratio fixes the
    // detuning via shift/induced = detuning/antenna width.
    let ratio_init =
        (targets.relative_increase * (1.0 - zeta_p) / (2.0 * zeta_p)).clamp(0.02, 0.8);
    let induced_init = ratio_init * targets.total_fwhm_hz;
    let gamma_m_init = targets.total_fwhm_hz - induced_init;
    let detuning_init = targets.center_shift_hz / induced_init * scene.plasmon_fwhm_hz;
    let plasmon_init = OscillatorParams::from_hz(
        nu_m - detuning_init,
        scene.plasmon_fwhm_hz,
        1.0,
        0.0,
        zeta_p,
    )?;
    let coupling_init = coupling_from_induced_width(&plasmon_init, nu_m, induced_init)?;

    // One evaluation grid frozen across the whole solve so the residual is
    // smooth under finite-difference probing.
    let grid = centered_grid(
        nu_m + targets.center_shift_hz,
        12.0 * targets.total_fwhm_hz,
        901,
    )?;
    let scene = *scene;
    let targets = *targets;
    let build = move |p: &[f64]| -> Result<HybridModel> {
        let plasmon =
            OscillatorParams::from_hz(nu_m - p[1], scene.plasmon_fwhm_hz, 1.0, 0.0, zeta_p)?;
        let molecule = OscillatorParams::from_hz(nu_m, p[2], 1.0, 0.0, 0.0)?;
        HybridModel::new(plasmon, molecule, p[0], p[3], scene.focus)
    };

    let specs = [
        ParamSpec::log("coupling", coupling_init),
        ParamSpec::linear("antenna_detuning_hz", detuning_init)
            .with_step_scale(0.05 * scene.plasmon_fwhm_hz),
        ParamSpec::log("emitter_fwhm_hz", gamma_m_init),
        ParamSpec::linear("detection_phase", 0.0).with_step_scale(0.05),
    ];
    let build2 = build;
    let grid2 = grid.clone();
    let target_center = nu_m + targets.center_shift_hz;
    let residual = move |p: &[f64]| -> Result<Vec<f64>> {
        let model = build2(p)?;
        let with_emitter = model.transmission(&grid2, 0.0)?;
        let bare = model.antenna_only().transmission(&grid2, 0.0)?;
        let diff: Vec<f64> = with_emitter
            .values
            .iter()
            .zip(&bare.values)
            .map(|(&a, &b)| a - b)
            .collect();
        let window = peak_summary(&grid2, &diff, 0.0)?;
        let baseline_level = bare.values[window.peak_index].max(f64::MIN_POSITIVE);
        // Smooth left/right imbalance of the window about the target
        // center: the masked asymmetry metric is for measured data; inside
        // the solver a fixed-window signed mean keeps the residual smooth
        // under finite differences.
        let half_span = 2.0 * targets.total_fwhm_hz;
        let (mut left, mut right, mut count) = (0.0, 0.0, 0usize);
        for (&f, &d) in grid2.iter().zip(&diff) {
            let x = f - target_center;
            if x.abs() <= half_span {
                if x < 0.0 {
                    left += d;
                } else {
                    right += d;
                }
                count += 1;
            }
        }
        let imbalance = (right - left) / (count.max(1) as f64 * window.height.max(1e-12));
        Ok(vec![
            (window.height / baseline_level - targets.relative_increase) / 0.01,
            (window.fwhm_hz - targets.total_fwhm_hz) / (0.02 * targets.total_fwhm_hz),
            (window.center_hz - target_center) / (0.1 * targets.center_shift_hz.abs().max(1e6)),
            imbalance / 0.01,
        ])
    };

    let mut options = FitOptions::default();
    options.max_iterations = 100;
    let result = lm_minimize(residual, &specs, &options)?;
    if !result.converged {
        return Err(Error::Accuracy(format!(
            "window inversion did not converge: {}",
            result.termination
        )));
    }
    let model = build(&result.parameters)?;
    let observables = transparency_observables_on_grid(&model, &grid)?;
    Ok(TransparencySolution {
        model,
        observables,
        result,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn reference_targets() -> TransparencyTargets {
        TransparencyTargets {
            relative_increase: 0.10,
            total_fwhm_hz: 2.9e8,
            center_shift_hz: 1.2e7,
        }
    }

    #[test]
    fn solver_hits_all_window_targets() {
        let scene = TransparencyScene::strong_antenna_weak_emitter().unwrap();
        let solution = model_from_transparency_targets(&reference_targets(), &scene).unwrap();
        let obs = solution.observables;
        assert_relative_eq!(obs.relative_increase, 0.10, max_relative = 1e-3);
        assert_relative_eq!(obs.total_fwhm_hz, 2.9e8, max_relative = 1e-3);
        assert_relative_eq!(obs.center_shift_hz, 1.2e7, max_relative = 1e-2);
        assert_abs_diff_eq!(obs.focus_asymmetry, 0.0, epsilon = 1e-3);
    }

    #[test]
    fn solved_window_agrees_with_adiabatic_report() {
        // The spectrum-level measurement and the adiabatic-elimination
        // formulas must describe the same physics.
        let scene = TransparencyScene::strong_antenna_weak_emitter().unwrap();
        let solution = model_from_transparency_targets(&reference_targets(), &scene).unwrap();
        let report = solution.model.hybridized_emitter().unwrap();
        assert!(report.scale_separation_ok);
        assert_relative_eq!(
            report.total_emitter_fwhm_hz,
            solution.observables.total_fwhm_hz,
            max_relative = 0.1
        );
        // The adiabatic pole shift and the measured window center agree in
        // sign and scale; the measured center additionally folds in the
        // interference-phase displacement of the apparent maximum.
        assert_eq!(
            report.lamb_shift_hz.signum(),
            solution.observables.center_shift_hz.signum()
        );
        assert_relative_eq!(
            report.lamb_shift_hz,
            solution.observables.center_shift_hz,
            max_relative = 0.5
        );
    }

    #[test]
    fn deeper_window_needs_stronger_coupling() {
        // The window depth is set by how much of the emitter linewidth is
        // antenna-induced, so deeper windows at fixed total width demand a
        // larger oscillator coupling.
        let scene = TransparencyScene::strong_antenna_weak_emitter().unwrap();
        let mut couplings = Vec::new();
        for increase in [0.06, 0.10, 0.14] {
            let targets = TransparencyTargets {
                relative_increase: increase,
                ..reference_targets()
            };
            let solution = model_from_transparency_targets(&targets, &scene).unwrap();
            couplings.push(solution.model.coupling);
        }
        assert!(
            couplings[0] < couplings[1] && couplings[1] < couplings[2],
            "couplings {couplings:?} are not increasing"
        );
    }

    #[test]
    fn bare_antenna_has_no_window() {
        let scene = TransparencyScene::strong_antenna_weak_emitter().unwrap();
        let solution = model_from_transparency_targets(&reference_targets(), &scene).unwrap();
        let bare = solution.model.antenna_only();
        assert!(matches!(
            transparency_observables(&bare),
            Err(Error::Detection(_) | Error::Domain(_))
        ));
    }
}
