//! Optical Bloch dynamics of a driven two-level emitter.
//!
//! The emitter state is the Bloch vector (u, v, w) in the rotating frame,
//! with excited-state population ρ_ee = (1 + w)/2 and equations of motion
//!
//! ```text
//! u̇ = −Γ₂·u + δ·v
//! v̇ = −δ·u − Γ₂·v − Ω·w
//! ẇ =  Ω·v − Γ₁·(w + 1)
//! ```
//!
//! where Γ₁ is the population decay rate, Γ₂ = Γ₁/2 + Γ* the coherence
//! decay rate, δ the detuning and Ω the Rabi frequency (all rad/s).
//! Steady-state quantities (saturation, power broadening) come from closed
//! forms; the intensity autocorrelation g²(τ) comes from the regression
//! property — re-integrating the same equations from the ground state and
//! normalizing by the steady-state population.

use crate::error::{Error, Result};
use crate::spectrum::{Spectrum, SpectrumKind};
use crate::units::TAU;

/// Rates and identity of the two-level emitter. Decay and dephasing rates
/// are angular (rad/s); the optical resonance is ordinary frequency (Hz).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmitterParams {
    /// Optical resonance frequency, Hz.
    pub resonance_hz: f64,
    /// Radiative decay rate Γ_r, rad/s.
    pub radiative_rate: f64,
    /// Non-radiative decay rate Γ_nr, rad/s.
    pub nonradiative_rate: f64,
    /// Pure dephasing rate Γ*, rad/s.
    pub pure_dephasing: f64,
    /// Fraction of decay emitted on the purely electronic line, in (0, 1].
    pub branching_ratio: f64,
}

impl EmitterParams {
    /// Validated constructor.
    pub fn new(
        resonance_hz: f64,
        radiative_rate: f64,
        nonradiative_rate: f64,
        pure_dephasing: f64,
        branching_ratio: f64,
    ) -> Result<Self> {
        if !(resonance_hz > 0.0) {
            return Err(Error::Domain(format!(
                "resonance frequency must be positive, got {resonance_hz} Hz"
            )));
        }
        if !(radiative_rate >= 0.0) || !(nonradiative_rate >= 0.0) {
            return Err(Error::Domain(
                "decay rates must be non-negative".into(),
            ));
        }
        if !(radiative_rate + nonradiative_rate > 0.0) {
            return Err(Error::Domain(
                "total decay rate must be positive".into(),
            ));
        }
        if !(pure_dephasing >= 0.0) {
            return Err(Error::Domain(format!(
                "pure dephasing must be non-negative, got {pure_dephasing} rad/s"
            )));
        }
        if !(branching_ratio > 0.0 && branching_ratio <= 1.0) {
            return Err(Error::Domain(format!(
                "branching ratio must lie in (0, 1], got {branching_ratio}"
            )));
        }
        Ok(Self {
            resonance_hz,
            radiative_rate,
            nonradiative_rate,
            pure_dephasing,
            branching_ratio,
        })
    }

    /// Constructor from an excited-state lifetime with purely radiative
    /// decay (Γ₁ = 1/T₁, Γ_nr = 0).
    pub fn from_lifetime(
        resonance_hz: f64,
        t1_seconds: f64,
        pure_dephasing: f64,
        branching_ratio: f64,
    ) -> Result<Self> {
        if !(t1_seconds > 0.0) {
            return Err(Error::Domain(format!(
                "lifetime must be positive, got {t1_seconds} s"
            )));
        }
        Self::new(
            resonance_hz,
            1.0 / t1_seconds,
            0.0,
            pure_dephasing,
            branching_ratio,
        )
    }

    /// Population decay rate Γ₁ = Γ_r + Γ_nr, rad/s.
    pub fn gamma1(&self) -> f64 {
        self.radiative_rate + self.nonradiative_rate
    }

    /// Coherence decay rate Γ₂ = Γ₁/2 + Γ*, rad/s.
    pub fn gamma2(&self) -> f64 {
        self.gamma1() / 2.0 + self.pure_dephasing
    }

    /// Excited-state lifetime T₁ = 1/Γ₁, seconds.
    pub fn t1_seconds(&self) -> f64 {
        1.0 / self.gamma1()
    }

    /// Low-power homogeneous linewidth (Γ₁ + 2Γ*)/2π, Hz.
    pub fn fwhm_hz(&self) -> f64 {
        total_fwhm_hz(self.gamma1(), self.pure_dephasing)
    }

    /// Saturation parameter s = Ω²/(Γ₁Γ₂) of a resonant drive.
    pub fn saturation_parameter(&self, rabi_frequency: f64) -> f64 {
        rabi_frequency * rabi_frequency / (self.gamma1() * self.gamma2())
    }
}

/// Coherent drive seen by the emitter, rad/s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveParams {
    /// Rabi frequency Ω ≥ 0, rad/s.
    pub rabi_frequency: f64,
    /// Detuning δ of the drive from the emitter resonance, rad/s.
    pub detuning: f64,
}

impl DriveParams {
    /// Validated constructor.
    pub fn new(rabi_frequency: f64, detuning: f64) -> Result<Self> {
        if !(rabi_frequency >= 0.0) {
            return Err(Error::Domain(format!(
                "Rabi frequency must be non-negative, got {rabi_frequency} rad/s"
            )));
        }
        Ok(Self {
            rabi_frequency,
            detuning,
        })
    }

    /// Resonant drive of the given Rabi frequency.
    pub fn resonant(rabi_frequency: f64) -> Result<Self> {
        Self::new(rabi_frequency, 0.0)
    }
}

/// Lifetime-limited linewidth 1/(2π·T₁), Hz.
pub fn linewidth_from_lifetime(t1_seconds: f64) -> Result<f64> {
    if !(t1_seconds > 0.0) {
        return Err(Error::Domain(format!(
            "lifetime must be positive, got {t1_seconds} s"
        )));
    }
    Ok(1.0 / (TAU * t1_seconds))
}

/// Homogeneous linewidth (Γ₁ + 2Γ*)/2π for rates in rad/s, returned in Hz.
pub fn total_fwhm_hz(gamma1: f64, pure_dephasing: f64) -> f64 {
    (gamma1 + 2.0 * pure_dephasing) / TAU
}

/// Ratio of two lifetimes (the "n-fold shortening" number).
pub fn lifetime_ratio(t1_long: f64, t1_short: f64) -> Result<f64> {
    if !(t1_long > 0.0 && t1_short > 0.0) {
        return Err(Error::Domain("lifetimes must be positive".into()));
    }
    Ok(t1_long / t1_short)
}

/// Steady-state excited population
/// ρ_ee = (Ω²Γ₂/(2Γ₁)) / (δ² + Γ₂² + Ω²Γ₂/Γ₁);
/// at resonance this is s/(2(1+s)) with s = Ω²/(Γ₁Γ₂).
pub fn steady_state_population(drive: &DriveParams, emitter: &EmitterParams) -> f64 {
    let g1 = emitter.gamma1();
    let g2 = emitter.gamma2();
    let omega2 = drive.rabi_frequency * drive.rabi_frequency;
    let num = omega2 * g2 / (2.0 * g1);
    let den = drive.detuning * drive.detuning + g2 * g2 + omega2 * g2 / g1;
    num / den
}

/// Power-broadened FWHM (Γ₂/π)·√(1 + s) of the excitation line, Hz.
pub fn power_broadened_fwhm_hz(emitter: &EmitterParams, rabi_frequency: f64) -> f64 {
    let s = emitter.saturation_parameter(rabi_frequency);
    emitter.gamma2() / std::f64::consts::PI * (1.0 + s).sqrt()
}

/// Rabi frequency for a given excitation power: Ω = √(P/P_sat·Γ₁Γ₂), so
/// that s = P/P_sat.
pub fn rabi_from_power(power: f64, saturation_power: f64, emitter: &EmitterParams) -> Result<f64> {
    if !(power >= 0.0) || !(saturation_power > 0.0) {
        return Err(Error::Domain(format!(
            "need power ≥ 0 and saturation power > 0, got {power} / {saturation_power}"
        )));
    }
    Ok((power / saturation_power * emitter.gamma1() * emitter.gamma2()).sqrt())
}

/// Detected fluorescence rate for a given excited population: the purely
/// electronic line is blocked by the detection filter, so the rate is
/// scale·Γ_r·(1 − α)·ρ_ee with one overall scale folding collection
/// efficiency and detector response.
pub fn detected_rate(emitter: &EmitterParams, rho_ee: f64, scale: f64) -> f64 {
    scale * emitter.radiative_rate * (1.0 - emitter.branching_ratio) * rho_ee
}

/// Fluorescence excitation spectrum on a frequency grid (Hz) under a drive
/// of fixed Rabi frequency; the grid must span at least five
/// power-broadened widths for the line to be measurable.
pub fn excitation_spectrum(
    grid_hz: &[f64],
    rabi_frequency: f64,
    emitter: &EmitterParams,
    scale: f64,
) -> Result<Spectrum> {
    if grid_hz.len() < 2 {
        return Err(Error::Sampling("grid needs at least 2 points".into()));
    }
    let span = grid_hz[grid_hz.len() - 1] - grid_hz[0];
    let fwhm = power_broadened_fwhm_hz(emitter, rabi_frequency);
    if span < 5.0 * fwhm {
        return Err(Error::Coverage(format!(
            "grid span {span:.3e} Hz covers fewer than 5 power-broadened widths ({fwhm:.3e} Hz)"
        )));
    }
    let values: Vec<f64> = grid_hz
        .iter()
        .map(|&f| {
            let drive = DriveParams {
                rabi_frequency,
                detuning: TAU * (f - emitter.resonance_hz),
            };
            detected_rate(emitter, steady_state_population(&drive, emitter), scale)
        })
        .collect();
    Spectrum::new(grid_hz.to_vec(), values, SpectrumKind::Fluorescence)
}

/// Detected saturation curve R(P) = R_∞·s/(1+s) with s = P/P_sat; returns
/// one rate per input power.
pub fn saturation_curve(
    powers: &[f64],
    emitter: &EmitterParams,
    saturation_power: f64,
    scale: f64,
) -> Result<Vec<f64>> {
    powers
        .iter()
        .map(|&p| {
            let omega = rabi_from_power(p, saturation_power, emitter)?;
            let drive = DriveParams::resonant(omega)?;
            Ok(detected_rate(
                emitter,
                steady_state_population(&drive, emitter),
                scale,
            ))
        })
        .collect()
}

/// Bloch vector (u, v, w); the ground state is (0, 0, −1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochState {
    /// In-phase coherence component.
    pub u: f64,
    /// Quadrature coherence component.
    pub v: f64,
    /// Population inversion; ρ_ee = (1 + w)/2.
    pub w: f64,
}

impl BlochState {
    /// The unexcited emitter.
    pub fn ground() -> Self {
        Self {
            u: 0.0,
            v: 0.0,
            w: -1.0,
        }
    }

    /// Excited-state population (1 + w)/2.
    pub fn excited_population(&self) -> f64 {
        (1.0 + self.w) / 2.0
    }
}

fn derivative(s: &BlochState, drive: &DriveParams, emitter: &EmitterParams) -> BlochState {
    let g1 = emitter.gamma1();
    let g2 = emitter.gamma2();
    let (omega, delta) = (drive.rabi_frequency, drive.detuning);
    BlochState {
        u: -g2 * s.u + delta * s.v,
        v: -delta * s.u - g2 * s.v - omega * s.w,
        w: omega * s.v - g1 * (s.w + 1.0),
    }
}

fn rk4_step(s: &BlochState, drive: &DriveParams, emitter: &EmitterParams, dt: f64) -> BlochState {
    let advance = |s0: &BlochState, k: &BlochState, h: f64| BlochState {
        u: s0.u + h * k.u,
        v: s0.v + h * k.v,
        w: s0.w + h * k.w,
    };
    let k1 = derivative(s, drive, emitter);
    let k2 = derivative(&advance(s, &k1, dt / 2.0), drive, emitter);
    let k3 = derivative(&advance(s, &k2, dt / 2.0), drive, emitter);
    let k4 = derivative(&advance(s, &k3, dt), drive, emitter);
    BlochState {
        u: s.u + dt / 6.0 * (k1.u + 2.0 * k2.u + 2.0 * k3.u + k4.u),
        v: s.v + dt / 6.0 * (k1.v + 2.0 * k2.v + 2.0 * k3.v + k4.v),
        w: s.w + dt / 6.0 * (k1.w + 2.0 * k2.w + 2.0 * k3.w + k4.w),
    }
}

/// Largest integration step that resolves all system timescales:
/// min(1/Γ₁, 1/Γ₂, 1/Ω)/20.
pub fn max_stable_step(drive: &DriveParams, emitter: &EmitterParams) -> f64 {
    let mut t = (1.0 / emitter.gamma1()).min(1.0 / emitter.gamma2());
    if drive.rabi_frequency > 0.0 {
        t = t.min(1.0 / drive.rabi_frequency);
    }
    t / 20.0
}

/// Fixed-step 4th-order integration from `state` over `duration` seconds in
/// `n_steps` equal steps.
pub fn integrate_bloch(
    state: &BlochState,
    drive: &DriveParams,
    emitter: &EmitterParams,
    duration: f64,
    n_steps: usize,
) -> Result<BlochState> {
    if n_steps == 0 {
        return Err(Error::Sampling("need at least one step".into()));
    }
    let dt = duration / n_steps as f64;
    if dt > max_stable_step(drive, emitter) {
        return Err(Error::Accuracy(format!(
            "step {dt:.3e} s exceeds the stability bound {:.3e} s",
            max_stable_step(drive, emitter)
        )));
    }
    let mut s = *state;
    for _ in 0..n_steps {
        s = rk4_step(&s, drive, emitter, dt);
    }
    Ok(s)
}

/// States of the emitter at the requested times (seconds, non-negative and
/// strictly increasing), starting from `state` at t = 0.
pub fn bloch_trajectory(
    state: &BlochState,
    drive: &DriveParams,
    emitter: &EmitterParams,
    times: &[f64],
) -> Result<Vec<BlochState>> {
    let substeps = plan_substeps(times, drive, emitter, 1.0)?;
    trajectory_with_substeps(state, drive, emitter, times, &substeps)
}

/// Per-segment step counts that keep every step within the stability bound,
/// with a safety factor ≥ 1 shrinking steps further.
pub fn plan_substeps(
    times: &[f64],
    drive: &DriveParams,
    emitter: &EmitterParams,
    safety: f64,
) -> Result<Vec<usize>> {
    validate_times(times)?;
    if !(safety >= 1.0) {
        return Err(Error::Domain(format!(
            "safety factor must be ≥ 1, got {safety}"
        )));
    }
    let bound = max_stable_step(drive, emitter) / safety;
    let mut prev = 0.0;
    times
        .iter()
        .map(|&t| {
            let span = t - prev;
            prev = t;
            Ok(((span / bound).ceil() as usize).max(1))
        })
        .collect()
}

/// Trajectory with explicit per-segment step counts (segment k runs from
/// `times[k−1]` — or 0 — to `times[k]`). Errors if any resulting step
/// exceeds the stability bound.
pub fn trajectory_with_substeps(
    state: &BlochState,
    drive: &DriveParams,
    emitter: &EmitterParams,
    times: &[f64],
    substeps: &[usize],
) -> Result<Vec<BlochState>> {
    validate_times(times)?;
    if substeps.len() != times.len() {
        return Err(Error::Sampling(format!(
            "{} step counts for {} times",
            substeps.len(),
            times.len()
        )));
    }
    let bound = max_stable_step(drive, emitter);
    let mut out = Vec::with_capacity(times.len());
    let mut s = *state;
    let mut prev = 0.0;
    for (&t, &n) in times.iter().zip(substeps) {
        let span = t - prev;
        if span > 0.0 {
            if n == 0 || span / n as f64 > bound {
                return Err(Error::Accuracy(format!(
                    "{n} steps over {span:.3e} s violates the step bound {bound:.3e} s"
                )));
            }
            let dt = span / n as f64;
            for _ in 0..n {
                s = rk4_step(&s, drive, emitter, dt);
            }
        }
        prev = t;
        out.push(s);
    }
    Ok(out)
}

fn validate_times(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::Sampling("empty time grid".into()));
    }
    if times[0] < 0.0 {
        return Err(Error::Sampling(format!(
            "times must be non-negative, got {}",
            times[0]
        )));
    }
    for pair in times.windows(2) {
        if !(pair[1] > pair[0]) {
            return Err(Error::Sampling(format!(
                "times must be strictly increasing; {} then {}",
                pair[0], pair[1]
            )));
        }
    }
    Ok(())
}

/// Intensity autocorrelation g²(τ) of the emitter's fluorescence on the
/// given delay grid (seconds): by the regression property this is the
/// excited population re-grown from the ground state, normalized by its
/// steady-state value. g²(0) = 0 exactly; g² → 1 at long delay.
pub fn g2(tau: &[f64], drive: &DriveParams, emitter: &EmitterParams) -> Result<Vec<f64>> {
    let substeps = plan_substeps(tau, drive, emitter, 1.0)?;
    g2_with_substeps(tau, drive, emitter, &substeps)
}

/// [`g2`] with caller-controlled per-segment step counts, for callers that
/// must keep the discretization fixed while parameters vary.
pub fn g2_with_substeps(
    tau: &[f64],
    drive: &DriveParams,
    emitter: &EmitterParams,
    substeps: &[usize],
) -> Result<Vec<f64>> {
    if !(drive.rabi_frequency > 0.0) {
        return Err(Error::Domain(
            "g² needs a nonzero drive to define the steady state".into(),
        ));
    }
    let steady = steady_state_population(drive, emitter);
    let states = trajectory_with_substeps(&BlochState::ground(), drive, emitter, tau, substeps)?;
    Ok(states
        .iter()
        .map(|s| s.excited_population() / steady)
        .collect())
}

/// Mix a background into an ideal correlation: with signal fraction ρ_s,
/// g²_meas = 1 − ρ_s²·(1 − g²).
pub fn g2_with_background(g2_values: &[f64], signal_fraction: f64) -> Result<Vec<f64>> {
    if !(signal_fraction > 0.0 && signal_fraction <= 1.0) {
        return Err(Error::Domain(format!(
            "signal fraction must lie in (0, 1], got {signal_fraction}"
        )));
    }
    let r2 = signal_fraction * signal_fraction;
    Ok(g2_values.iter().map(|&g| 1.0 - r2 * (1.0 - g)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::{centered_grid, peak_summary};
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    const NS: f64 = 1e-9;
    const MHZ: f64 = 1e6;

    /// Purely radiative emitter with T₁ = 8.1 ns and no dephasing.
    fn narrow_emitter() -> EmitterParams {
        EmitterParams::from_lifetime(4.05e14, 8.1 * NS, 0.0, 0.44).unwrap()
    }

    /// Short-lived emitter with strong dephasing (T₁ = 1.4 ns, Γ*/2π = 87 MHz).
    fn broad_emitter() -> EmitterParams {
        EmitterParams::from_lifetime(4.05e14, 1.4 * NS, TAU * 87.0 * MHZ, 0.44).unwrap()
    }

    #[test]
    fn lifetime_limited_linewidths() {
        assert_relative_eq!(
            linewidth_from_lifetime(1.4 * NS).unwrap(),
            113.68e6,
            max_relative = 1e-3
        );
        assert_relative_eq!(
            linewidth_from_lifetime(8.1 * NS).unwrap(),
            19.65e6,
            max_relative = 1e-3
        );
        // Doubling the lifetime halves the width.
        let a = linewidth_from_lifetime(3.0 * NS).unwrap();
        let b = linewidth_from_lifetime(6.0 * NS).unwrap();
        assert_relative_eq!(a / b, 2.0, max_relative = 1e-12);
        assert!(linewidth_from_lifetime(0.0).is_err());
    }

    #[test]
    fn homogeneous_width_sums_rates() {
        // 114 MHz lifetime width plus twice 87 MHz dephasing gives 288 MHz.
        let fwhm = total_fwhm_hz(TAU * 114.0 * MHZ, TAU * 87.0 * MHZ);
        assert_relative_eq!(fwhm, 288.0 * MHZ, max_relative = 1e-12);
        assert_relative_eq!(
            total_fwhm_hz(TAU * 114.0 * MHZ, 0.0),
            114.0 * MHZ,
            max_relative = 1e-12
        );
        // A 23 MHz observed width over a 19.65 MHz lifetime width leaves
        // 1.68 MHz of pure dephasing.
        let dephasing = TAU * (23.0 - 19.65) / 2.0 * MHZ;
        assert_relative_eq!(
            total_fwhm_hz(TAU * 19.65 * MHZ, dephasing),
            23.0 * MHZ,
            max_relative = 1e-12
        );
    }

    #[test]
    fn lifetime_ratio_reference() {
        assert_abs_diff_eq!(lifetime_ratio(8.1 * NS, 1.4 * NS).unwrap(), 5.79, epsilon = 0.01);
    }

    #[test]
    fn steady_state_reference_points() {
        let em = narrow_emitter();
        assert_eq!(
            steady_state_population(&DriveParams::resonant(0.0).unwrap(), &em),
            0.0
        );
        // s = 1 puts the population at half its saturated value.
        let g1 = em.gamma1();
        let g2v = em.gamma2();
        let s1 = DriveParams::resonant((g1 * g2v).sqrt()).unwrap();
        assert_relative_eq!(steady_state_population(&s1, &em), 0.25, max_relative = 1e-12);
        // s = 100 sits just below the 1/2 asymptote.
        let s100 = DriveParams::resonant((100.0 * g1 * g2v).sqrt()).unwrap();
        assert_relative_eq!(
            steady_state_population(&s100, &em),
            0.495_049_504_950_495,
            max_relative = 1e-12
        );
    }

    #[test]
    fn integrator_reaches_closed_form_steady_state() {
        // 40/Γ₁ of settling time brings the slowest transient (envelope
        // 3Γ₁/4 at s ≈ 1) below 1e−8.
        for em in [narrow_emitter(), broad_emitter()] {
            for s_target in [0.1, 1.0, 10.0] {
                let omega = (s_target * em.gamma1() * em.gamma2()).sqrt();
                let drive = DriveParams::resonant(omega).unwrap();
                let duration = 40.0 / em.gamma1();
                let n = (duration / max_stable_step(&drive, &em)).ceil() as usize;
                let end =
                    integrate_bloch(&BlochState::ground(), &drive, &em, duration, n).unwrap();
                let expected = steady_state_population(&drive, &em);
                assert_abs_diff_eq!(end.excited_population(), expected, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn oversized_step_is_rejected() {
        let em = narrow_emitter();
        let drive = DriveParams::resonant(em.gamma1()).unwrap();
        let err = integrate_bloch(&BlochState::ground(), &drive, &em, 100.0 / em.gamma1(), 10);
        assert!(matches!(err, Err(Error::Accuracy(_))));
    }

    #[test]
    fn excitation_linewidth_matches_closed_form() {
        for em in [narrow_emitter(), broad_emitter()] {
            for s in [0.01, 0.1, 1.0, 10.0, 100.0] {
                let omega = (s * em.gamma1() * em.gamma2()).sqrt();
                let expected = power_broadened_fwhm_hz(&em, omega);
                let grid = centered_grid(em.resonance_hz, 8.0 * expected, 4001).unwrap();
                let spec = excitation_spectrum(&grid, omega, &em, 1.0).unwrap();
                let peak = peak_summary(&spec.frequency_hz, &spec.values, 0.0).unwrap();
                assert_relative_eq!(peak.fwhm_hz, expected, max_relative = 0.01);
                assert_relative_eq!(peak.center_hz, em.resonance_hz, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn excitation_low_power_limit_is_homogeneous_width() {
        let em = broad_emitter();
        let fwhm = power_broadened_fwhm_hz(&em, em.gamma1() * 1e-4);
        assert_relative_eq!(fwhm, em.fwhm_hz(), max_relative = 1e-6);
        assert_relative_eq!(em.fwhm_hz(), 287.7e6, max_relative = 1e-3);
        // s = 3 doubles the width.
        let omega = (3.0 * em.gamma1() * em.gamma2()).sqrt();
        assert_relative_eq!(
            power_broadened_fwhm_hz(&em, omega) / em.fwhm_hz(),
            2.0,
            max_relative = 1e-12
        );
    }

    #[test]
    fn narrow_grid_is_a_coverage_error() {
        let em = narrow_emitter();
        let grid = centered_grid(em.resonance_hz, 2.0 * em.fwhm_hz(), 64).unwrap();
        assert!(matches!(
            excitation_spectrum(&grid, em.gamma1() * 0.01, &em, 1.0),
            Err(Error::Coverage(_))
        ));
    }

    #[test]
    fn saturation_curve_shape() {
        let em = narrow_emitter();
        let p_sat = 30.0;
        let powers: Vec<f64> = (0..=40).map(|k| k as f64 * 10.0).collect();
        let rates = saturation_curve(&powers, &em, p_sat, 1.0).unwrap();
        assert_eq!(rates[0], 0.0);
        // Monotone increasing, concave.
        for w in rates.windows(2) {
            assert!(w[1] > w[0]);
        }
        for w in rates.windows(3) {
            assert!(w[2] - w[1] < w[1] - w[0]);
        }
        // At P = P_sat the rate is half the asymptote.
        let r_inf = detected_rate(&em, 0.5, 1.0);
        let at_sat = saturation_curve(&[p_sat], &em, p_sat, 1.0).unwrap()[0];
        assert_relative_eq!(at_sat, r_inf / 2.0, max_relative = 1e-12);
    }

    #[test]
    fn g2_starts_at_zero_and_settles_at_one() {
        let em = narrow_emitter();
        let drive = DriveParams::resonant(0.5 * em.gamma1()).unwrap();
        let tau: Vec<f64> = (0..=300).map(|k| k as f64 * 0.1 / em.gamma1()).collect();
        let g = g2(&tau, &drive, &em).unwrap();
        assert_eq!(g[0], 0.0);
        assert_abs_diff_eq!(g[tau.len() - 1], 1.0, epsilon = 1e-3);
        for &v in &g {
            assert!(v.is_finite() && v >= 0.0);
        }
    }

    #[test]
    fn weak_drive_g2_matches_closed_form() {
        // With Γ* = 0 and Ω ≪ Γ₁ the regression solution is
        // (1 − e^{−Γ₁τ/2})².
        let em = narrow_emitter();
        let drive = DriveParams::resonant(0.01 * em.gamma1()).unwrap();
        let tau: Vec<f64> = (1..=60).map(|k| k as f64 * 0.2 / em.gamma1()).collect();
        let g = g2(&tau, &drive, &em).unwrap();
        for (&t, &v) in tau.iter().zip(&g) {
            let expected = (1.0 - (-em.gamma1() * t / 2.0).exp()).powi(2);
            assert_abs_diff_eq!(v, expected, epsilon = 1e-3);
        }
    }

    #[test]
    fn general_resonant_g2_matches_closed_form() {
        // Exact Γ* = 0, δ = 0 result: 1 − e^{−3Γ₁τ/4}[cos Λτ + (3Γ₁/4Λ)sin Λτ]
        // with Λ = √(Ω² − (Γ₁/4)²).
        let em = narrow_emitter();
        let g1 = em.gamma1();
        let omega = 2.0 * g1;
        let drive = DriveParams::resonant(omega).unwrap();
        let tau: Vec<f64> = (1..=200).map(|k| k as f64 * 0.05 / g1).collect();
        let g = g2(&tau, &drive, &em).unwrap();
        let lam = (omega * omega - g1 * g1 / 16.0).sqrt();
        for (&t, &v) in tau.iter().zip(&g) {
            let expected = 1.0
                - (-0.75 * g1 * t).exp() * ((lam * t).cos() + 0.75 * g1 / lam * (lam * t).sin());
            assert_abs_diff_eq!(v, expected, epsilon = 1e-6);
        }
    }

    #[test]
    fn production_step_matches_fine_step_oracle() {
        let em = broad_emitter();
        let drive = DriveParams::resonant(3.0 * em.gamma1()).unwrap();
        let tau: Vec<f64> = (1..=100).map(|k| k as f64 * 0.1 / em.gamma1()).collect();
        let coarse = g2(&tau, &drive, &em).unwrap();
        let fine_steps = plan_substeps(&tau, &drive, &em, 20.0).unwrap();
        let fine = g2_with_substeps(&tau, &drive, &em, &fine_steps).unwrap();
        for (a, b) in coarse.iter().zip(&fine) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-4);
        }
    }

    #[test]
    fn strong_drive_oscillates_at_the_rabi_frequency() {
        let em = narrow_emitter();
        let g1 = em.gamma1();
        let omega = 5.0 * g1;
        let drive = DriveParams::resonant(omega).unwrap();
        let tau: Vec<f64> = (1..=4000).map(|k| k as f64 * 0.001 / g1).collect();
        let g = g2(&tau, &drive, &em).unwrap();
        // First maximum overshoots 1, and successive maxima are spaced by
        // one Rabi period within 5%.
        let mut maxima = Vec::new();
        for i in 1..g.len() - 1 {
            if g[i] > g[i - 1] && g[i] > g[i + 1] {
                maxima.push(tau[i]);
            }
        }
        assert!(g.iter().cloned().fold(0.0f64, f64::max) > 1.0);
        assert!(maxima.len() >= 3);
        let period = maxima[1] - maxima[0];
        assert_relative_eq!(period, TAU / omega, max_relative = 0.05);
    }

    #[test]
    fn trajectory_stays_physical() {
        let em = broad_emitter();
        let drive = DriveParams::resonant(4.0 * em.gamma1()).unwrap();
        let times: Vec<f64> = (1..=500).map(|k| k as f64 * 0.02 / em.gamma1()).collect();
        let states = bloch_trajectory(&BlochState::ground(), &drive, &em, &times).unwrap();
        for s in states {
            let norm = (s.u * s.u + s.v * s.v + s.w * s.w).sqrt();
            assert!(norm <= 1.0 + 1e-9, "Bloch vector must stay in the sphere");
            let p = s.excited_population();
            assert!((-1e-12..=1.0).contains(&p));
        }
    }

    #[test]
    fn background_mixing_reference_points() {
        let ideal = vec![0.0, 0.5, 1.0];
        assert_eq!(g2_with_background(&ideal, 1.0).unwrap(), ideal);
        let mixed = g2_with_background(&ideal, 0.9).unwrap();
        assert_relative_eq!(mixed[0], 0.19, max_relative = 1e-12);
        assert_relative_eq!(mixed[2], 1.0, max_relative = 1e-12);
        assert!(g2_with_background(&ideal, 0.0).is_err());
        assert!(g2_with_background(&ideal, 1.1).is_err());
    }

    #[test]
    fn undriven_g2_is_rejected() {
        let em = narrow_emitter();
        let drive = DriveParams::resonant(0.0).unwrap();
        assert!(matches!(
            g2(&[1e-9, 2e-9], &drive, &em),
            Err(Error::Domain(_))
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn steady_state_is_a_physical_population(
            s in 0.0f64..1e4,
            delta_scale in -20.0f64..20.0,
            dephasing_mhz in 0.0f64..500.0,
        ) {
            let em = EmitterParams::from_lifetime(
                4.05e14, 5.0 * NS, TAU * dephasing_mhz * MHZ, 0.44,
            ).unwrap();
            let omega = (s * em.gamma1() * em.gamma2()).sqrt();
            let drive = DriveParams::new(omega, delta_scale * em.gamma2()).unwrap();
            let p = steady_state_population(&drive, &em);
            prop_assert!((0.0..0.5).contains(&p));
        }

        #[test]
        fn saturation_rate_below_asymptote(p in 0.0f64..1e4) {
            let em = narrow_emitter();
            let r = saturation_curve(&[p], &em, 25.0, 2.0).unwrap()[0];
            let r_inf = detected_rate(&em, 0.5, 2.0);
            prop_assert!(r >= 0.0 && r < r_inf);
        }
    }
}
