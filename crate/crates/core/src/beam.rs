//! Focused Gaussian-beam geometry.
//!
//! A tightly focused beam acquires an axial phase anomaly (the Gouy phase)
//! and its on-axis amplitude decays away from the focal plane. Both effects
//! shape how a point scatterer's field interferes with the transmitted beam:
//! on focus the interference is absorptive (a symmetric dip), off focus it
//! turns dispersive. This module also carries the resonant scattering
//! cross-section and the dip-depth algebra for a single weak scatterer.

use crate::error::{Error, Result};
use crate::units::fwhm_to_sigma;

/// Geometry of the focused beam and the scatterer's position in it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FocusParams {
    /// Vacuum wavelength, nm.
    pub wavelength_nm: f64,
    /// Intensity FWHM of the focal spot, nm.
    pub focal_fwhm_nm: f64,
    /// Rayleigh range, nm.
    pub rayleigh_range_nm: f64,
    /// Axial position of the scatterer, nm; 0 is the focal plane.
    pub axial_position_nm: f64,
}

impl FocusParams {
    /// Validated constructor.
    pub fn new(
        wavelength_nm: f64,
        focal_fwhm_nm: f64,
        rayleigh_range_nm: f64,
        axial_position_nm: f64,
    ) -> Result<Self> {
        if !(wavelength_nm > 0.0) {
            return Err(Error::Domain(format!(
                "wavelength must be positive, got {wavelength_nm} nm"
            )));
        }
        if !(focal_fwhm_nm > 0.0) {
            return Err(Error::Domain(format!(
                "focal FWHM must be positive, got {focal_fwhm_nm} nm"
            )));
        }
        if !(rayleigh_range_nm > 0.0) {
            return Err(Error::Domain(format!(
                "Rayleigh range must be positive, got {rayleigh_range_nm} nm"
            )));
        }
        Ok(Self {
            wavelength_nm,
            focal_fwhm_nm,
            rayleigh_range_nm,
            axial_position_nm,
        })
    }

    /// Construct with the Rayleigh range derived from the focal spot via the
    /// Gaussian-beam relation z_R = π w₀² / (λ/n), where w₀ is the 1/e²
    /// intensity radius corresponding to the given FWHM and `n` is the
    /// refractive index of the surrounding medium.
    pub fn with_derived_rayleigh_range(
        wavelength_nm: f64,
        focal_fwhm_nm: f64,
        refractive_index: f64,
        axial_position_nm: f64,
    ) -> Result<Self> {
        if !(refractive_index > 0.0) {
            return Err(Error::Domain(format!(
                "refractive index must be positive, got {refractive_index}"
            )));
        }
        let z_r = derived_rayleigh_range_nm(wavelength_nm, focal_fwhm_nm, refractive_index)?;
        Self::new(wavelength_nm, focal_fwhm_nm, z_r, axial_position_nm)
    }

    /// Intensity-profile standard deviation of the focal spot, nm.
    pub fn focal_sigma_nm(&self) -> f64 {
        fwhm_to_sigma(self.focal_fwhm_nm)
    }
}

/// Rayleigh range z_R = π w₀²/(λ/n) with w₀ = FWHM/√(2 ln 2) (the 1/e²
/// radius of an intensity profile of the given FWHM), in nm.
pub fn derived_rayleigh_range_nm(
    wavelength_nm: f64,
    focal_fwhm_nm: f64,
    refractive_index: f64,
) -> Result<f64> {
    if !(wavelength_nm > 0.0 && focal_fwhm_nm > 0.0) {
        return Err(Error::Domain(format!(
            "wavelength and focal FWHM must be positive, got {wavelength_nm} nm / {focal_fwhm_nm} nm"
        )));
    }
    let waist = focal_fwhm_nm / (2.0 * std::f64::consts::LN_2).sqrt();
    Ok(std::f64::consts::PI * waist * waist * refractive_index / wavelength_nm)
}

/// Gouy phase arctan(z/z_R) in radians; odd in z, bounded in (−π/2, π/2).
pub fn gouy_phase(z_nm: f64, rayleigh_range_nm: f64) -> Result<f64> {
    if !(rayleigh_range_nm > 0.0) {
        return Err(Error::Domain(format!(
            "Rayleigh range must be positive, got {rayleigh_range_nm} nm"
        )));
    }
    Ok((z_nm / rayleigh_range_nm).atan())
}

/// On-axis amplitude factor 1/√(1+(z/z_R)²) of a Gaussian beam; 1 at focus,
/// even in z, strictly decreasing in |z|.
pub fn axial_envelope(z_nm: f64, rayleigh_range_nm: f64) -> Result<f64> {
    if !(rayleigh_range_nm > 0.0) {
        return Err(Error::Domain(format!(
            "Rayleigh range must be positive, got {rayleigh_range_nm} nm"
        )));
    }
    let u = z_nm / rayleigh_range_nm;
    Ok(1.0 / (1.0 + u * u).sqrt())
}

/// Resonant scattering cross-section 3λ²/(2π) of an ideal dipole, nm².
pub fn sigma0(wavelength_nm: f64) -> Result<f64> {
    if !(wavelength_nm > 0.0) {
        return Err(Error::Domain(format!(
            "wavelength must be positive, got {wavelength_nm} nm"
        )));
    }
    Ok(1.5 * wavelength_nm * wavelength_nm / std::f64::consts::PI)
}

/// Extinction coupling ζ producing an on-focus resonance dip of the given
/// depth: inverts T_res = (1−ζ)², so ζ = 1 − √(1−dip).
pub fn zeta_from_dip(dip: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&dip) {
        return Err(Error::Domain(format!(
            "dip must lie in [0, 1), got {dip}"
        )));
    }
    Ok(1.0 - (1.0 - dip).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn gouy_reference_points() {
        assert_eq!(gouy_phase(0.0, 500.0).unwrap(), 0.0);
        assert_relative_eq!(
            gouy_phase(500.0, 500.0).unwrap(),
            std::f64::consts::FRAC_PI_4,
            max_relative = 1e-15
        );
        // arctan(2) evaluated directly.
        assert_relative_eq!(
            gouy_phase(-1000.0, 500.0).unwrap(),
            -1.107_148_717_794_090_4,
            max_relative = 1e-12
        );
    }

    #[test]
    fn gouy_rejects_bad_rayleigh_range() {
        assert!(gouy_phase(0.0, 0.0).is_err());
        assert!(gouy_phase(0.0, -1.0).is_err());
    }

    #[test]
    fn envelope_reference_points() {
        assert_eq!(axial_envelope(0.0, 400.0).unwrap(), 1.0);
        assert_relative_eq!(
            axial_envelope(400.0, 400.0).unwrap(),
            std::f64::consts::FRAC_1_SQRT_2,
            max_relative = 1e-15
        );
        // 1/sqrt(10) evaluated directly.
        assert_relative_eq!(
            axial_envelope(1200.0, 400.0).unwrap(),
            0.316_227_766_016_837_94,
            max_relative = 1e-12
        );
    }

    #[test]
    fn envelope_monotone_on_grid() {
        let z_r = 334.0;
        let mut prev = axial_envelope(0.0, z_r).unwrap();
        for k in 1..200 {
            let cur = axial_envelope(k as f64 * 10.0, z_r).unwrap();
            assert!(cur < prev, "envelope must strictly decrease for z > 0");
            prev = cur;
        }
    }

    #[test]
    fn sigma0_value() {
        // 3·740²/(2π) evaluated directly.
        assert_relative_eq!(sigma0(740.0).unwrap(), 261_459.740_511_37, max_relative = 1e-12);
        assert!(sigma0(0.0).is_err());
    }

    #[test]
    fn zeta_reference_points() {
        // Numeric inversions of (1−ζ)² = 1−dip.
        assert_relative_eq!(zeta_from_dip(0.04).unwrap(), 0.020_204_102_886_728_6, max_relative = 1e-12);
        assert_relative_eq!(zeta_from_dip(0.50).unwrap(), 0.292_893_218_813_452_5, max_relative = 1e-12);
        assert_eq!(zeta_from_dip(0.0).unwrap(), 0.0);
        assert!(zeta_from_dip(1.0).is_err());
        assert!(zeta_from_dip(-0.1).is_err());
    }

    #[test]
    fn derived_rayleigh_range_reference() {
        // π·(270/√(2 ln 2))²·1.5/740.3 by direct evaluation.
        let z_r = derived_rayleigh_range_nm(740.3, 270.0, 1.5).unwrap();
        assert_relative_eq!(z_r, 334.738_336_83, max_relative = 1e-9);
    }

    proptest! {
        #[test]
        fn gouy_is_odd(z in -1e5f64..1e5, z_r in 1.0f64..1e4) {
            let plus = gouy_phase(z, z_r).unwrap();
            let minus = gouy_phase(-z, z_r).unwrap();
            prop_assert_eq!(plus, -minus);
            prop_assert!(plus.abs() < std::f64::consts::FRAC_PI_2);
        }

        #[test]
        fn envelope_is_even_and_bounded(z in -1e5f64..1e5, z_r in 1.0f64..1e4) {
            let plus = axial_envelope(z, z_r).unwrap();
            let minus = axial_envelope(-z, z_r).unwrap();
            prop_assert_eq!(plus, minus);
            prop_assert!(plus > 0.0 && plus <= 1.0);
        }

        #[test]
        fn sigma0_quadratic_scaling(lambda in 100.0f64..2000.0) {
            let one = sigma0(lambda).unwrap();
            let two = sigma0(2.0 * lambda).unwrap();
            prop_assert!((two / one - 4.0).abs() < 1e-12);
        }

        #[test]
        fn zeta_round_trips_dip(dip in 0.0f64..0.999) {
            let zeta = zeta_from_dip(dip).unwrap();
            let reconstructed = 1.0 - (1.0 - zeta) * (1.0 - zeta);
            prop_assert!((reconstructed - dip).abs() <= 1e-12 * dip.max(1e-3));
        }
    }
}
