//! Unit conventions and conversions.
//!
//! Public interfaces use optical frequency in Hz and length in nm. Angular
//! frequencies (rad/s) appear only inside model internals; the helpers here
//! are the single place where the 2π bookkeeping happens.

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT_M_PER_S: f64 = 2.997_924_58e8;

/// 2π, the conversion factor between cyclic and angular frequency.
pub const TAU: f64 = std::f64::consts::TAU;

/// Convert a cyclic frequency in Hz to an angular frequency in rad/s.
#[inline]
pub fn hz_to_angular(f_hz: f64) -> f64 {
    TAU * f_hz
}

/// Convert an angular frequency in rad/s to a cyclic frequency in Hz.
#[inline]
pub fn angular_to_hz(omega: f64) -> f64 {
    omega / TAU
}

/// Optical frequency (Hz) of light with the given vacuum wavelength (nm).
#[inline]
pub fn wavelength_nm_to_hz(lambda_nm: f64) -> f64 {
    SPEED_OF_LIGHT_M_PER_S / (lambda_nm * 1e-9)
}

/// Vacuum wavelength (nm) of light with the given optical frequency (Hz).
#[inline]
pub fn hz_to_wavelength_nm(f_hz: f64) -> f64 {
    SPEED_OF_LIGHT_M_PER_S / f_hz * 1e9
}

/// Width conversion factor between a Gaussian's FWHM and its standard
/// deviation: FWHM = sigma * sqrt(8 ln 2).
pub fn fwhm_to_sigma(fwhm: f64) -> f64 {
    fwhm / (8.0 * std::f64::consts::LN_2).sqrt()
}

/// Inverse of [`fwhm_to_sigma`].
pub fn sigma_to_fwhm(sigma: f64) -> f64 {
    sigma * (8.0 * std::f64::consts::LN_2).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn angular_round_trip() {
        let f = 4.05e14;
        assert_relative_eq!(angular_to_hz(hz_to_angular(f)), f, max_relative = 1e-15);
    }

    #[test]
    fn wavelength_round_trip() {
        let lambda = 740.3;
        assert_relative_eq!(
            hz_to_wavelength_nm(wavelength_nm_to_hz(lambda)),
            lambda,
            max_relative = 1e-15
        );
    }

    #[test]
    fn known_optical_frequency() {
        // c / 740 nm = 405.125 THz (direct division of the defining constants).
        assert_relative_eq!(
            wavelength_nm_to_hz(740.0),
            4.051_249_432_432_432_4e14,
            max_relative = 1e-12
        );
    }

    #[test]
    fn fwhm_sigma_round_trip_and_value() {
        // 270 / sqrt(8 ln 2) = 114.66 (Gaussian width conversion).
        assert_relative_eq!(fwhm_to_sigma(270.0), 114.658_443_039, max_relative = 1e-9);
        assert_relative_eq!(sigma_to_fwhm(fwhm_to_sigma(1.0)), 1.0, max_relative = 1e-15);
    }
}
