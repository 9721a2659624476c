//! Raster-scan point-spread-function images and emitter localization.
//!
//! A diffraction-limited emitter maps to a two-dimensional Gaussian spot
//! whose intensity FWHM equals the focal spot size. [`simulate_psf_image`]
//! integrates that Gaussian over each pixel and draws shot noise;
//! [`localize_psf`] recovers the emitter position by a two-dimensional
//! Gaussian fit and reports the localization precision from the fit
//! covariance, which shrinks as `σ/√N` with the detected counts `N`.

use std::io::{BufRead, Write};

use rand::Rng;
use rand_distr::Poisson;
use statrs::function::erf::erf;

use crate::beam::FocusParams;
use crate::error::{Error, Result};
use crate::fit::{lm_minimize, FitOptions, FitResult, ParamSpec};
use crate::rng::stream_rng;

/// A rectangular pixel image with physical pixel coordinates.
///
/// Values are stored row-major: `values[iy * nx + ix]`. The pixel `(ix, iy)`
/// is centered at `origin + pitch·(ix, iy)` in nanometers.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterImage {
    /// Pixels per row.
    pub nx: usize,
    /// Rows.
    pub ny: usize,
    /// Pixel pitch, nm.
    pub pixel_pitch_nm: f64,
    /// Physical position of the center of pixel (0, 0), nm.
    pub origin_nm: (f64, f64),
    /// Counts (or normalized transmission) per pixel, row-major.
    pub values: Vec<f64>,
}

impl RasterImage {
    /// Validated constructor: positive pitch, matching value count, finite
    /// non-negative values.
    pub fn new(
        nx: usize,
        ny: usize,
        pixel_pitch_nm: f64,
        origin_nm: (f64, f64),
        values: Vec<f64>,
    ) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::Sampling("image needs at least one pixel".into()));
        }
        if !(pixel_pitch_nm > 0.0) || !pixel_pitch_nm.is_finite() {
            return Err(Error::Domain(format!(
                "pixel pitch must be positive, got {pixel_pitch_nm}"
            )));
        }
        if !origin_nm.0.is_finite() || !origin_nm.1.is_finite() {
            return Err(Error::Domain("image origin must be finite".into()));
        }
        if values.len() != nx * ny {
            return Err(Error::Sampling(format!(
                "{} values for a {nx}x{ny} image",
                values.len()
            )));
        }
        for &v in &values {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Domain(format!(
                    "image values must be finite and non-negative, got {v}"
                )));
            }
        }
        Ok(Self {
            nx,
            ny,
            pixel_pitch_nm,
            origin_nm,
            values,
        })
    }

    /// Value at pixel `(ix, iy)`.
    pub fn value(&self, ix: usize, iy: usize) -> f64 {
        self.values[iy * self.nx + ix]
    }

    /// Physical center of pixel `(ix, iy)`, nm.
    pub fn pixel_center_nm(&self, ix: usize, iy: usize) -> (f64, f64) {
        (
            self.origin_nm.0 + self.pixel_pitch_nm * ix as f64,
            self.origin_nm.1 + self.pixel_pitch_nm * iy as f64,
        )
    }

    /// Sum of all pixel values.
    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Index pair of the maximum pixel.
    pub fn argmax(&self) -> (usize, usize) {
        let (idx, _) = self
            .values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("validated images are non-empty");
        (idx % self.nx, idx / self.nx)
    }

    /// Write the pixel matrix as CSV: `ny` rows of `nx` comma-separated
    /// values. Floats use the shortest exact representation, so a round trip
    /// through [`RasterImage::read_csv`] is lossless.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        for iy in 0..self.ny {
            let row: Vec<String> = (0..self.nx)
                .map(|ix| format!("{}", self.value(ix, iy)))
                .collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    /// Write the geometry header (`key = value` lines) that accompanies the
    /// CSV matrix.
    pub fn write_metadata<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "nx = {}", self.nx)?;
        writeln!(w, "ny = {}", self.ny)?;
        writeln!(w, "pixel_pitch_nm = {}", self.pixel_pitch_nm)?;
        writeln!(w, "origin_x_nm = {}", self.origin_nm.0)?;
        writeln!(w, "origin_y_nm = {}", self.origin_nm.1)?;
        Ok(())
    }

    /// Rebuild an image from the metadata header and CSV matrix written by
    /// [`RasterImage::write_metadata`] and [`RasterImage::write_csv`].
    pub fn read_csv<M: BufRead, R: BufRead>(metadata: M, matrix: R) -> Result<Self> {
        let mut nx = None;
        let mut ny = None;
        let mut pitch = None;
        let mut ox = None;
        let mut oy = None;
        for line in metadata.lines() {
            let line = line?;
            let Some((key, value)) = line.split_once('=') else {
                continue;
            };
            let value = value.trim();
            let parsed = value
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("bad image metadata value {value:?}")));
            match key.trim() {
                "nx" => nx = Some(parsed? as usize),
                "ny" => ny = Some(parsed? as usize),
                "pixel_pitch_nm" => pitch = Some(parsed?),
                "origin_x_nm" => ox = Some(parsed?),
                "origin_y_nm" => oy = Some(parsed?),
                _ => {}
            }
        }
        let (Some(nx), Some(ny), Some(pitch), Some(ox), Some(oy)) = (nx, ny, pitch, ox, oy)
        else {
            return Err(Error::Parse(
                "image metadata is missing nx/ny/pixel_pitch_nm/origin".into(),
            ));
        };
        let mut values = Vec::with_capacity(nx * ny);
        for line in matrix.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            for field in line.split(',') {
                let v = field.trim().parse::<f64>().map_err(|_| {
                    Error::Parse(format!("bad image matrix value {field:?}"))
                })?;
                values.push(v);
            }
        }
        Self::new(nx, ny, pitch, (ox, oy), values)
    }
}

/// Standard normal cumulative distribution.
fn phi(t: f64) -> f64 {
    0.5 * (1.0 + erf(t / std::f64::consts::SQRT_2))
}

/// Flux fraction collected by pixels along one axis: the CDF difference
/// across each pixel for a Gaussian of the given center and width.
fn pixel_flux_1d(n: usize, origin: f64, pitch: f64, center: f64, sigma: f64) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let x = origin + pitch * i as f64;
            phi((x + pitch / 2.0 - center) / sigma) - phi((x - pitch / 2.0 - center) / sigma)
        })
        .collect()
}

fn expected_pixel_means(
    center_nm: (f64, f64),
    sigma_nm: f64,
    total_counts: f64,
    baseline: f64,
    nx: usize,
    ny: usize,
    pitch: f64,
    origin: (f64, f64),
) -> Vec<f64> {
    let fx = pixel_flux_1d(nx, origin.0, pitch, center_nm.0, sigma_nm);
    let fy = pixel_flux_1d(ny, origin.1, pitch, center_nm.1, sigma_nm);
    let mut values = Vec::with_capacity(nx * ny);
    for wy in &fy {
        for wx in &fx {
            values.push(baseline + total_counts * wx * wy);
        }
    }
    values
}

fn check_psf_geometry(focus: &FocusParams, pitch_nm: f64, size: (usize, usize)) -> Result<()> {
    if size.0 < 5 || size.1 < 5 {
        return Err(Error::Sampling(format!(
            "PSF image needs at least 5x5 pixels, got {}x{}",
            size.0, size.1
        )));
    }
    if !(pitch_nm > 0.0) || !pitch_nm.is_finite() {
        return Err(Error::Domain(format!(
            "pixel pitch must be positive, got {pitch_nm}"
        )));
    }
    if focus.focal_fwhm_nm < 2.0 * pitch_nm {
        return Err(Error::Sampling(format!(
            "spot FWHM {} nm is under-sampled by {} nm pixels (need ≥ 2 pixels)",
            focus.focal_fwhm_nm, pitch_nm
        )));
    }
    Ok(())
}

/// The noise-free expectation image of a point emitter: a Gaussian of the
/// focal spot's intensity FWHM, integrated over each pixel, normalized to
/// `total_counts` over the full plane. The image window is centered on the
/// coordinate origin.
pub fn expected_psf_image(
    center_nm: (f64, f64),
    focus: &FocusParams,
    total_counts: f64,
    pitch_nm: f64,
    size: (usize, usize),
) -> Result<RasterImage> {
    check_psf_geometry(focus, pitch_nm, size)?;
    if !(total_counts >= 0.0) || !total_counts.is_finite() {
        return Err(Error::Domain(format!(
            "total counts must be finite and non-negative, got {total_counts}"
        )));
    }
    let (nx, ny) = size;
    let origin = (
        -pitch_nm * (nx as f64 - 1.0) / 2.0,
        -pitch_nm * (ny as f64 - 1.0) / 2.0,
    );
    let values = expected_pixel_means(
        center_nm,
        focus.focal_sigma_nm(),
        total_counts,
        0.0,
        nx,
        ny,
        pitch_nm,
        origin,
    );
    RasterImage::new(nx, ny, pitch_nm, origin, values)
}

/// Simulate a raster image of a point emitter with shot noise.
///
/// Pixel means come from [`expected_psf_image`]; counts are an independent
/// Poisson draw per pixel from the stream `(seed, 0)`, so the image is
/// deterministic for a given seed and images with distinct seeds are
/// statistically independent.
pub fn simulate_psf_image(
    center_nm: (f64, f64),
    focus: &FocusParams,
    total_counts: f64,
    pitch_nm: f64,
    size: (usize, usize),
    seed: u64,
) -> Result<RasterImage> {
    let mut image = expected_psf_image(center_nm, focus, total_counts, pitch_nm, size)?;
    let mut rng = stream_rng(seed, 0);
    for v in &mut image.values {
        *v = if *v > 0.0 {
            rng.sample(Poisson::new(*v).expect("positive finite mean"))
        } else {
            0.0
        };
    }
    Ok(image)
}

/// Emitter position recovered from a raster image.
#[derive(Debug, Clone)]
pub struct PsfLocalization {
    /// Fitted emitter position, nm.
    pub x_nm: f64,
    /// Fitted emitter position, nm.
    pub y_nm: f64,
    /// One-sigma localization precision from the fit covariance (quadratic
    /// mean of the two axis errors), nm.
    pub precision_nm: f64,
    /// Fitted spot width (Gaussian sigma), nm.
    pub sigma_nm: f64,
    /// Fitted total counts in the spot.
    pub total_counts: f64,
    /// Fitted flat background per pixel.
    pub baseline: f64,
    /// Full optimizer output.
    pub result: FitResult,
}

/// Localize an emitter by fitting a pixel-integrated 2D Gaussian with a flat
/// background.
///
/// The spot must rise at least `5·√baseline` above the border-estimated
/// background. Residuals carry shot-noise weights, and the reported
/// precision is the covariance-derived standard error of the fitted center,
/// which scales as `σ/√N`.
pub fn localize_psf(image: &RasterImage) -> Result<PsfLocalization> {
    if image.nx < 5 || image.ny < 5 {
        return Err(Error::Sampling(format!(
            "localization needs at least 5x5 pixels, got {}x{}",
            image.nx, image.ny
        )));
    }
    // Background from the border ring, significance from the peak excursion.
    let mut border_sum = 0.0;
    let mut border_n = 0usize;
    for iy in 0..image.ny {
        for ix in 0..image.nx {
            if ix == 0 || iy == 0 || ix == image.nx - 1 || iy == image.ny - 1 {
                border_sum += image.value(ix, iy);
                border_n += 1;
            }
        }
    }
    let baseline0 = border_sum / border_n as f64;
    let (px, py) = image.argmax();
    let height = image.value(px, py) - baseline0;
    if !(height > 5.0 * baseline0.max(0.0).sqrt()) || !(height > 0.0) {
        return Err(Error::Detection(format!(
            "no spot: peak excursion {height:.3} over background {baseline0:.3}"
        )));
    }

    // Moment-based initial center and width from the excess counts.
    let mut w_sum = 0.0;
    let mut mx = 0.0;
    let mut my = 0.0;
    for iy in 0..image.ny {
        for ix in 0..image.nx {
            let w = (image.value(ix, iy) - baseline0).max(0.0);
            let (x, y) = image.pixel_center_nm(ix, iy);
            w_sum += w;
            mx += w * x;
            my += w * y;
        }
    }
    let cx0 = mx / w_sum;
    let cy0 = my / w_sum;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for iy in 0..image.ny {
        for ix in 0..image.nx {
            let w = (image.value(ix, iy) - baseline0).max(0.0);
            let (x, y) = image.pixel_center_nm(ix, iy);
            vx += w * (x - cx0) * (x - cx0);
            vy += w * (y - cy0) * (y - cy0);
        }
    }
    let span = image.pixel_pitch_nm * image.nx.max(image.ny) as f64;
    let sigma0 = ((vx + vy) / (2.0 * w_sum))
        .sqrt()
        .clamp(0.5 * image.pixel_pitch_nm, span);
    let total0 = w_sum.max(1.0);

    let pitch = image.pixel_pitch_nm;
    let specs = [
        ParamSpec::linear("x_nm", cx0).with_step_scale(pitch),
        ParamSpec::linear("y_nm", cy0).with_step_scale(pitch),
        ParamSpec::log("sigma_nm", sigma0),
        ParamSpec::log("total_counts", total0),
        ParamSpec::linear("baseline", baseline0).with_step_scale(baseline0.max(1.0)),
    ];
    // Shot-noise weights from the *model* mean (with a one-count floor):
    // weighting by the observed counts would over-weight downward
    // fluctuations at these low per-pixel counts and bias the fit.
    let residual = |p: &[f64]| -> Result<Vec<f64>> {
        let means = expected_pixel_means(
            (p[0], p[1]),
            p[2],
            p[3],
            p[4],
            image.nx,
            image.ny,
            pitch,
            image.origin_nm,
        );
        Ok(means
            .iter()
            .zip(&image.values)
            .map(|(m, v)| (m - v) / m.max(1.0).sqrt())
            .collect())
    };
    let result = lm_minimize(residual, &specs, &FitOptions::default())?;
    let sx = result.std_error("x_nm").expect("named parameter");
    let sy = result.std_error("y_nm").expect("named parameter");
    Ok(PsfLocalization {
        x_nm: result.value("x_nm").expect("named parameter"),
        y_nm: result.value("y_nm").expect("named parameter"),
        precision_nm: ((sx * sx + sy * sy) / 2.0).sqrt(),
        sigma_nm: result.value("sigma_nm").expect("named parameter"),
        total_counts: result.value("total_counts").expect("named parameter"),
        baseline: result.value("baseline").expect("named parameter"),
        result,
    })
}

/// Detected counts needed to localize a spot of width `sigma_nm` to
/// `target_precision_nm`, from inverting the `σ/√N` precision law.
pub fn counts_for_precision(sigma_nm: f64, target_precision_nm: f64) -> Result<f64> {
    if !(sigma_nm > 0.0) || !(target_precision_nm > 0.0) {
        return Err(Error::Domain(format!(
            "spot width and target precision must be positive, got {sigma_nm} and {target_precision_nm}"
        )));
    }
    Ok((sigma_nm / target_precision_nm) * (sigma_nm / target_precision_nm))
}
