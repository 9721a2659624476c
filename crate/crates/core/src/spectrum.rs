//! Spectral data container and peak/dip measurement utilities.
//!
//! A [`Spectrum`] is an ordered frequency axis (Hz) with one value per point
//! — dimensionless transmission or a detected rate. The measurement helpers
//! here (half-maximum crossings, FWHM, moving average, linear resampling)
//! are shared by the forward models, the scan-averaging pipeline and the
//! fit initialization heuristics.

use crate::error::{Error, Result};

/// What the values of a [`Spectrum`] mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumKind {
    /// Dimensionless transmitted power, ideally near 1 away from resonances.
    Transmission,
    /// Detected fluorescence rate (arbitrary scale, ≥ 0).
    Fluorescence,
}

/// One spectral trace on a strictly increasing frequency axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    /// Optical frequency per point, Hz, strictly increasing.
    pub frequency_hz: Vec<f64>,
    /// One value per frequency point.
    pub values: Vec<f64>,
    /// Physical interpretation of `values`.
    pub kind: SpectrumKind,
}

impl Spectrum {
    /// Validated constructor: axis strictly increasing, lengths equal, all
    /// values finite and non-negative.
    pub fn new(frequency_hz: Vec<f64>, values: Vec<f64>, kind: SpectrumKind) -> Result<Self> {
        if frequency_hz.len() != values.len() {
            return Err(Error::Sampling(format!(
                "axis and values differ in length: {} vs {}",
                frequency_hz.len(),
                values.len()
            )));
        }
        if frequency_hz.len() < 2 {
            return Err(Error::Sampling(
                "a spectrum needs at least two points".into(),
            ));
        }
        for pair in frequency_hz.windows(2) {
            if !(pair[1] > pair[0]) {
                return Err(Error::Sampling(format!(
                    "frequency axis must be strictly increasing; {} then {}",
                    pair[0], pair[1]
                )));
            }
        }
        for &v in &values {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Domain(format!(
                    "spectrum values must be finite and non-negative, got {v}"
                )));
            }
        }
        Ok(Self {
            frequency_hz,
            values,
            kind,
        })
    }

    /// Number of points.
    pub fn len(&self) -> usize {
        self.frequency_hz.len()
    }

    /// True when the spectrum holds no points (never, for validated spectra).
    pub fn is_empty(&self) -> bool {
        self.frequency_hz.is_empty()
    }

    /// Bin spacing of a uniform axis (mean spacing otherwise), Hz.
    pub fn bin_width_hz(&self) -> f64 {
        let n = self.frequency_hz.len();
        (self.frequency_hz[n - 1] - self.frequency_hz[0]) / (n as f64 - 1.0)
    }
}

/// `n` evenly spaced points from `start` to `stop` inclusive.
pub fn linspace(start: f64, stop: f64, n: usize) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::Sampling(format!("need at least 2 points, got {n}")));
    }
    if !(stop > start) {
        return Err(Error::Sampling(format!(
            "need stop > start, got {start}..{stop}"
        )));
    }
    let step = (stop - start) / (n as f64 - 1.0);
    Ok((0..n).map(|i| start + step * i as f64).collect())
}

/// `n` evenly spaced points covering `center ± span/2`.
pub fn centered_grid(center_hz: f64, span_hz: f64, n: usize) -> Result<Vec<f64>> {
    if !(span_hz > 0.0) {
        return Err(Error::Sampling(format!(
            "span must be positive, got {span_hz}"
        )));
    }
    linspace(center_hz - span_hz / 2.0, center_hz + span_hz / 2.0, n)
}

/// Centered moving average of odd width `w` (≥ 1); windows are truncated at
/// the trace ends so the output has the input's length.
pub fn moving_average(values: &[f64], width: usize) -> Vec<f64> {
    if width <= 1 || values.is_empty() {
        return values.to_vec();
    }
    let half = width / 2;
    let n = values.len();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            values[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

/// Linear interpolation of `(xs, ys)` at `x`; `None` outside the axis range.
/// `xs` must be strictly increasing.
pub fn interp_linear(xs: &[f64], ys: &[f64], x: f64) -> Option<f64> {
    let n = xs.len();
    if n == 0 || x < xs[0] || x > xs[n - 1] {
        return None;
    }
    // partition_point gives the first index with xs[i] > x.
    let hi = xs.partition_point(|&v| v <= x);
    if hi == 0 {
        return Some(ys[0]);
    }
    if hi == n {
        return Some(ys[n - 1]);
    }
    let (x0, x1) = (xs[hi - 1], xs[hi]);
    let (y0, y1) = (ys[hi - 1], ys[hi]);
    let t = (x - x0) / (x1 - x0);
    Some(y0 + t * (y1 - y0))
}

/// Summary of a single peak: center from half-maximum crossings, FWHM, and
/// the excursion above the supplied baseline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakSummary {
    /// Midpoint of the two half-maximum crossings, Hz.
    pub center_hz: f64,
    /// Distance between the half-maximum crossings, Hz.
    pub fwhm_hz: f64,
    /// Peak value minus baseline (positive).
    pub height: f64,
    /// Baseline used for the half level.
    pub baseline: f64,
    /// Index of the maximum sample.
    pub peak_index: usize,
}

/// Locate a peak rising above `baseline`: the half level is
/// `baseline + height/2` and both crossings are found by linear
/// interpolation walking outward from the maximum.
pub fn peak_summary(freq_hz: &[f64], values: &[f64], baseline: f64) -> Result<PeakSummary> {
    if freq_hz.len() != values.len() || freq_hz.len() < 3 {
        return Err(Error::Sampling(
            "peak summary needs at least 3 matched points".into(),
        ));
    }
    let (peak_index, &peak_value) = values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty");
    let height = peak_value - baseline;
    if !(height > 0.0) {
        return Err(Error::Detection(format!(
            "no excursion above baseline {baseline} (max {peak_value})"
        )));
    }
    let half = baseline + height / 2.0;

    let mut left = None;
    for i in (0..peak_index).rev() {
        if values[i] <= half {
            let t = (half - values[i]) / (values[i + 1] - values[i]);
            left = Some(freq_hz[i] + t * (freq_hz[i + 1] - freq_hz[i]));
            break;
        }
    }
    let mut right = None;
    for i in peak_index + 1..values.len() {
        if values[i] <= half {
            let t = (values[i - 1] - half) / (values[i - 1] - values[i]);
            right = Some(freq_hz[i - 1] + t * (freq_hz[i] - freq_hz[i - 1]));
            break;
        }
    }
    match (left, right) {
        (Some(l), Some(r)) => Ok(PeakSummary {
            center_hz: (l + r) / 2.0,
            fwhm_hz: r - l,
            height,
            baseline,
            peak_index,
        }),
        _ => Err(Error::Coverage(
            "half-maximum level not bracketed on both sides of the peak".into(),
        )),
    }
}

/// [`peak_summary`] for a dip below the baseline: the trace is reflected
/// about the baseline and measured as a peak. `height` is the dip depth.
pub fn dip_summary(freq_hz: &[f64], values: &[f64], baseline: f64) -> Result<PeakSummary> {
    let reflected: Vec<f64> = values.iter().map(|v| 2.0 * baseline - v).collect();
    let mut summary = peak_summary(freq_hz, &reflected, baseline)?;
    summary.baseline = baseline;
    Ok(summary)
}

/// Count strict sign changes in a sequence, skipping exact zeros.
pub fn sign_changes(values: &[f64]) -> usize {
    let mut count = 0;
    let mut prev: Option<f64> = None;
    for &v in values {
        if v == 0.0 {
            continue;
        }
        if let Some(p) = prev {
            if p.signum() != v.signum() {
                count += 1;
            }
        }
        prev = Some(v);
    }
    count
}
