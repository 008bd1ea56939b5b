//! Filtering, detrending, resampling and spectral estimation.

mod filter;
mod spectrum;

pub use filter::{bandpass, Bandpass, Biquad, FilterMode, FilterSpec, FilterState};
pub use spectrum::{
    power_spectrum, spectral_peaks, strongest_peak_in_band, welch, SpectralPeak, Spectrum, WelchConfig,
    Window,
};

use thiserror::Error;

use crate::signal::{SignalError, Trace};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DspError {
    #[error("band [{low}, {high}] Hz must satisfy 0 < low < high < {nyquist} Hz")]
    BandOutOfRange { low: f64, high: f64, nyquist: f64 },
    #[error("filter order must be a positive even integer, got {0}")]
    InvalidOrder(usize),
    #[error("segment of {segment} s is longer than the {duration} s trace")]
    SegmentTooLong { segment: f64, duration: f64 },
    #[error("segment of {0} s holds fewer than two samples")]
    SegmentTooShort(f64),
    #[error("overlap fraction {0} outside [0, 1)")]
    InvalidOverlap(f64),
    #[error("target sample rate must be positive")]
    NonPositiveRate,
    #[error(transparent)]
    Signal(#[from] SignalError),
}

/// Removes the least-squares straight line.
pub fn detrend(trace: &Trace) -> Trace {
    let x = trace.samples();
    let n = x.len() as f64;
    // centred abscissa keeps the normal equations well conditioned
    let centre = (n - 1.0) / 2.0;
    let mean = x.iter().sum::<f64>() / n;
    let (sxy, sxx) = x.iter().enumerate().fold((0.0, 0.0), |(sxy, sxx), (i, &v)| {
        let u = i as f64 - centre;
        (sxy + u * (v - mean), sxx + u * u)
    });
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let out = x
        .iter()
        .enumerate()
        .map(|(i, &v)| v - mean - slope * (i as f64 - centre))
        .collect();
    trace.with_samples(out).expect("detrending preserves finiteness")
}

/// Linear-interpolation resampling onto `new_rate`. The output covers the
/// same duration; the final partial interval is extrapolated from the last
/// two input samples.
pub fn resample(trace: &Trace, new_rate: f64) -> Result<Trace, DspError> {
    if !(new_rate > 0.0) || !new_rate.is_finite() {
        return Err(DspError::NonPositiveRate);
    }
    let x = trace.samples();
    let ratio = trace.sample_rate() / new_rate;
    let n_out = ((x.len() as f64 / ratio).round() as usize).max(1);
    let last = x.len() - 1;
    let out = (0..n_out)
        .map(|j| {
            let pos = j as f64 * ratio;
            if last == 0 {
                return x[0];
            }
            let i = (pos.floor() as usize).min(last - 1);
            let frac = pos - i as f64;
            x[i] + (x[i + 1] - x[i]) * frac
        })
        .collect();
    Ok(Trace::new(new_rate, trace.start_time(), out, trace.site())?)
}
