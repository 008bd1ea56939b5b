//! Welch power spectral density and spectral peak picking.

use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::DspError;
use crate::signal::Trace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    Hann,
    Rectangular,
}

impl Window {
    pub fn name(self) -> &'static str {
        match self {
            Window::Hann => "hann",
            Window::Rectangular => "rectangular",
        }
    }

    /// Periodic window of length `n`.
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            Window::Rectangular => vec![1.0; n],
            Window::Hann => (0..n)
                .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WelchConfig {
    pub segment_seconds: f64,
    pub overlap_frac: f64,
    pub window: Window,
}

impl Default for WelchConfig {
    fn default() -> Self {
        Self {
            segment_seconds: 30.0,
            overlap_frac: 0.5,
            window: Window::Hann,
        }
    }
}

/// One-sided power spectral density on the grid `k * df`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub df: f64,
    pub power: Vec<f64>,
    pub window_descriptor: String,
    pub n_segments: usize,
}

impl Spectrum {
    pub fn frequency(&self, bin: usize) -> f64 {
        bin as f64 * self.df
    }

    pub fn frequencies(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.power.len()).map(|k| self.frequency(k))
    }

    /// Integral of the density, `sum(power) * df`.
    pub fn total_power(&self) -> f64 {
        self.power.iter().sum::<f64>() * self.df
    }

    /// Bins whose centre frequency lies in `[lo, hi]`.
    pub fn bins_in(&self, lo: f64, hi: f64) -> std::ops::RangeInclusive<usize> {
        let first = (lo / self.df).ceil().max(0.0) as usize;
        let last = ((hi / self.df).floor() as usize).min(self.power.len().saturating_sub(1));
        first..=last
    }
}

/// Welch PSD with a Hann window.
pub fn power_spectrum(trace: &Trace, segment_seconds: f64, overlap_frac: f64) -> Result<Spectrum, DspError> {
    welch(
        trace,
        &WelchConfig {
            segment_seconds,
            overlap_frac,
            window: Window::Hann,
        },
    )
}

/// Averaged, windowed periodogram. Each segment has its mean removed before
/// windowing; the density is scaled so that `total_power` equals the mean
/// squared value of the (mean-removed) signal for a rectangular window.
pub fn welch(trace: &Trace, cfg: &WelchConfig) -> Result<Spectrum, DspError> {
    let fs = trace.sample_rate();
    if !(0.0..1.0).contains(&cfg.overlap_frac) {
        return Err(DspError::InvalidOverlap(cfg.overlap_frac));
    }
    let seg_len = (cfg.segment_seconds * fs).round() as usize;
    if seg_len < 2 {
        return Err(DspError::SegmentTooShort(cfg.segment_seconds));
    }
    if seg_len > trace.len() {
        return Err(DspError::SegmentTooLong {
            segment: cfg.segment_seconds,
            duration: trace.duration(),
        });
    }
    let hop = ((seg_len as f64) * (1.0 - cfg.overlap_frac)).round().max(1.0) as usize;
    let window = cfg.window.coefficients(seg_len);
    let window_energy: f64 = window.iter().map(|w| w * w).sum();
    let fft = FftPlanner::new().plan_fft_forward(seg_len);
    let n_bins = seg_len / 2 + 1;

    let x = trace.samples();
    let mut acc = vec![0.0; n_bins];
    let mut buf = vec![Complex::new(0.0, 0.0); seg_len];
    let mut n_segments = 0;
    let mut start = 0;
    while start + seg_len <= x.len() {
        let seg = &x[start..start + seg_len];
        let mean = seg.iter().sum::<f64>() / seg_len as f64;
        for ((b, &v), &w) in buf.iter_mut().zip(seg).zip(&window) {
            *b = Complex::new((v - mean) * w, 0.0);
        }
        fft.process(&mut buf);
        for (a, c) in acc.iter_mut().zip(&buf) {
            *a += c.norm_sqr();
        }
        n_segments += 1;
        start += hop;
    }

    let scale = 1.0 / (fs * window_energy * n_segments as f64);
    let nyquist_bin = seg_len.is_multiple_of(2).then_some(n_bins - 1);
    let power = acc
        .into_iter()
        .enumerate()
        .map(|(k, p)| {
            let one_sided = if k == 0 || Some(k) == nyquist_bin { 1.0 } else { 2.0 };
            p * scale * one_sided
        })
        .collect();
    Ok(Spectrum {
        df: fs / seg_len as f64,
        power,
        window_descriptor: format!(
            "welch/{}/{}s/{}%",
            cfg.window.name(),
            cfg.segment_seconds,
            cfg.overlap_frac * 100.0
        ),
        n_segments,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralPeak {
    pub frequency: f64,
    pub power: f64,
}

/// Local maxima above `floor_frac` of the global maximum, picked greedily by
/// power with at least `min_separation` Hz between picks and refined by a
/// three-point parabola. Sorted by descending power.
pub fn spectral_peaks(
    spectrum: &Spectrum,
    max_peaks: usize,
    min_separation: f64,
    floor_frac: f64,
) -> Vec<SpectralPeak> {
    let p = &spectrum.power;
    if p.len() < 3 {
        return Vec::new();
    }
    let global = p.iter().cloned().fold(0.0, f64::max);
    if global <= 0.0 {
        return Vec::new();
    }
    let floor = floor_frac * global;
    let mut candidates: Vec<usize> = (1..p.len() - 1)
        .filter(|&k| p[k] > p[k - 1] && p[k] >= p[k + 1] && p[k] >= floor && p[k] > 0.0)
        .collect();
    candidates.sort_by(|&a, &b| p[b].total_cmp(&p[a]).then(a.cmp(&b)));

    let mut picked: Vec<SpectralPeak> = Vec::new();
    for k in candidates {
        if picked.len() == max_peaks {
            break;
        }
        let peak = refine_peak(spectrum, k);
        if picked
            .iter()
            .all(|q| (q.frequency - peak.frequency).abs() >= min_separation)
        {
            picked.push(peak);
        }
    }
    picked.sort_by(|a, b| b.power.total_cmp(&a.power));
    picked
}

/// Vertex of the parabola through bins `k - 1, k, k + 1`.
fn refine_peak(spectrum: &Spectrum, k: usize) -> SpectralPeak {
    let p = &spectrum.power;
    let (l, c, r) = (p[k - 1], p[k], p[k + 1]);
    let denom = l - 2.0 * c + r;
    let offset = if denom < 0.0 {
        (0.5 * (l - r) / denom).clamp(-0.5, 0.5)
    } else {
        0.0
    };
    SpectralPeak {
        frequency: (k as f64 + offset) * spectrum.df,
        power: c - 0.25 * (l - r) * offset,
    }
}

/// Strongest local maximum whose refined frequency lies in `[lo, hi]`.
pub fn strongest_peak_in_band(spectrum: &Spectrum, lo: f64, hi: f64) -> Option<SpectralPeak> {
    spectral_peaks(spectrum, usize::MAX, 0.0, 0.0)
        .into_iter()
        .find(|pk| pk.frequency >= lo && pk.frequency <= hi)
}
