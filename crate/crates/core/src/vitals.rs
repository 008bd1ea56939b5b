//! Heart rate, pulse-rate variability, respiration, cadence and pulse wave
//! velocity, plus the report that gathers them.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsp::{self, bandpass, DspError, FilterSpec, SpectralPeak, Spectrum, WelchConfig, Window};
use crate::pulse::{self, BeatSeries, DetectorConfig, PulseError};
use crate::signal::{basic_stats, Recording, Site, Trace};
use crate::synth::{IBI_MAX, IBI_MIN};

/// Recordings shorter than this are outside the scope of the long-term SDNN norm.
pub const LONG_TERM_SECONDS: f64 = 86_400.0;
/// Informational SDNN threshold, seconds.
pub const SDNN_THRESHOLD: f64 = 0.050;
pub const DEFAULT_BIN_WIDTH: f64 = 0.025;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VitalsError {
    #[error("at least two beats are needed, got {0}")]
    TooFewBeats(usize),
    #[error("at least two intervals are needed, got {0}")]
    TooFewIntervals(usize),
    #[error("no intervals given")]
    EmptyInput,
    #[error("pulse time difference must be positive, got {0} s")]
    NonPositiveDelay(f64),
    #[error("path difference must be positive, got {0} m")]
    NonPositiveDistance(f64),
    #[error("speed must be positive, got {0} m/s")]
    NonPositiveSpeed(f64),
    #[error("histogram bin width must be positive, got {0}")]
    InvalidBinWidth(f64),
    #[error("trace of {duration} s is shorter than the {required} s needed")]
    TraceTooShort { duration: f64, required: f64 },
    #[error("no cadence peak in [{lo}, {hi}] Hz")]
    NoCadencePeak { lo: f64, hi: f64 },
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error(transparent)]
    Pulse(#[from] PulseError),
}

/// Intervals that survived physiological gating, and how many did not.
#[derive(Debug, Clone, PartialEq)]
pub struct Intervals {
    pub values: Vec<f64>,
    pub dropped: usize,
}

impl Intervals {
    pub fn warning(&self) -> Option<String> {
        (self.dropped > 0).then(|| {
            format!(
                "dropped {} inter-beat interval(s) outside [{IBI_MIN}, {IBI_MAX}] s",
                self.dropped
            )
        })
    }
}

/// Successive foot differences with out-of-range intervals removed.
pub fn interbeat_intervals(series: &BeatSeries) -> Result<Intervals, VitalsError> {
    intervals_from_feet(&series.foot_times())
}

pub fn intervals_from_feet(feet: &[f64]) -> Result<Intervals, VitalsError> {
    if feet.len() < 2 {
        return Err(VitalsError::TooFewBeats(feet.len()));
    }
    let (values, rejected): (Vec<f64>, Vec<f64>) = feet
        .windows(2)
        .map(|w| w[1] - w[0])
        .partition(|d| (IBI_MIN..=IBI_MAX).contains(d));
    Ok(Intervals {
        values,
        dropped: rejected.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub bin_center: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianFit {
    pub mu: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrvReport {
    pub n_beats: usize,
    pub mean_ibi: f64,
    /// Population standard deviation of the intervals.
    pub sdnn: f64,
    pub histogram: Vec<HistogramBin>,
    pub gaussian_fit: GaussianFit,
    /// True when the recording is too short for the 24 h SDNN norm.
    pub long_term_flag_caveat: bool,
    /// Informational: SDNN under 50 ms.
    pub sdnn_below_threshold: bool,
}

/// Moment statistics, moment-matched Gaussian and a histogram whose bins of
/// width `bin_width` are centred on the mean. Bins run contiguously from the
/// lowest to the highest occupied one.
pub fn prv_stats(ibis: &[f64], bin_width: f64) -> Result<PrvReport, VitalsError> {
    if ibis.len() < 2 {
        return Err(VitalsError::TooFewIntervals(ibis.len()));
    }
    if !(bin_width > 0.0 && bin_width.is_finite()) {
        return Err(VitalsError::InvalidBinWidth(bin_width));
    }
    let stats = basic_stats(ibis);
    let (mean, sd) = (stats.mean, stats.sd);
    let index = |x: f64| ((x - mean) / bin_width + 0.5).floor() as i64;
    let lo = ibis.iter().map(|&x| index(x)).min().unwrap();
    let hi = ibis.iter().map(|&x| index(x)).max().unwrap();
    let mut counts = vec![0usize; (hi - lo + 1) as usize];
    for &x in ibis {
        counts[(index(x) - lo) as usize] += 1;
    }
    let histogram = counts
        .into_iter()
        .enumerate()
        .map(|(k, count)| HistogramBin {
            bin_center: mean + (lo + k as i64) as f64 * bin_width,
            count,
        })
        .collect();
    Ok(PrvReport {
        n_beats: ibis.len() + 1,
        mean_ibi: mean,
        sdnn: sd,
        histogram,
        gaussian_fit: GaussianFit { mu: mean, sigma: sd },
        long_term_flag_caveat: ibis.iter().sum::<f64>() < LONG_TERM_SECONDS,
        sdnn_below_threshold: sd < SDNN_THRESHOLD,
    })
}

/// Beats per minute, `60 / mean(ibis)`.
pub fn heart_rate(ibis: &[f64]) -> Result<f64, VitalsError> {
    if ibis.is_empty() {
        return Err(VitalsError::EmptyInput);
    }
    Ok(60.0 / basic_stats(ibis).mean)
}

/// Pulse wave velocity in m/s.
pub fn pwv(delta_t: f64, path_difference: f64) -> Result<f64, VitalsError> {
    if !(delta_t > 0.0 && delta_t.is_finite()) {
        return Err(VitalsError::NonPositiveDelay(delta_t));
    }
    if !(path_difference > 0.0 && path_difference.is_finite()) {
        return Err(VitalsError::NonPositiveDistance(path_difference));
    }
    Ok(path_difference / delta_t)
}

/// Spectral search settings for the chest channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectralConfig {
    pub respiration_band: [f64; 2],
    pub cadence_band: [f64; 2],
    /// Welch segments are `min(max_segment_seconds, duration / 2)` long.
    pub max_segment_seconds: f64,
    pub overlap: f64,
    /// A peak must exceed this multiple of the median in-band density.
    pub peak_to_median: f64,
    /// ... and this fraction of the largest non-DC density ...
    pub min_relative_peak: f64,
    /// ... and this multiple of the broadband median density.
    pub min_floor_ratio: f64,
    pub min_duration: f64,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        Self {
            respiration_band: [0.08, 0.7],
            cadence_band: [1.2, 4.0],
            max_segment_seconds: 30.0,
            overlap: 0.5,
            peak_to_median: 3.0,
            min_relative_peak: 0.01,
            min_floor_ratio: 100.0,
            min_duration: 20.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RespirationEstimate {
    /// Breaths per minute.
    pub rate: f64,
    pub frequency: f64,
    /// `1 - median in-band density / peak density`, in [0, 1].
    pub confidence: f64,
    pub df: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CadenceEstimate {
    /// Steps per second.
    pub cadence: f64,
    /// Metres per step.
    pub step_length: f64,
    pub df: f64,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        0.0
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Welch spectrum of the detrended chest trace.
pub fn chest_spectrum(chest: &Trace, cfg: &SpectralConfig) -> Result<Spectrum, VitalsError> {
    let duration = chest.duration();
    if duration < cfg.min_duration {
        return Err(VitalsError::TraceTooShort {
            duration,
            required: cfg.min_duration,
        });
    }
    let welch = WelchConfig {
        segment_seconds: cfg.max_segment_seconds.min(duration / 2.0),
        overlap_frac: cfg.overlap,
        window: Window::Hann,
    };
    Ok(dsp::welch(&dsp::detrend(chest), &welch)?)
}

/// Strongest peak in `band` that passes the three significance tests, with
/// its confidence.
pub fn significant_peak(spectrum: &Spectrum, band: [f64; 2], cfg: &SpectralConfig) -> Option<(SpectralPeak, f64)> {
    let peak = dsp::strongest_peak_in_band(spectrum, band[0], band[1])?;
    let p = &spectrum.power;
    let in_band = median(spectrum.bins_in(band[0], band[1]).map(|k| p[k]).collect());
    let broadband = median(p[1..].to_vec());
    let top = p[1..].iter().cloned().fold(0.0, f64::max);
    let significant = peak.power >= cfg.peak_to_median * in_band
        && peak.power >= cfg.min_relative_peak * top
        && peak.power >= cfg.min_floor_ratio * broadband;
    significant.then(|| (peak, (1.0 - in_band / peak.power).clamp(0.0, 1.0)))
}

/// Breathing rate from the strongest significant peak in the respiration
/// band, or `None` when there is no such peak.
pub fn respiration_rate(chest: &Trace, cfg: &SpectralConfig) -> Result<Option<RespirationEstimate>, VitalsError> {
    let spectrum = chest_spectrum(chest, cfg)?;
    Ok(
        significant_peak(&spectrum, cfg.respiration_band, cfg).map(|(pk, confidence)| RespirationEstimate {
            rate: 60.0 * pk.frequency,
            frequency: pk.frequency,
            confidence,
            df: spectrum.df,
        }),
    )
}

/// Step frequency from the cadence band and step length `speed / cadence`.
pub fn cadence_step_length(chest: &Trace, speed: f64, cfg: &SpectralConfig) -> Result<CadenceEstimate, VitalsError> {
    if !(speed > 0.0 && speed.is_finite()) {
        return Err(VitalsError::NonPositiveSpeed(speed));
    }
    let spectrum = chest_spectrum(chest, cfg)?;
    let [lo, hi] = cfg.cadence_band;
    let (pk, _) = significant_peak(&spectrum, cfg.cadence_band, cfg).ok_or(VitalsError::NoCadencePeak { lo, hi })?;
    Ok(CadenceEstimate {
        cadence: pk.frequency,
        step_length: speed / pk.frequency,
        df: spectrum.df,
    })
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct VitalsReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub heart_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prv: Option<PrvReport>,
    /// Breaths per minute.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub respiration_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub respiration_confidence: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cadence: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step_length: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pulse_time_difference: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pulse_time_dispersion: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pwv: Option<f64>,
    pub warnings: Vec<String>,
}

impl VitalsReport {
    /// One-line human summary of the fields that are present.
    pub fn summary(&self) -> String {
        let mut parts = Vec::new();
        if let Some(hr) = self.heart_rate {
            parts.push(format!("HR {hr:.1} bpm"));
        }
        if let Some(p) = &self.prv {
            parts.push(format!("SDNN {:.1} ms", p.sdnn * 1e3));
        }
        if let Some(rr) = self.respiration_rate {
            parts.push(format!("RR {rr:.1} /min"));
        }
        if let Some(c) = self.cadence {
            parts.push(format!("cadence {c:.2} Hz"));
        }
        if let Some(s) = self.step_length {
            parts.push(format!("step {s:.3} m"));
        }
        if let Some(d) = self.pulse_time_difference {
            parts.push(format!("PTD {:.1} ms", d * 1e3));
        }
        if let Some(v) = self.pwv {
            parts.push(format!("PWV {v:.2} m/s"));
        }
        if parts.is_empty() {
            "no vitals derived".into()
        } else {
            parts.join(", ")
        }
    }

    /// Every present number is finite and non-negative, except the pulse
    /// time difference, which carries a sign.
    pub fn is_well_formed(&self) -> bool {
        let nonneg = [
            self.heart_rate,
            self.respiration_rate,
            self.respiration_confidence,
            self.cadence,
            self.step_length,
            self.pulse_time_dispersion,
            self.pwv,
        ]
        .into_iter()
        .flatten()
        .all(|v| v.is_finite() && v >= 0.0);
        let prv_ok = self
            .prv
            .as_ref()
            .is_none_or(|p| p.mean_ibi.is_finite() && p.sdnn.is_finite() && p.sdnn >= 0.0);
        nonneg && prv_ok && self.pulse_time_difference.is_none_or(f64::is_finite)
    }
}

/// Settings for the full analysis pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    pub filter: FilterSpec,
    pub detector: DetectorConfig,
    pub spectral: SpectralConfig,
    pub histogram_bin_width: f64,
    /// Ignore beats inside the filter's edge transients.
    pub exclude_edges: bool,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            filter: FilterSpec::default(),
            detector: DetectorConfig::default(),
            spectral: SpectralConfig::default(),
            histogram_bin_width: DEFAULT_BIN_WIDTH,
            exclude_edges: true,
        }
    }
}

/// Assembles every quantity the inputs support.
///
/// The heart rate and PRV come from the wrist series, or from the ankle when
/// there is no wrist. Missing optional inputs and spectral searches that find
/// nothing leave fields empty and add a warning; invalid distances or speeds
/// and unusable pulse series are errors.
pub fn build_report(
    wrist: Option<&BeatSeries>,
    ankle: Option<&BeatSeries>,
    chest: Option<&Trace>,
    path_difference: Option<f64>,
    speed: Option<f64>,
    cfg: &AnalysisConfig,
) -> Result<VitalsReport, VitalsError> {
    if let Some(d) = path_difference {
        if !(d > 0.0 && d.is_finite()) {
            return Err(VitalsError::NonPositiveDistance(d));
        }
    }
    if let Some(v) = speed {
        if !(v > 0.0 && v.is_finite()) {
            return Err(VitalsError::NonPositiveSpeed(v));
        }
    }
    let mut report = VitalsReport::default();
    let warn = |r: &mut VitalsReport, m: String| r.warnings.push(m);

    match wrist.or(ankle) {
        Some(series) => {
            let intervals = interbeat_intervals(series)?;
            if let Some(w) = intervals.warning() {
                warn(&mut report, w);
            }
            let prv = prv_stats(&intervals.values, cfg.histogram_bin_width)?;
            report.heart_rate = Some(heart_rate(&intervals.values)?);
            if prv.sdnn_below_threshold {
                warn(
                    &mut report,
                    format!(
                        "SDNN {:.1} ms is below {} ms; the norm applies to 24 h recordings",
                        prv.sdnn * 1e3,
                        SDNN_THRESHOLD * 1e3
                    ),
                );
            }
            report.prv = Some(prv);
        }
        None => warn(&mut report, "no pulse channel: heart rate and PRV omitted".into()),
    }

    match (wrist, ankle) {
        (Some(w), Some(a)) => match pulse::pulse_time_difference(w, a) {
            Ok(ptd) => {
                report.pulse_time_difference = Some(ptd.delta_t);
                report.pulse_time_dispersion = Some(ptd.dispersion);
                match path_difference.map(|d| pwv(ptd.delta_t, d)) {
                    Some(Ok(v)) => report.pwv = Some(v),
                    Some(Err(e)) => warn(&mut report, format!("PWV omitted: {e}")),
                    None => warn(&mut report, "PWV omitted: no path difference given".into()),
                }
            }
            Err(e) => warn(&mut report, format!("pulse time difference omitted: {e}")),
        },
        _ if path_difference.is_some() => warn(
            &mut report,
            "path difference ignored: PWV needs both wrist and ankle pulses".into(),
        ),
        _ => {}
    }

    match chest {
        Some(c) => {
            match respiration_rate(c, &cfg.spectral) {
                Ok(Some(r)) => {
                    report.respiration_rate = Some(r.rate);
                    report.respiration_confidence = Some(r.confidence);
                }
                Ok(None) => warn(&mut report, "no significant respiration peak".into()),
                Err(e) => warn(&mut report, format!("respiration omitted: {e}")),
            }
            if let Some(v) = speed {
                match cadence_step_length(c, v, &cfg.spectral) {
                    Ok(est) => {
                        report.cadence = Some(est.cadence);
                        report.step_length = Some(est.step_length);
                    }
                    Err(e) => warn(&mut report, format!("cadence omitted: {e}")),
                }
            }
        }
        None if speed.is_some() => warn(&mut report, "speed ignored: cadence needs a chest channel".into()),
        None => {}
    }
    Ok(report)
}

/// Band-passes and annotates one pulse channel. With `exclude_edges`, beats
/// whose feet fall inside the filter's edge transients are removed when the
/// trace is long enough to keep at least one transient-free stretch of the
/// same length.
pub fn annotate_channel(trace: &Trace, cfg: &AnalysisConfig) -> Result<(BeatSeries, Option<String>), VitalsError> {
    let filtered = bandpass(trace, &cfg.filter)?;
    let series = pulse::annotate(&filtered, &cfg.detector)?;
    if !cfg.exclude_edges {
        return Ok((series, None));
    }
    let edge = cfg.filter.edge_transient_seconds();
    if trace.duration() < 3.0 * edge {
        let note = format!(
            "{} trace of {:.1} s is shorter than three edge transients ({edge} s each); edge beats kept",
            trace.site(),
            trace.duration()
        );
        return Ok((series, Some(note)));
    }
    let (t0, t1) = (trace.start_time() + edge, trace.end_time() - edge);
    let kept: Vec<_> = series
        .beats()
        .iter()
        .copied()
        .filter(|b| b.foot_time() >= t0 && b.foot_time() <= t1)
        .collect();
    if kept.is_empty() {
        return Err(PulseError::NoBeatsFound.into());
    }
    let trimmed = BeatSeries::new(kept, series.source_site(), series.polarity_used())?;
    Ok((trimmed, None))
}

/// Full pipeline over a recording: pulse channels are filtered and annotated,
/// the chest channel feeds the spectral estimates.
pub fn analyze_recording(
    recording: &Recording,
    cfg: &AnalysisConfig,
    path_difference: Option<f64>,
    speed: Option<f64>,
) -> Result<VitalsReport, VitalsError> {
    let mut notes = Vec::new();
    let mut run = |site: Site| -> Result<Option<BeatSeries>, VitalsError> {
        recording
            .channel(site)
            .map(|t| {
                let (series, note) = annotate_channel(t, cfg)?;
                notes.extend(note);
                Ok(series)
            })
            .transpose()
    };
    let wrist = run(Site::Wrist)?;
    let ankle = run(Site::Ankle)?;
    let chest = recording.channel(Site::Chest);
    let mut report = build_report(wrist.as_ref(), ankle.as_ref(), chest, path_difference, speed, cfg)?;
    report.warnings.splice(0..0, notes);
    Ok(report)
}
