//! Uniformly sampled intensity traces and multi-channel recordings.
//!
//! Sample indices are the authoritative time grid: the time of sample `i` is
//! always `start_time + i / sample_rate`, never an accumulated sum.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Sample rate used throughout the crate when none is given.
pub const DEFAULT_SAMPLE_RATE: f64 = 250.0;

/// Relative tolerance used when snapping a time onto the sample grid.
const GRID_SNAP_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SignalError {
    #[error("trace has no samples")]
    EmptySamples,
    #[error("sample {0} is not finite")]
    NonFiniteSample(usize),
    #[error("sample rate must be positive")]
    NonPositiveRate,
    #[error("window [{t0}, {t1}) lies outside the trace span [{start}, {end}]")]
    OutOfRange { t0: f64, t1: f64, start: f64, end: f64 },
    #[error("window [{0}, {1}) contains no samples")]
    EmptyWindow(f64, f64),
    #[error("recording has no channels")]
    NoChannels,
    #[error("channel {index} is not aligned with channel 0 ({reason})")]
    MisalignedChannel { index: usize, reason: &'static str },
}

/// Body location of a sensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Site {
    Chest,
    Wrist,
    Ankle,
    Unspecified,
}

impl Site {
    pub const ALL: [Site; 4] = [Site::Chest, Site::Wrist, Site::Ankle, Site::Unspecified];

    pub fn as_str(self) -> &'static str {
        match self {
            Site::Chest => "chest",
            Site::Wrist => "wrist",
            Site::Ankle => "ankle",
            Site::Unspecified => "unspecified",
        }
    }

    /// True for sites that carry an arterial pulse.
    pub fn is_pulse_site(self) -> bool {
        matches!(self, Site::Wrist | Site::Ankle)
    }
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Site {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Site::ALL
            .into_iter()
            .find(|site| site.as_str() == s)
            .ok_or_else(|| format!("unknown site `{s}`"))
    }
}

/// A validated, uniformly sampled single-channel time series.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    sample_rate: f64,
    start_time: f64,
    samples: Vec<f64>,
    site: Site,
}

impl Trace {
    /// Builds a trace, rejecting empty input, non-finite samples and
    /// non-positive sample rates.
    pub fn new(
        sample_rate: f64,
        start_time: f64,
        samples: Vec<f64>,
        site: Site,
    ) -> Result<Self, SignalError> {
        if !(sample_rate > 0.0) || !sample_rate.is_finite() {
            return Err(SignalError::NonPositiveRate);
        }
        if samples.is_empty() {
            return Err(SignalError::EmptySamples);
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(SignalError::NonFiniteSample(i));
        }
        Ok(Self {
            sample_rate,
            start_time,
            samples,
            site,
        })
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn start_time(&self) -> f64 {
        self.start_time
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn site(&self) -> Site {
        self.site
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    /// Always false: a constructed trace holds at least one sample.
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.sample_rate
    }

    /// Span covered by the samples, `len / sample_rate`.
    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }

    /// Exclusive end of the sampled span.
    pub fn end_time(&self) -> f64 {
        self.start_time + self.duration()
    }

    pub fn time_at(&self, index: usize) -> f64 {
        self.start_time + index as f64 / self.sample_rate
    }

    /// Fractional sample position of time `t`.
    pub fn position_of(&self, t: f64) -> f64 {
        (t - self.start_time) * self.sample_rate
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.samples.len()).map(move |i| self.time_at(i))
    }

    /// Same grid and site, new samples.
    pub fn with_samples(&self, samples: Vec<f64>) -> Result<Self, SignalError> {
        Trace::new(self.sample_rate, self.start_time, samples, self.site)
    }

    pub fn with_site(mut self, site: Site) -> Self {
        self.site = site;
        self
    }

    pub fn with_start_time(mut self, start_time: f64) -> Self {
        self.start_time = start_time;
        self
    }

    /// Half-open sub-trace `[t0, t1)` snapped to the sample grid: the first
    /// sample at or after `t0` up to the last sample strictly before `t1`.
    pub fn segment(&self, t0: f64, t1: f64) -> Result<Trace, SignalError> {
        let span_tol = GRID_SNAP_TOL * self.dt().max(1.0);
        let out_of_range = || SignalError::OutOfRange {
            t0,
            t1,
            start: self.start_time,
            end: self.end_time(),
        };
        if !(t0.is_finite() && t1.is_finite()) {
            return Err(out_of_range());
        }
        if t0 < self.start_time - span_tol || t1 > self.end_time() + span_tol || t0 >= self.end_time() {
            return Err(out_of_range());
        }
        if t1 <= t0 {
            return Err(SignalError::EmptyWindow(t0, t1));
        }
        let i0 = self.grid_index_at_or_after(t0);
        let i1 = self.grid_index_at_or_after(t1).min(self.len());
        if i0 >= i1 {
            return Err(SignalError::EmptyWindow(t0, t1));
        }
        Ok(Trace {
            sample_rate: self.sample_rate,
            start_time: self.time_at(i0),
            samples: self.samples[i0..i1].to_vec(),
            site: self.site,
        })
    }

    /// Smallest index whose time is `>= t`, treating times within a tiny
    /// tolerance of a grid point as lying on it.
    fn grid_index_at_or_after(&self, t: f64) -> usize {
        let pos = self.position_of(t);
        let nearest = pos.round();
        let idx = if (pos - nearest).abs() <= GRID_SNAP_TOL * pos.abs().max(1.0) {
            nearest
        } else {
            pos.ceil()
        };
        idx.max(0.0) as usize
    }

    pub fn stats(&self) -> BasicStats {
        basic_stats(&self.samples)
    }
}

/// Closed-form summary statistics; `sd` is the population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasicStats {
    pub mean: f64,
    pub sd: f64,
    pub min: f64,
    pub max: f64,
}

/// Mean, population standard deviation, min and max of a non-empty slice.
///
/// Uses two passes so the variance is not subject to cancellation. An empty
/// slice yields NaN fields; `Trace` can never be empty.
pub fn basic_stats(values: &[f64]) -> BasicStats {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let (min, max) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    BasicStats {
        mean,
        sd: var.sqrt(),
        min,
        max,
    }
}

/// Aligned channels sharing sample rate, start time and length.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    channels: Vec<Trace>,
    label: String,
}

impl Recording {
    pub fn new(channels: Vec<Trace>, label: impl Into<String>) -> Result<Self, SignalError> {
        let first = channels.first().ok_or(SignalError::NoChannels)?;
        for (index, ch) in channels.iter().enumerate().skip(1) {
            let reason = if ch.sample_rate != first.sample_rate {
                Some("sample rate")
            } else if ch.start_time != first.start_time {
                Some("start time")
            } else if ch.len() != first.len() {
                Some("length")
            } else {
                None
            };
            if let Some(reason) = reason {
                return Err(SignalError::MisalignedChannel { index, reason });
            }
        }
        Ok(Self {
            channels,
            label: label.into(),
        })
    }

    pub fn channels(&self) -> &[Trace] {
        &self.channels
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn sample_rate(&self) -> f64 {
        self.channels[0].sample_rate
    }

    pub fn start_time(&self) -> f64 {
        self.channels[0].start_time
    }

    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// First channel recorded at `site`.
    pub fn channel(&self, site: Site) -> Option<&Trace> {
        self.channels.iter().find(|c| c.site == site)
    }
}
