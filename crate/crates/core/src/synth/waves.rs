use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use super::SynthError;

/// Length of the raised-cosine ramps at each end of a breath hold.
pub const HOLD_RAMP_SECONDS: f64 = 1.0;

fn sample_count(duration: f64, sample_rate: f64) -> usize {
    (duration * sample_rate).round() as usize
}

fn check_window(w: [f64; 2], duration: f64) -> Result<(), SynthError> {
    let [t0, t1] = w;
    if !(t0.is_finite() && t1.is_finite() && 0.0 <= t0 && t0 < t1 && t1 <= duration) {
        return Err(SynthError::InvalidWindow(format!(
            "[{t0}, {t1}] is not an ordered window inside [0, {duration}]"
        )));
    }
    Ok(())
}

/// Breathing amplitude factor at `t`: 1 outside holds, ramping to 0 over the
/// first and last second inside each hold window.
pub fn hold_envelope(t: f64, holds: &[[f64; 2]]) -> f64 {
    holds
        .iter()
        .map(|&[t0, t1]| {
            if t < t0 || t > t1 {
                return 1.0;
            }
            let ramp = HOLD_RAMP_SECONDS.min(0.5 * (t1 - t0));
            let edge = (t - t0).min(t1 - t);
            if edge >= ramp {
                0.0
            } else {
                0.5 * (1.0 + (PI * edge / ramp).cos())
            }
        })
        .fold(1.0, f64::min)
}

/// Chest expansion: `depth * sin(2 pi rate t)`, silenced inside hold windows.
pub fn respiration_wave(
    rate: f64,
    depth: f64,
    duration: f64,
    holds: &[[f64; 2]],
    sample_rate: f64,
) -> Result<Vec<f64>, SynthError> {
    if !(rate >= 0.0) {
        return Err(SynthError::InvalidConfig(format!("respiration rate {rate} must be >= 0")));
    }
    for &w in holds {
        check_window(w, duration)?;
    }
    Ok((0..sample_count(duration, sample_rate))
        .map(|i| {
            let t = i as f64 / sample_rate;
            depth * hold_envelope(t, holds) * (TAU * rate * t).sin()
        })
        .collect())
}

/// Step oscillation: `depth * cos(2 pi cadence t)`; all zeros when stationary.
pub fn gait_wave(cadence: f64, depth: f64, duration: f64, sample_rate: f64) -> Vec<f64> {
    let n = sample_count(duration, sample_rate);
    if cadence <= 0.0 {
        return vec![0.0; n];
    }
    (0..n)
        .map(|i| depth * (TAU * cadence * i as f64 / sample_rate).cos())
        .collect()
}

/// Cuff inflation and release timeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OcclusionConfig {
    pub inflate_start: f64,
    pub full_occlusion: f64,
    pub release: f64,
    /// Fraction of the inflation ramp after which the diastolic wave is lost.
    #[serde(default = "default_suppression_frac")]
    pub suppression_frac: f64,
    /// Number of transient beats after release.
    #[serde(default = "default_release_beats")]
    pub release_beats: usize,
}

fn default_suppression_frac() -> f64 {
    0.6
}

fn default_release_beats() -> usize {
    5
}

impl OcclusionConfig {
    pub fn new(inflate_start: f64, full_occlusion: f64, release: f64) -> Self {
        Self {
            inflate_start,
            full_occlusion,
            release,
            suppression_frac: default_suppression_frac(),
            release_beats: default_release_beats(),
        }
    }

    pub fn validate(&self, duration: f64) -> Result<(), SynthError> {
        let ok = 0.0 <= self.inflate_start
            && self.inflate_start < self.full_occlusion
            && self.full_occlusion < self.release
            && self.release < duration
            && (0.0..=1.0).contains(&self.suppression_frac);
        if ok {
            Ok(())
        } else {
            Err(SynthError::InvalidWindow(format!(
                "occlusion timeline {self:?} must satisfy 0 <= inflate < full < release < {duration}"
            )))
        }
    }

    /// Time at which the diastolic wave disappears.
    pub fn suppression_start(&self) -> f64 {
        self.inflate_start + self.suppression_frac * (self.full_occlusion - self.inflate_start)
    }

    /// Envelope at time `t` for beats of nominal length `beat_period`.
    pub fn at(&self, t: f64, beat_period: f64) -> EnvelopeSample {
        let burst_end = self.release + self.release_beats as f64 * beat_period;
        let amplitude_scale = if t < self.inflate_start || t >= self.release {
            1.0
        } else if t < self.full_occlusion {
            1.0 - (t - self.inflate_start) / (self.full_occlusion - self.inflate_start)
        } else {
            0.0
        };
        EnvelopeSample {
            amplitude_scale,
            diastolic_suppressed: t >= self.suppression_start() && t < self.release,
            release_burst: t >= self.release && t < burst_end,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeSample {
    pub amplitude_scale: f64,
    pub diastolic_suppressed: bool,
    pub release_burst: bool,
}

impl EnvelopeSample {
    pub const UNOCCLUDED: Self = Self {
        amplitude_scale: 1.0,
        diastolic_suppressed: false,
        release_burst: false,
    };
}

/// Per-sample cuff envelope. The release transient lasts `release_beats`
/// beats of length `beat_period`.
pub fn occlusion_envelope(
    occlusion: &OcclusionConfig,
    duration: f64,
    sample_rate: f64,
    beat_period: f64,
) -> Result<Vec<EnvelopeSample>, SynthError> {
    occlusion.validate(duration)?;
    Ok((0..sample_count(duration, sample_rate))
        .map(|i| occlusion.at(i as f64 / sample_rate, beat_period))
        .collect())
}
