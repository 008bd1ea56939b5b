//! Synthetic fiber-sensor recordings with ground-truth labels.
//!
//! Beats are laid out foot-to-foot: inter-beat intervals are drawn i.i.d.
//! Gaussian (rejection-truncated to [0.3 s, 2.0 s]) and each beat is rendered
//! with a fixed morphology scaled by the nominal period, placed so that its
//! intersecting-tangents foot falls on the drawn foot time. Ground truth
//! records the drawn foot times (the rendered tangent foot agrees to within
//! a few microseconds) and the beat onsets, which are local minima of the
//! waveform.

mod rng;
mod template;
mod transfer;
mod waves;

pub use rng::{derive_seed, splitmix64, Prng};
pub use template::{beat_waveform, tangent_foot_offset, BeatTemplate, Lobe};
pub use transfer::{apply_sensor_transfer, Polarity, SensorTransfer};
pub use waves::{
    gait_wave, hold_envelope, occlusion_envelope, respiration_wave, EnvelopeSample, OcclusionConfig,
    HOLD_RAMP_SECONDS,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::signal::{Recording, SignalError, Site, Trace, DEFAULT_SAMPLE_RATE};
use template::BeatShape;

/// Physiological limits applied to drawn inter-beat intervals.
pub const IBI_MIN: f64 = 0.3;
pub const IBI_MAX: f64 = 2.0;

/// Sub-stream tags passed to [`derive_seed`].
const STREAM_IBI: u64 = 0;
const STREAM_CHEST: u64 = 1;
const STREAM_WRIST: u64 = 2;
const STREAM_ANKLE: u64 = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("invalid beat template: {0}")]
    InvalidTemplate(String),
    #[error("invalid scenario: {0}")]
    InvalidConfig(String),
    #[error("invalid window: {0}")]
    InvalidWindow(String),
    #[error(transparent)]
    Signal(#[from] SignalError),
}

/// Experiment parameters. Only `seed` is mandatory when deserializing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "defaults::duration")]
    pub duration: f64,
    #[serde(default = "defaults::sample_rate")]
    pub sample_rate: f64,
    /// Mean heart rate in beats per minute.
    #[serde(default = "defaults::heart_rate")]
    pub heart_rate_mean: f64,
    /// Standard deviation of the inter-beat interval, seconds.
    #[serde(default = "defaults::ibi_sd")]
    pub ibi_sd: f64,
    /// Breathing frequency, Hz.
    #[serde(default = "defaults::respiration_rate")]
    pub respiration_rate: f64,
    #[serde(default = "defaults::respiration_depth")]
    pub respiration_depth: f64,
    /// Step frequency, Hz; 0 when stationary.
    #[serde(default)]
    pub cadence: f64,
    #[serde(default = "defaults::cadence_depth")]
    pub cadence_depth: f64,
    #[serde(default)]
    pub breath_hold_windows: Vec<[f64; 2]>,
    #[serde(default)]
    pub occlusion: Option<OcclusionConfig>,
    /// Extra arrival delay of the ankle pulse relative to the wrist, seconds.
    #[serde(default = "defaults::inter_site_delay")]
    pub inter_site_delay: f64,
    /// Additive white noise on every channel, intensity units.
    #[serde(default)]
    pub noise_sd: f64,
    /// Fraction of the wrist pulse perturbation leaking into the chest channel.
    #[serde(default)]
    pub chest_pulse_leakage: f64,
    pub seed: u64,
}

mod defaults {
    pub fn duration() -> f64 {
        120.0
    }
    pub fn sample_rate() -> f64 {
        super::DEFAULT_SAMPLE_RATE
    }
    pub fn heart_rate() -> f64 {
        60.0 / 1.05
    }
    pub fn ibi_sd() -> f64 {
        0.0568
    }
    pub fn respiration_rate() -> f64 {
        0.25
    }
    pub fn respiration_depth() -> f64 {
        1.0
    }
    pub fn cadence_depth() -> f64 {
        0.3
    }
    pub fn inter_site_delay() -> f64 {
        0.092
    }
}

impl ScenarioConfig {
    /// Resting subject with default parameters.
    pub fn resting(seed: u64) -> Self {
        Self {
            duration: defaults::duration(),
            sample_rate: defaults::sample_rate(),
            heart_rate_mean: defaults::heart_rate(),
            ibi_sd: defaults::ibi_sd(),
            respiration_rate: defaults::respiration_rate(),
            respiration_depth: defaults::respiration_depth(),
            cadence: 0.0,
            cadence_depth: defaults::cadence_depth(),
            breath_hold_windows: Vec::new(),
            occlusion: None,
            inter_site_delay: defaults::inter_site_delay(),
            noise_sd: 0.0,
            chest_pulse_leakage: 0.0,
            seed,
        }
    }

    pub fn nominal_period(&self) -> f64 {
        60.0 / self.heart_rate_mean
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::InvalidConfig(m.to_owned()));
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return bad("duration must be positive");
        }
        if !(self.sample_rate > 0.0 && self.sample_rate.is_finite()) {
            return bad("sample_rate must be positive");
        }
        if !(self.heart_rate_mean > 0.0 && self.heart_rate_mean.is_finite()) {
            return bad("heart_rate_mean must be positive");
        }
        let period = self.nominal_period();
        if !(IBI_MIN..=IBI_MAX).contains(&period) {
            return bad("mean inter-beat interval must lie in [0.3 s, 2.0 s]");
        }
        if !(self.ibi_sd >= 0.0) {
            return bad("ibi_sd must be >= 0");
        }
        if !(self.respiration_rate >= 0.0 && self.cadence >= 0.0) {
            return bad("respiration_rate and cadence must be >= 0");
        }
        if !(self.noise_sd >= 0.0) {
            return bad("noise_sd must be >= 0");
        }
        if !(self.inter_site_delay >= 0.0 && self.inter_site_delay < IBI_MIN) {
            return bad("inter_site_delay must lie in [0, 0.3) s");
        }
        for &[t0, t1] in &self.breath_hold_windows {
            if !(0.0 <= t0 && t0 < t1 && t1 <= self.duration) {
                return Err(SynthError::InvalidWindow(format!(
                    "breath hold [{t0}, {t1}] outside [0, {}]",
                    self.duration
                )));
            }
        }
        if let Some(occ) = &self.occlusion {
            occ.validate(self.duration)?;
        }
        Ok(())
    }

    fn n_samples(&self) -> usize {
        (self.duration * self.sample_rate).round() as usize
    }
}

/// Which morphology a beat was rendered with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BeatKind {
    Normal,
    DiastolicSuppressed,
    ReleaseBurst,
}

/// Per-beat labels for one pulse channel. All vectors are parallel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelTruth {
    pub site: Site,
    pub foot_times: Vec<f64>,
    pub onset_times: Vec<f64>,
    pub kinds: Vec<BeatKind>,
    /// Cuff amplitude scale at each foot.
    pub amplitude_scales: Vec<f64>,
}

impl ChannelTruth {
    pub fn len(&self) -> usize {
        self.foot_times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.foot_times.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub channels: Vec<ChannelTruth>,
    /// Inter-beat intervals as drawn, one per generated beat.
    pub ibis: Vec<f64>,
    pub respiration_rate: f64,
    pub cadence: f64,
    pub inter_site_delay: f64,
    pub breath_hold_windows: Vec<[f64; 2]>,
    pub occlusion: Option<OcclusionConfig>,
    pub seed: u64,
}

impl GroundTruth {
    pub fn channel(&self, site: Site) -> Option<&ChannelTruth> {
        self.channels.iter().find(|c| c.site == site)
    }

    fn from_config(config: &ScenarioConfig, ibis: Vec<f64>, channels: Vec<ChannelTruth>) -> Self {
        Self {
            channels,
            ibis,
            respiration_rate: config.respiration_rate,
            cadence: config.cadence,
            inter_site_delay: config.inter_site_delay,
            breath_hold_windows: config.breath_hold_windows.clone(),
            occlusion: config.occlusion,
            seed: config.seed,
        }
    }
}

/// Draws foot times starting at 0 until `until` is passed.
fn draw_feet(config: &ScenarioConfig, until: f64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = Prng::new(derive_seed(config.seed, STREAM_IBI));
    let mean = config.nominal_period();
    let mut feet = vec![0.0];
    let mut ibis = Vec::new();
    while *feet.last().unwrap() <= until {
        let ibi = if config.ibi_sd == 0.0 {
            mean
        } else {
            loop {
                let x = rng.normal(mean, config.ibi_sd);
                if (IBI_MIN..=IBI_MAX).contains(&x) {
                    break x;
                }
            }
        };
        ibis.push(ibi);
        feet.push(feet.last().unwrap() + ibi);
    }
    (feet, ibis)
}

struct PlacedBeat {
    foot: f64,
    onset: f64,
    kind: BeatKind,
    template: BeatTemplate,
}

/// Renders one pulse channel whose feet sit at `targets + delay`.
fn render_pulse(
    config: &ScenarioConfig,
    template: &BeatTemplate,
    targets: &[f64],
    delay: f64,
    occlusion: Option<&OcclusionConfig>,
) -> (Vec<f64>, ChannelTruth) {
    let period = config.nominal_period();
    let fs = config.sample_rate;
    let n = config.n_samples();

    let variants = [
        (BeatKind::Normal, template.clone()),
        (BeatKind::DiastolicSuppressed, template.without_diastolic()),
        (BeatKind::ReleaseBurst, BeatTemplate::release_burst(template.site)),
    ];
    let nominal_offsets: Vec<f64> = variants
        .iter()
        .map(|(_, t)| tangent_foot_offset(t, period, period))
        .collect();

    let beats: Vec<PlacedBeat> = targets
        .iter()
        .map(|&f| {
            let foot = f + delay;
            let env = occlusion.map_or(EnvelopeSample::UNOCCLUDED, |o| o.at(foot, period));
            let idx = if env.release_burst {
                2
            } else if env.diastolic_suppressed {
                1
            } else {
                0
            };
            PlacedBeat {
                foot,
                onset: foot - nominal_offsets[idx],
                kind: variants[idx].0,
                template: variants[idx].1.clone(),
            }
        })
        .collect();

    let mut samples = vec![0.0; n];
    let mut truth = ChannelTruth {
        site: template.site,
        foot_times: Vec::new(),
        onset_times: Vec::new(),
        kinds: Vec::new(),
        amplitude_scales: Vec::new(),
    };
    let duration = n as f64 / fs;
    for pair in beats.windows(2) {
        let (beat, next) = (&pair[0], &pair[1]);
        let span = next.onset - beat.onset;
        let shape = BeatShape::new(&beat.template, period, span);
        let first = (beat.onset * fs).ceil().max(0.0) as usize;
        let last = ((next.onset * fs).ceil().max(0.0) as usize).min(n);
        for (i, s) in samples.iter_mut().enumerate().take(last).skip(first) {
            let t = i as f64 / fs;
            let scale = occlusion.map_or(1.0, |o| o.at(t, period).amplitude_scale);
            *s = scale * shape.value(t - beat.onset);
        }
        let foot = beat.foot;
        if (0.0..duration).contains(&foot) {
            truth.foot_times.push(foot);
            truth.onset_times.push(beat.onset);
            truth.kinds.push(beat.kind);
            truth
                .amplitude_scales
                .push(occlusion.map_or(1.0, |o| o.at(foot, period).amplitude_scale));
        }
    }
    (samples, truth)
}

/// A single pulse channel as perturbation (no sensor transfer or noise).
pub fn pulse_train(config: &ScenarioConfig, template: &BeatTemplate) -> Result<(Trace, GroundTruth), SynthError> {
    config.validate()?;
    template.validate()?;
    let (feet, ibis) = draw_feet(config, config.duration + 2.0 * IBI_MAX);
    let occlusion = config.occlusion.as_ref().filter(|_| template.site != Site::Ankle);
    let (samples, truth) = render_pulse(config, template, &feet, 0.0, occlusion);
    let trace = Trace::new(config.sample_rate, 0.0, samples, template.site)?;
    Ok((trace, GroundTruth::from_config(config, ibis, vec![truth])))
}

/// Templates used for the two pulse sites.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SiteTemplates {
    pub wrist: BeatTemplate,
    pub ankle: BeatTemplate,
}

impl Default for SiteTemplates {
    fn default() -> Self {
        Self {
            wrist: BeatTemplate::wrist(),
            ankle: BeatTemplate::ankle(),
        }
    }
}

/// Chest, wrist and ankle channels (in that order) plus ground truth.
///
/// The chest carries breathing and gait; the wrist and ankle share one beat
/// sequence, the ankle delayed by `inter_site_delay`. The cuff occlusion,
/// when configured, acts on the wrist only.
pub fn simulate_scenario(
    config: &ScenarioConfig,
    templates: &SiteTemplates,
    transfer: &SensorTransfer,
) -> Result<(Recording, GroundTruth), SynthError> {
    config.validate()?;
    templates.wrist.validate()?;
    templates.ankle.validate()?;
    transfer.validate()?;
    let fs = config.sample_rate;

    let (feet, ibis) = draw_feet(config, config.duration + 2.0 * IBI_MAX);
    let (wrist, wrist_truth) = render_pulse(config, &templates.wrist, &feet, 0.0, config.occlusion.as_ref());
    let (ankle, ankle_truth) = render_pulse(config, &templates.ankle, &feet, config.inter_site_delay, None);

    let breathing = respiration_wave(
        config.respiration_rate,
        config.respiration_depth,
        config.duration,
        &config.breath_hold_windows,
        fs,
    )?;
    let gait = gait_wave(config.cadence, config.cadence_depth, config.duration, fs);
    let chest: Vec<f64> = breathing
        .iter()
        .zip(&gait)
        .zip(&wrist)
        .map(|((b, g), p)| b + g + config.chest_pulse_leakage * p)
        .collect();

    let channel = |samples: Vec<f64>, site: Site, stream: u64| -> Result<Trace, SynthError> {
        let perturbation = Trace::new(fs, 0.0, samples, site)?;
        apply_sensor_transfer(&perturbation, transfer, config.noise_sd, derive_seed(config.seed, stream))
    };
    let channels = vec![
        channel(chest, Site::Chest, STREAM_CHEST)?,
        channel(wrist, Site::Wrist, STREAM_WRIST)?,
        channel(ankle, Site::Ankle, STREAM_ANKLE)?,
    ];
    let recording = Recording::new(channels, format!("scenario-seed-{}", config.seed))?;
    let truth = GroundTruth::from_config(config, ibis, vec![wrist_truth, ankle_truth]);
    Ok((recording, truth))
}
