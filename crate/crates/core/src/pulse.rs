//! Beat segmentation, fiducial points and inter-site pulse timing.
//!
//! Feet are found with the intersecting-tangents construction: the tangent
//! at the point of maximum upslope is extended back to the horizontal line
//! through the lowest point preceding the upstroke. Slopes and levels come
//! from a sliding least-squares cubic fit, which keeps the slope estimate
//! free of curvature bias while averaging out broadband noise.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::signal::{Site, Trace};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PulseError {
    #[error("no beats found in the trace")]
    NoBeatsFound,
    #[error("no foot in the second series lies within {window} s of a foot in the first")]
    NoMatchedPairs { window: f64 },
    #[error("fiducial order violated: {0}")]
    FiducialOrder(String),
    #[error("beat feet must be strictly increasing (index {0})")]
    UnorderedFeet(usize),
    #[error("invalid detector setting: {0}")]
    InvalidConfig(String),
}

/// Whether a trace was flipped so that beats point upward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Orientation {
    AsIs,
    Inverted,
}

/// Skewness magnitudes below this are treated as symmetric and never flipped.
pub const SKEWNESS_DEAD_BAND: f64 = 0.05;

/// Detector and fiducial parameters. Durations are in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorConfig {
    /// Half-width of the cubic fit used for the upslope.
    pub slope_half_width: f64,
    /// Candidate threshold as a fraction of the rolling slope envelope.
    pub envelope_fraction: f64,
    /// Length of the centred rolling envelope window.
    pub envelope_window: f64,
    /// Absolute threshold floor as a fraction of the median envelope.
    pub floor_fraction: f64,
    pub refractory: f64,
    /// How far before the upstroke the baseline minimum is sought.
    pub baseline_lookback: f64,
    /// Half-width of the smoothing fit used for fiducial levels.
    pub fiducial_half_width: f64,
    /// Minimum notch prominence as a fraction of systolic amplitude.
    pub notch_prominence: f64,
    /// Systolic search window as a fraction of the local inter-beat interval.
    pub systolic_fraction: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            slope_half_width: 0.08,
            envelope_fraction: 0.4,
            envelope_window: 5.0,
            floor_fraction: 0.25,
            refractory: 0.3,
            baseline_lookback: 0.5,
            fiducial_half_width: 0.03,
            notch_prominence: 0.02,
            systolic_fraction: 0.6,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<(), PulseError> {
        let positive = [
            ("slope_half_width", self.slope_half_width),
            ("envelope_window", self.envelope_window),
            ("refractory", self.refractory),
            ("baseline_lookback", self.baseline_lookback),
            ("fiducial_half_width", self.fiducial_half_width),
            ("systolic_fraction", self.systolic_fraction),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(PulseError::InvalidConfig(format!("{name} must be positive")));
            }
        }
        for (name, v) in [
            ("envelope_fraction", self.envelope_fraction),
            ("floor_fraction", self.floor_fraction),
            ("notch_prominence", self.notch_prominence),
        ] {
            if !(0.0..1.0).contains(&v) {
                return Err(PulseError::InvalidConfig(format!("{name} must lie in [0, 1)")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BeatAnnotation {
    foot_time: f64,
    systolic_time: f64,
    systolic_amp: f64,
    notch_time: Option<f64>,
    diastolic_time: Option<f64>,
    diastolic_amp: Option<f64>,
}

impl BeatAnnotation {
    /// Builds an annotation, enforcing `foot < systolic < notch <= diastolic`.
    /// Notch and diastolic peak are present together or not at all; `diastolic`
    /// is `(time, amplitude)`.
    pub fn new(
        foot_time: f64,
        systolic_time: f64,
        systolic_amp: f64,
        notch_time: Option<f64>,
        diastolic: Option<(f64, f64)>,
    ) -> Result<Self, PulseError> {
        let bad = |m: String| Err(PulseError::FiducialOrder(m));
        let finite = [foot_time, systolic_time, systolic_amp]
            .into_iter()
            .chain(notch_time)
            .chain(diastolic.map(|d| d.0))
            .chain(diastolic.map(|d| d.1))
            .all(f64::is_finite);
        if !finite {
            return bad("non-finite value".into());
        }
        if !(foot_time < systolic_time) {
            return bad(format!("foot {foot_time} not before systolic {systolic_time}"));
        }
        match (notch_time, diastolic) {
            (None, None) => {}
            (Some(n), Some((d, _))) => {
                if !(systolic_time < n && n <= d) {
                    return bad(format!("systolic {systolic_time}, notch {n}, diastolic {d}"));
                }
            }
            _ => return bad("notch and diastolic peak must be present together".into()),
        }
        Ok(Self {
            foot_time,
            systolic_time,
            systolic_amp,
            notch_time,
            diastolic_time: diastolic.map(|d| d.0),
            diastolic_amp: diastolic.map(|d| d.1),
        })
    }

    pub fn foot_time(&self) -> f64 {
        self.foot_time
    }

    pub fn systolic_time(&self) -> f64 {
        self.systolic_time
    }

    /// Systolic height above the beat's onset minimum.
    pub fn systolic_amp(&self) -> f64 {
        self.systolic_amp
    }

    pub fn notch_time(&self) -> Option<f64> {
        self.notch_time
    }

    pub fn diastolic_time(&self) -> Option<f64> {
        self.diastolic_time
    }

    /// Diastolic height above the beat's onset minimum.
    pub fn diastolic_amp(&self) -> Option<f64> {
        self.diastolic_amp
    }

    pub fn has_diastolic(&self) -> bool {
        self.diastolic_time.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BeatSeries {
    beats: Vec<BeatAnnotation>,
    source_site: Site,
    polarity_used: Orientation,
}

impl BeatSeries {
    pub fn new(beats: Vec<BeatAnnotation>, source_site: Site, polarity_used: Orientation) -> Result<Self, PulseError> {
        if let Some(i) = beats.windows(2).position(|w| w[1].foot_time <= w[0].foot_time) {
            return Err(PulseError::UnorderedFeet(i + 1));
        }
        Ok(Self {
            beats,
            source_site,
            polarity_used,
        })
    }

    pub fn beats(&self) -> &[BeatAnnotation] {
        &self.beats
    }

    pub fn source_site(&self) -> Site {
        self.source_site
    }

    pub fn polarity_used(&self) -> Orientation {
        self.polarity_used
    }

    pub fn len(&self) -> usize {
        self.beats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beats.is_empty()
    }

    pub fn foot_times(&self) -> Vec<f64> {
        self.beats.iter().map(|b| b.foot_time).collect()
    }

    /// Same series with the orientation flag replaced.
    pub fn with_polarity(mut self, polarity: Orientation) -> Self {
        self.polarity_used = polarity;
        self
    }
}

/// Sample skewness (population moments); 0 for a constant trace.
pub fn skewness(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    if x.is_empty() {
        return 0.0;
    }
    let mean = x.iter().sum::<f64>() / n;
    let (m2, m3) = x.iter().fold((0.0, 0.0), |(m2, m3), &v| {
        let d = v - mean;
        (m2 + d * d, m3 + d * d * d)
    });
    let (m2, m3) = (m2 / n, m3 / n);
    if m2 <= 0.0 {
        0.0
    } else {
        m3 / m2.powf(1.5)
    }
}

/// Flips the trace when its skewness is clearly negative so that beats are
/// upward deflections.
pub fn normalize_polarity(trace: &Trace) -> (Trace, Orientation) {
    if skewness(trace.samples()) < -SKEWNESS_DEAD_BAND {
        let flipped = trace.samples().iter().map(|v| -v).collect();
        (
            trace.with_samples(flipped).expect("negation preserves finiteness"),
            Orientation::Inverted,
        )
    } else {
        (trace.clone(), Orientation::AsIs)
    }
}

fn half_width_samples(seconds: f64, fs: f64) -> usize {
    ((seconds * fs).round() as usize).max(2)
}

/// Sliding least-squares cubic fit over `2h + 1` samples. Returns the fitted
/// level and first derivative (per second) at each centre. Samples within
/// `h` of either end get the raw value and zero slope.
fn local_cubic_fit(x: &[f64], h: usize, dt: f64) -> (Vec<f64>, Vec<f64>) {
    let n = x.len();
    let moment = |p: i32| -> f64 { (1..=h).map(|k| 2.0 * (k as f64).powi(p)).sum() };
    let (m0, s2, s4, s6) = ((2 * h + 1) as f64, moment(2), moment(4), moment(6));
    // level: even part fitted by 1, k^2; slope: odd part fitted by k, k^3
    let even_det = m0 * s4 - s2 * s2;
    let odd_det = s2 * s6 - s4 * s4;
    let w_level: Vec<f64> = (0..=h)
        .map(|k| {
            let k2 = (k * k) as f64;
            (s4 - s2 * k2) / even_det
        })
        .collect();
    let w_slope: Vec<f64> = (0..=h)
        .map(|k| {
            let k = k as f64;
            (s6 * k - s4 * k * k * k) / odd_det / dt
        })
        .collect();

    let mut level = x.to_vec();
    let mut slope = vec![0.0; n];
    if n <= 2 * h {
        return (level, slope);
    }
    for i in h..n - h {
        let mut lv = w_level[0] * x[i];
        let mut sl = 0.0;
        for k in 1..=h {
            // pairwise sums keep the slope of a constant exactly zero
            lv += w_level[k] * (x[i + k] + x[i - k]);
            sl += w_slope[k] * (x[i + k] - x[i - k]);
        }
        level[i] = lv;
        slope[i] = sl;
    }
    (level, slope)
}

/// Maximum of `v` over the centred window `[i - half, i + half]`.
fn sliding_max(v: &[f64], half: usize) -> Vec<f64> {
    use std::collections::VecDeque;
    let n = v.len();
    let mut out = Vec::with_capacity(n);
    let mut dq: VecDeque<usize> = VecDeque::new();
    let mut next = 0;
    for i in 0..n {
        let hi = (i + half).min(n - 1);
        while next <= hi {
            while dq.back().is_some_and(|&b| v[b] <= v[next]) {
                dq.pop_back();
            }
            dq.push_back(next);
            next += 1;
        }
        while dq.front().is_some_and(|&f| f + half < i) {
            dq.pop_front();
        }
        out.push(v[*dq.front().expect("window is never empty")]);
    }
    out
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Vertex offset in `[-0.5, 0.5]` and value of the parabola through three
/// equally spaced points.
fn parabolic_vertex(l: f64, c: f64, r: f64) -> (f64, f64) {
    let denom = l - 2.0 * c + r;
    if denom >= 0.0 {
        return (0.0, c);
    }
    let off = (0.5 * (l - r) / denom).clamp(-0.5, 0.5);
    (off, c - 0.25 * (l - r) * off)
}

fn interpolate(v: &[f64], pos: f64) -> f64 {
    let i = (pos.floor() as usize).min(v.len() - 1);
    let frac = pos - i as f64;
    if i + 1 < v.len() {
        v[i] + frac * (v[i + 1] - v[i])
    } else {
        v[i]
    }
}

/// Foot times with default detector settings.
pub fn detect_feet(trace: &Trace) -> Result<Vec<f64>, PulseError> {
    detect_feet_with(trace, &DetectorConfig::default())
}

/// Foot times of a band-passed, upward-oriented pulse trace.
///
/// Upslope maxima above both `envelope_fraction` of the centred rolling
/// maximum slope and `floor_fraction` of its median are beat candidates;
/// within the refractory period only the steeper survives. A beat whose
/// baseline minimum sits on the start of the usable trace is dropped because
/// its baseline is unobserved.
pub fn detect_feet_with(trace: &Trace, cfg: &DetectorConfig) -> Result<Vec<f64>, PulseError> {
    cfg.validate()?;
    let fs = trace.sample_rate();
    let dt = trace.dt();
    let x = trace.samples();
    let h = half_width_samples(cfg.slope_half_width, fs);
    let n = x.len();
    if n <= 2 * h + 2 {
        return Err(PulseError::NoBeatsFound);
    }
    let (level, slope) = local_cubic_fit(x, h, dt);

    let rising: Vec<f64> = slope.iter().map(|&d| d.max(0.0)).collect();
    let envelope = sliding_max(&rising, (0.5 * cfg.envelope_window * fs).round() as usize);
    let floor = cfg.floor_fraction * median(&mut envelope[h..n - h].to_vec());
    if !(floor > 0.0) && cfg.floor_fraction > 0.0 {
        return Err(PulseError::NoBeatsFound);
    }

    let refractory = (cfg.refractory * fs).round() as usize;
    let mut kept: Vec<usize> = Vec::new();
    for i in h + 1..n - h - 1 {
        let d = slope[i];
        let is_peak = d > slope[i - 1] && d >= slope[i + 1];
        if !is_peak || d <= 0.0 || d < cfg.envelope_fraction * envelope[i] || d < floor {
            continue;
        }
        match kept.last_mut() {
            Some(last) if i - *last < refractory => {
                if d > slope[*last] {
                    *last = i;
                }
            }
            _ => kept.push(i),
        }
    }

    let lookback = (cfg.baseline_lookback * fs).round() as usize;
    let mut feet = Vec::with_capacity(kept.len());
    let mut prev_upstroke: Option<usize> = None;
    for &u in &kept {
        let wanted = u.saturating_sub(lookback);
        let lo = wanted.max(h).max(prev_upstroke.unwrap_or(0));
        prev_upstroke = Some(u);
        let base = (lo..=u)
            .min_by(|&a, &b| level[a].total_cmp(&level[b]))
            .expect("window holds the upstroke");
        if base == h && wanted < h {
            continue;
        }
        let (off, d_u) = parabolic_vertex(slope[u - 1], slope[u], slope[u + 1]);
        let pos_u = u as f64 + off;
        let y_u = interpolate(&level, pos_u);
        let rise = (y_u - level[base]) / (d_u * dt);
        let pos = (pos_u - rise).clamp(base as f64, pos_u);
        feet.push(trace.start_time() + pos * dt);
    }
    if feet.is_empty() {
        return Err(PulseError::NoBeatsFound);
    }
    Ok(feet)
}

/// Fiducial points with default settings.
pub fn locate_fiducials(trace: &Trace, foot_times: &[f64]) -> Result<BeatSeries, PulseError> {
    locate_fiducials_with(trace, foot_times, &DetectorConfig::default())
}

/// Systolic peak, dicrotic notch and diastolic peak for each foot.
///
/// The systolic peak is the maximum between the foot and `systolic_fraction`
/// of the local inter-beat interval. The beat ends at the lowest point
/// between the systolic peak and the next foot. The notch is the interior
/// local minimum of largest prominence and the diastolic peak the maximum
/// after it; both are reported only when the notch prominence reaches
/// `notch_prominence` of the systolic amplitude. A beat followed by a gap
/// longer than 1.5 typical intervals uses the typical interval instead. Feet
/// whose systolic window is empty are skipped.
pub fn locate_fiducials_with(trace: &Trace, foot_times: &[f64], cfg: &DetectorConfig) -> Result<BeatSeries, PulseError> {
    cfg.validate()?;
    if foot_times.is_empty() {
        return Err(PulseError::NoBeatsFound);
    }
    if let Some(i) = foot_times.windows(2).position(|w| w[1] <= w[0]) {
        return Err(PulseError::UnorderedFeet(i + 1));
    }
    let fs = trace.sample_rate();
    let n = trace.len();
    let h = half_width_samples(cfg.fiducial_half_width, fs);
    let (level, _) = local_cubic_fit(trace.samples(), h, trace.dt());
    let time = |i: f64| trace.start_time() + i / fs;
    let index = |t: f64| trace.position_of(t);
    let last = (n - 1) as f64;

    let mut gaps: Vec<f64> = foot_times.windows(2).map(|w| w[1] - w[0]).collect();
    let typical_ibi = if gaps.is_empty() { 1.0 } else { median(&mut gaps) };

    let mut beats = Vec::with_capacity(foot_times.len());
    for (k, &foot) in foot_times.iter().enumerate() {
        // a long gap means missed beats; do not let the window run across it
        let ibi = foot_times
            .get(k + 1)
            .map(|next| next - foot)
            .filter(|&gap| gap <= 1.5 * typical_ibi)
            .unwrap_or(typical_ibi);
        let foot_pos = index(foot);
        if foot_pos < 0.0 || foot_pos > last {
            continue;
        }
        let i0 = foot_pos.floor() as usize + 1;
        let i1 = index(foot + cfg.systolic_fraction * ibi).floor().min(last) as usize;
        if i0 > i1 {
            continue;
        }
        let sys = (i0..=i1).max_by(|&a, &b| level[a].total_cmp(&level[b])).unwrap();
        let (sys_pos, sys_level) = if sys > i0 && sys < i1 {
            let (off, v) = parabolic_vertex(level[sys - 1], level[sys], level[sys + 1]);
            (sys as f64 + off, v)
        } else {
            (sys as f64, level[sys])
        };

        let b0 = index(foot - cfg.baseline_lookback.min(0.5 * ibi)).max(0.0).ceil() as usize;
        let b1 = (foot_pos.floor() as usize).max(b0);
        let baseline = level[b0..=b1].iter().cloned().fold(f64::INFINITY, f64::min);
        let systolic_amp = sys_level - baseline;

        let end_limit = index(foot + ibi).floor().min(last) as usize;
        let end = (sys..=end_limit.max(sys))
            .min_by(|&a, &b| level[a].total_cmp(&level[b]))
            .unwrap();
        let notch = (sys + 1..end)
            .filter(|&m| level[m] < level[m - 1] && level[m] <= level[m + 1])
            .map(|m| {
                let left = level[sys..=m].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let right = level[m..=end].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                (m, left.min(right) - level[m])
            })
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .filter(|&(_, prom)| systolic_amp > 0.0 && prom >= cfg.notch_prominence * systolic_amp);

        let systolic_time = time(sys_pos);
        let with_notch = notch.and_then(|(m, _)| {
            let d = (m + 1..=end).max_by(|&a, &b| level[a].total_cmp(&level[b]))?;
            BeatAnnotation::new(
                foot,
                systolic_time,
                systolic_amp,
                Some(time(m as f64)),
                Some((time(d as f64), level[d] - baseline)),
            )
            .ok()
        });
        match with_notch {
            Some(b) => beats.push(b),
            None => {
                if let Ok(b) = BeatAnnotation::new(foot, systolic_time, systolic_amp, None, None) {
                    beats.push(b);
                }
            }
        }
    }
    if beats.is_empty() {
        return Err(PulseError::NoBeatsFound);
    }
    BeatSeries::new(beats, trace.site(), Orientation::AsIs)
}

/// Polarity normalisation, foot detection and fiducials in one call.
pub fn annotate(trace: &Trace, cfg: &DetectorConfig) -> Result<BeatSeries, PulseError> {
    let (oriented, polarity) = normalize_polarity(trace);
    let feet = detect_feet_with(&oriented, cfg)?;
    Ok(locate_fiducials_with(&oriented, &feet, cfg)?.with_polarity(polarity))
}

/// Median foot-to-foot delay from series A to series B.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseTimeDifference {
    pub delta_t: f64,
    pub n_pairs: usize,
    /// Median absolute deviation of the paired delays.
    pub dispersion: f64,
}

/// Maximum separation for pairing feet across sites, seconds.
pub const PAIRING_WINDOW: f64 = 0.5;

/// Pairs every foot in `a` with the nearest foot in `b`, on either side,
/// within [`PAIRING_WINDOW`], and summarises `foot_b - foot_a`.
pub fn pulse_time_difference(a: &BeatSeries, b: &BeatSeries) -> Result<PulseTimeDifference, PulseError> {
    foot_time_difference(&a.foot_times(), &b.foot_times())
}

/// [`pulse_time_difference`] on bare, strictly increasing foot times.
pub fn foot_time_difference(a: &[f64], b: &[f64]) -> Result<PulseTimeDifference, PulseError> {
    let mut deltas: Vec<f64> = a
        .iter()
        .filter_map(|&fa| {
            let j = b.partition_point(|&fb| fb < fa);
            let candidates = [j.checked_sub(1), Some(j)];
            candidates
                .into_iter()
                .flatten()
                .filter_map(|k| b.get(k))
                .map(|&fb| fb - fa)
                .min_by(|x, y| x.abs().total_cmp(&y.abs()))
                .filter(|d| d.abs() <= PAIRING_WINDOW)
        })
        .collect();
    if deltas.is_empty() {
        return Err(PulseError::NoMatchedPairs { window: PAIRING_WINDOW });
    }
    let delta_t = median(&mut deltas);
    let mut dev: Vec<f64> = deltas.iter().map(|d| (d - delta_t).abs()).collect();
    Ok(PulseTimeDifference {
        delta_t,
        n_pairs: deltas.len(),
        dispersion: median(&mut dev),
    })
}

/// Lag of `b` relative to `a` (positive when `b` arrives later) maximising
/// the normalised cross-correlation within `max_lag` seconds, refined by a
/// parabola. A diagnostic alongside the foot-based estimate.
pub fn cross_correlation_delay(a: &Trace, b: &Trace, max_lag: f64) -> Option<f64> {
    if a.sample_rate() != b.sample_rate() || a.is_empty() || b.is_empty() {
        return None;
    }
    let fs = a.sample_rate();
    let offset = ((b.start_time() - a.start_time()) * fs).round() as i64;
    let demean = |x: &[f64]| {
        let m = x.iter().sum::<f64>() / x.len() as f64;
        x.iter().map(|v| v - m).collect::<Vec<_>>()
    };
    let (xa, xb) = (demean(a.samples()), demean(b.samples()));
    let max_k = (max_lag * fs).round() as i64;
    let corr = |lag: i64| -> f64 {
        // b sample j sits at a index j + offset; compare a[i] with b at a index i + lag
        let (mut s, mut c) = (0.0, 0usize);
        for (i, &va) in xa.iter().enumerate() {
            let j = i as i64 + lag - offset;
            if j >= 0 && (j as usize) < xb.len() {
                s += va * xb[j as usize];
                c += 1;
            }
        }
        if c == 0 {
            f64::NEG_INFINITY
        } else {
            s / c as f64
        }
    };
    let values: Vec<f64> = (-max_k..=max_k).map(corr).collect();
    let best = (0..values.len()).max_by(|&i, &j| values[i].total_cmp(&values[j]))?;
    if !values[best].is_finite() {
        return None;
    }
    let off = if best > 0 && best + 1 < values.len() {
        parabolic_vertex(values[best - 1], values[best], values[best + 1]).0
    } else {
        0.0
    };
    Some((best as f64 - max_k as f64 + off) / fs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::{bandpass, FilterSpec};
    use crate::synth::{
        apply_sensor_transfer, pulse_train, simulate_scenario, BeatKind, BeatTemplate, Lobe, OcclusionConfig,
        ScenarioConfig, SensorTransfer, SiteTemplates,
    };
    use proptest::prelude::*;

    const FS: f64 = 250.0;

    fn measured(perturbation: &Trace, noise_sd: f64, seed: u64) -> Trace {
        let raw = apply_sensor_transfer(perturbation, &SensorTransfer::default(), noise_sd, seed).unwrap();
        bandpass(&raw, &FilterSpec::default()).unwrap()
    }

    fn oriented(perturbation: &Trace, noise_sd: f64, seed: u64) -> Trace {
        normalize_polarity(&measured(perturbation, noise_sd, seed)).0
    }

    /// Fraction of truth feet (away from the ends) with a detection within `tol`.
    fn matched_fraction(truth: &[f64], found: &[f64], tol: f64, t_end: f64) -> (usize, usize) {
        let inner: Vec<f64> = truth.iter().cloned().filter(|&t| t > 1.0 && t < t_end - 1.0).collect();
        let hits = inner
            .iter()
            .filter(|&&t| found.iter().any(|&f| (f - t).abs() <= tol))
            .count();
        (hits, inner.len())
    }

    fn resting_train(seconds: f64, seed: u64) -> (Trace, Vec<f64>) {
        let cfg = ScenarioConfig {
            duration: seconds,
            heart_rate_mean: 57.1,
            ..ScenarioConfig::resting(seed)
        };
        let (trace, truth) = pulse_train(&cfg, &BeatTemplate::wrist()).unwrap();
        (trace, truth.channels[0].foot_times.clone())
    }

    #[test]
    fn polarity_cases() {
        let (p, _) = resting_train(30.0, 1);
        let (same, o) = normalize_polarity(&p);
        assert_eq!(o, Orientation::AsIs);
        assert_eq!(same, p);

        let neg = p.with_samples(p.samples().iter().map(|v| -v).collect()).unwrap();
        let (back, o) = normalize_polarity(&neg);
        assert_eq!(o, Orientation::Inverted);
        assert_eq!(back, p);

        let sine = p.with_samples((0..p.len()).map(|i| (i as f64 * 0.05).sin()).collect()).unwrap();
        assert_eq!(normalize_polarity(&sine).1, Orientation::AsIs);
    }

    #[test]
    fn sensor_dips_are_flipped() {
        let (p, _) = resting_train(30.0, 2);
        assert_eq!(normalize_polarity(&measured(&p, 0.0, 0)).1, Orientation::Inverted);
    }

    #[test]
    fn clean_minute_at_rest() {
        let (p, truth) = resting_train(60.0, 7);
        let feet = detect_feet(&oriented(&p, 0.0, 0)).unwrap();
        assert!((feet.len() as i64 - 57).abs() <= 1, "{} feet", feet.len());
        for f in &feet {
            let err = truth.iter().map(|t| (t - f).abs()).fold(f64::INFINITY, f64::min);
            assert!(err <= 0.010, "foot {f} is {err} s from truth");
        }
    }

    #[test]
    fn constant_signal_has_no_beats() {
        let t = Trace::new(FS, 0.0, vec![1.0; 5000], Site::Wrist).unwrap();
        assert_eq!(detect_feet(&t), Err(PulseError::NoBeatsFound));
        let z = Trace::new(FS, 0.0, vec![0.0; 5000], Site::Wrist).unwrap();
        assert_eq!(detect_feet(&z), Err(PulseError::NoBeatsFound));
    }

    #[test]
    fn noisy_feet_within_20ms() {
        let (p, truth) = resting_train(120.0, 11);
        // noise at 5% of the systolic intensity swing (gain 0.1)
        let feet = detect_feet(&oriented(&p, 0.005, 99)).unwrap();
        let (hits, total) = matched_fraction(&truth, &feet, 0.020, 120.0);
        assert!(hits as f64 >= 0.99 * total as f64, "{hits}/{total}");
        assert!(feet.len() <= total + 3, "{} detections for {total} beats", feet.len());
    }

    #[test]
    fn shift_equivariance_by_padding() {
        let (p, _) = resting_train(40.0, 5);
        let x = oriented(&p, 0.002, 3);
        let k = 137;
        let mut padded = vec![0.0; k];
        padded.extend_from_slice(x.samples());
        let y = x.with_samples(padded).unwrap();
        let a = detect_feet(&x).unwrap();
        let b = detect_feet(&y).unwrap();
        let shift = k as f64 / FS;
        let inner_a: Vec<f64> = a.iter().cloned().filter(|&t| t > 8.0 && t < 30.0).collect();
        let inner_b: Vec<f64> = b.iter().map(|t| t - shift).filter(|&t| t > 8.0 && t < 30.0).collect();
        assert_eq!(inner_a.len(), inner_b.len());
        for (u, v) in inner_a.iter().zip(&inner_b) {
            assert!((u - v).abs() < 1e-9, "{u} vs {v}");
        }
    }

    #[test]
    fn start_time_shift() {
        let (p, _) = resting_train(30.0, 8);
        let x = oriented(&p, 0.0, 0);
        let a = detect_feet(&x).unwrap();
        let b = detect_feet(&x.clone().with_start_time(12.5)).unwrap();
        assert_eq!(a.len(), b.len());
        assert!(a.iter().zip(&b).all(|(u, v)| (v - u - 12.5).abs() < 1e-9));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]
        #[test]
        fn affine_invariance(scale in 0.01f64..100.0, offset in -50.0f64..50.0, seed in 0u64..1000) {
            let (p, _) = resting_train(20.0, seed);
            let x = oriented(&p, 0.001, seed);
            let y = x.with_samples(x.samples().iter().map(|v| scale * v + offset).collect()).unwrap();
            let a = detect_feet(&x).unwrap();
            let b = detect_feet(&y).unwrap();
            prop_assert_eq!(a.len(), b.len());
            for (u, v) in a.iter().zip(&b) {
                prop_assert!((u - v).abs() < 1e-9);
            }
        }

        #[test]
        fn time_difference_antisymmetric(
            base in prop::collection::vec(0.35f64..1.8, 3..40),
            shift in -0.3f64..0.3,
        ) {
            let mut a = vec![0.0];
            for d in &base {
                a.push(a.last().unwrap() + d);
            }
            let b: Vec<f64> = a.iter().map(|t| t + shift).collect();
            let ab = foot_time_difference(&a, &b).unwrap();
            let ba = foot_time_difference(&b, &a).unwrap();
            prop_assert_eq!(ab.delta_t, -ba.delta_t);
            prop_assert!((ab.delta_t - shift).abs() < 1e-9);
        }
    }

    #[test]
    fn annotation_order_is_enforced() {
        assert!(BeatAnnotation::new(1.0, 1.2, 1.0, Some(1.4), Some((1.5, 0.4))).is_ok());
        assert!(BeatAnnotation::new(1.0, 1.2, 1.0, Some(1.5), Some((1.5, 0.4))).is_ok());
        assert!(BeatAnnotation::new(1.2, 1.2, 1.0, None, None).is_err());
        assert!(BeatAnnotation::new(1.0, 1.2, 1.0, Some(1.1), Some((1.5, 0.4))).is_err());
        assert!(BeatAnnotation::new(1.0, 1.2, 1.0, Some(1.6), Some((1.5, 0.4))).is_err());
        assert!(BeatAnnotation::new(1.0, 1.2, 1.0, Some(1.4), None).is_err());
        assert!(BeatAnnotation::new(1.0, 1.2, f64::NAN, None, None).is_err());
        let b = BeatAnnotation::new(1.0, 1.2, 1.0, None, None).unwrap();
        assert!(BeatSeries::new(vec![b, b], Site::Wrist, Orientation::AsIs).is_err());
    }

    fn check_order(series: &BeatSeries) {
        for b in series.beats() {
            assert!(b.foot_time() < b.systolic_time());
            if let (Some(n), Some(d)) = (b.notch_time(), b.diastolic_time()) {
                assert!(b.systolic_time() < n && n <= d);
            }
        }
    }

    #[test]
    fn wrist_beats_have_all_fiducials() {
        let (p, _) = resting_train(60.0, 21);
        let x = oriented(&p, 0.0, 0);
        let series = locate_fiducials(&x, &detect_feet(&x).unwrap()).unwrap();
        check_order(&series);
        let inner: Vec<_> = series.beats()[..series.len() - 1].to_vec();
        assert!(inner.iter().all(|b| b.has_diastolic()));
        let b = inner[10];
        assert!(b.diastolic_amp().unwrap() < b.systolic_amp());
        // systolic sits about a quarter period after the onset, i.e. past the foot
        let ibi = 60.0 / 57.1;
        let onset_to_sys = 0.25 * ibi;
        let lag = b.systolic_time() - b.foot_time();
        assert!(lag > 0.0 && lag < onset_to_sys, "{lag}");
    }

    #[test]
    fn single_lobe_has_systolic_only() {
        let cfg = ScenarioConfig {
            duration: 30.0,
            ..ScenarioConfig::resting(4)
        };
        let t = BeatTemplate::single_lobe(Site::Wrist, Lobe::new(0.25, 1.0, 0.08));
        let (p, _) = pulse_train(&cfg, &t).unwrap();
        let x = oriented(&p, 0.0, 0);
        let series = locate_fiducials(&x, &detect_feet(&x).unwrap()).unwrap();
        assert!(series.len() > 20);
        check_order(&series);
        assert!(series.beats().iter().all(|b| !b.has_diastolic()));
    }

    #[test]
    fn occlusion_removes_diastolic() {
        let cfg = ScenarioConfig {
            duration: 90.0,
            occlusion: Some(OcclusionConfig::new(30.0, 50.0, 62.0)),
            noise_sd: 0.0002,
            ..ScenarioConfig::resting(31)
        };
        let (rec, truth) = simulate_scenario(&cfg, &SiteTemplates::default(), &SensorTransfer::default()).unwrap();
        let wrist = bandpass(rec.channel(Site::Wrist).unwrap(), &FilterSpec::default()).unwrap();
        let series = annotate(&wrist, &DetectorConfig::default()).unwrap();
        assert_eq!(series.polarity_used(), Orientation::Inverted);
        check_order(&series);
        let wt = truth.channel(Site::Wrist).unwrap();
        let lookup = |t: f64| {
            let k = (0..wt.len())
                .min_by(|&a, &b| (wt.foot_times[a] - t).abs().total_cmp(&(wt.foot_times[b] - t).abs()))
                .unwrap();
            ((wt.foot_times[k] - t).abs() < 0.05).then_some(k)
        };
        let (mut suppressed, mut normal) = (0, 0);
        for b in series.beats() {
            let Some(k) = lookup(b.foot_time()) else { continue };
            match wt.kinds[k] {
                BeatKind::DiastolicSuppressed if wt.amplitude_scales[k] >= 0.2 => {
                    assert!(!b.has_diastolic(), "beat at {} kept a diastolic peak", b.foot_time());
                    suppressed += 1;
                }
                BeatKind::Normal if b.foot_time() > 2.0 && b.foot_time() < 29.0 => {
                    assert!(b.has_diastolic(), "beat at {} lost its diastolic peak", b.foot_time());
                    normal += 1;
                }
                _ => {}
            }
        }
        assert!(suppressed >= 3 && normal >= 20, "{suppressed} suppressed, {normal} normal");
    }

    #[test]
    fn ankle_delay_recovered() {
        let cfg = ScenarioConfig {
            duration: 120.0,
            ..ScenarioConfig::resting(41)
        };
        let (rec, _) = simulate_scenario(&cfg, &SiteTemplates::default(), &SensorTransfer::default()).unwrap();
        let det = DetectorConfig::default();
        let prep = |s| bandpass(rec.channel(s).unwrap(), &FilterSpec::default()).unwrap();
        let w = annotate(&prep(Site::Wrist), &det).unwrap();
        let a = annotate(&prep(Site::Ankle), &det).unwrap();
        let d = pulse_time_difference(&w, &a).unwrap();
        assert!((d.delta_t - 0.092).abs() <= 1.0 / FS, "{d:?}");
        assert!(d.n_pairs >= 100);
        let same = pulse_time_difference(&w, &w).unwrap();
        assert_eq!(same.delta_t, 0.0);
        let xc = cross_correlation_delay(&prep(Site::Wrist), &prep(Site::Ankle), 0.3).unwrap();
        assert!(xc > 0.0 && xc < 0.2, "{xc}");
    }

    #[test]
    fn noisy_ankle_delay_within_8ms() {
        let cfg = ScenarioConfig {
            duration: 120.0,
            noise_sd: 0.005,
            ..ScenarioConfig::resting(43)
        };
        let (rec, _) = simulate_scenario(&cfg, &SiteTemplates::default(), &SensorTransfer::default()).unwrap();
        let prep = |s| bandpass(rec.channel(s).unwrap(), &FilterSpec::default()).unwrap();
        let det = DetectorConfig::default();
        let d = pulse_time_difference(&annotate(&prep(Site::Wrist), &det).unwrap(), &annotate(&prep(Site::Ankle), &det).unwrap())
            .unwrap();
        assert!((d.delta_t - 0.092).abs() <= 0.008, "{d:?}");
    }

    #[test]
    fn unmatched_series() {
        assert_eq!(
            foot_time_difference(&[1.0, 2.0], &[10.0, 11.0]),
            Err(PulseError::NoMatchedPairs { window: PAIRING_WINDOW })
        );
    }

    #[test]
    fn sliding_max_matches_brute_force() {
        let v: Vec<f64> = (0..200).map(|i| ((i * 37) % 23) as f64).collect();
        let fast = sliding_max(&v, 7);
        for i in 0..v.len() {
            let lo = i.saturating_sub(7);
            let hi = (i + 7).min(v.len() - 1);
            let brute = v[lo..=hi].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            assert_eq!(fast[i], brute);
        }
    }

    #[test]
    fn cubic_fit_is_exact_on_cubics() {
        let dt = 1.0 / FS;
        let f = |t: f64| 0.3 - 2.0 * t + 5.0 * t * t - 7.0 * t * t * t;
        let df = |t: f64| -2.0 + 10.0 * t - 21.0 * t * t;
        let x: Vec<f64> = (0..100).map(|i| f(i as f64 * dt)).collect();
        let (level, slope) = local_cubic_fit(&x, 10, dt);
        for i in 10..90 {
            let t = i as f64 * dt;
            assert!((level[i] - f(t)).abs() < 1e-9);
            assert!((slope[i] - df(t)).abs() < 1e-7);
        }
    }
}
