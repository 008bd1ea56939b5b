//! Beat morphology as a sum of Gaussian lobes.
//!
//! A lobe is placed at `center_frac * P` with standard deviation
//! `width_frac * P`, where `P` is the shape period. A rendered beat spanning
//! `[0, T)` has a raised-cosine baseline subtracted that runs from the lobe
//! sum at `0` to the lobe sum at `T` with zero slope at both ends, so
//! consecutive beats join continuously at zero and every beat onset is a
//! local minimum.

use serde::{Deserialize, Serialize};

use super::SynthError;
use crate::signal::Site;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lobe {
    pub center_frac: f64,
    pub amplitude: f64,
    pub width_frac: f64,
}

impl Lobe {
    pub const fn new(center_frac: f64, amplitude: f64, width_frac: f64) -> Self {
        Self {
            center_frac,
            amplitude,
            width_frac,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeatTemplate {
    pub site: Site,
    pub lobes: Vec<Lobe>,
    /// Index of the systolic lobe.
    pub systolic: usize,
    /// Index of the diastolic lobe, if the morphology has one.
    pub diastolic: Option<usize>,
}

impl BeatTemplate {
    pub fn wrist() -> Self {
        Self {
            site: Site::Wrist,
            lobes: vec![Lobe::new(0.25, 1.0, 0.08), Lobe::new(0.55, 0.45, 0.12)],
            systolic: 0,
            diastolic: Some(1),
        }
    }

    pub fn ankle() -> Self {
        Self {
            site: Site::Ankle,
            lobes: vec![Lobe::new(0.22, 1.0, 0.07), Lobe::new(0.60, 0.25, 0.12)],
            systolic: 0,
            diastolic: Some(1),
        }
    }

    /// Narrow high-amplitude beat used for the cuff-release transient.
    pub fn release_burst(site: Site) -> Self {
        Self::single_lobe(site, Lobe::new(0.22, 1.3, 0.07))
    }

    pub fn single_lobe(site: Site, lobe: Lobe) -> Self {
        Self {
            site,
            lobes: vec![lobe],
            systolic: 0,
            diastolic: None,
        }
    }

    pub fn for_site(site: Site) -> Self {
        match site {
            Site::Ankle => Self::ankle(),
            _ => Self {
                site,
                ..Self::wrist()
            },
        }
    }

    /// Same beat with the diastolic lobe removed.
    pub fn without_diastolic(&self) -> Self {
        let Some(d) = self.diastolic else {
            return self.clone();
        };
        let mut lobes = self.lobes.clone();
        lobes.remove(d);
        Self {
            site: self.site,
            lobes,
            systolic: if self.systolic > d { self.systolic - 1 } else { self.systolic },
            diastolic: None,
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |msg: String| Err(SynthError::InvalidTemplate(msg));
        if self.lobes.is_empty() || self.lobes.len() > 3 {
            return bad(format!("expected 1 to 3 lobes, got {}", self.lobes.len()));
        }
        for (i, l) in self.lobes.iter().enumerate() {
            if !(0.0..1.0).contains(&l.center_frac) {
                return bad(format!("lobe {i} centre {} outside [0, 1)", l.center_frac));
            }
            if !(l.amplitude > 0.0 && l.amplitude.is_finite()) {
                return bad(format!("lobe {i} amplitude must be positive"));
            }
            if !(l.width_frac > 0.0 && l.width_frac.is_finite()) {
                return bad(format!("lobe {i} width must be positive"));
            }
        }
        if self.lobes.windows(2).any(|w| w[1].center_frac <= w[0].center_frac) {
            return bad("lobe centres must be strictly increasing".into());
        }
        if self.systolic >= self.lobes.len() {
            return bad("systolic index out of range".into());
        }
        if let Some(d) = self.diastolic {
            if d >= self.lobes.len() || d <= self.systolic {
                return bad("diastolic lobe must exist and follow the systolic lobe".into());
            }
        }
        Ok(())
    }

    pub fn systolic_lobe(&self) -> &Lobe {
        &self.lobes[self.systolic]
    }
}

/// A template bound to a shape period and a beat span.
#[derive(Debug, Clone, Copy)]
pub(crate) struct BeatShape<'a> {
    lobes: &'a [Lobe],
    shape_period: f64,
    span: f64,
    base_end: f64,
    base_drop: f64,
}

impl<'a> BeatShape<'a> {
    pub(crate) fn new(template: &'a BeatTemplate, shape_period: f64, span: f64) -> Self {
        let mut s = Self {
            lobes: &template.lobes,
            shape_period,
            span,
            base_end: 0.0,
            base_drop: 0.0,
        };
        let (g0, g1) = (s.lobe_sum(0.0).0, s.lobe_sum(span).0);
        s.base_end = g1;
        s.base_drop = g0 - g1;
        s
    }

    /// Baseline and its first two derivatives.
    fn baseline(&self, tau: f64) -> (f64, f64, f64) {
        let w = std::f64::consts::PI / self.span;
        let (sin, cos) = (w * tau).sin_cos();
        let half = 0.5 * self.base_drop;
        (
            self.base_end + half * (1.0 + cos),
            -half * w * sin,
            -half * w * w * cos,
        )
    }

    /// Lobe sum and its first two derivatives at `tau` seconds after onset.
    fn lobe_sum(&self, tau: f64) -> (f64, f64, f64) {
        self.lobes.iter().fold((0.0, 0.0, 0.0), |(v, d1, d2), l| {
            let mu = l.center_frac * self.shape_period;
            let sigma = l.width_frac * self.shape_period;
            let z = (tau - mu) / sigma;
            let g = l.amplitude * (-0.5 * z * z).exp();
            (
                v + g,
                d1 - g * z / sigma,
                d2 + g * (z * z - 1.0) / (sigma * sigma),
            )
        })
    }

    pub(crate) fn value(&self, tau: f64) -> f64 {
        self.lobe_sum(tau).0 - self.baseline(tau).0
    }

    fn slope(&self, tau: f64) -> f64 {
        self.lobe_sum(tau).1 - self.baseline(tau).1
    }

    fn curvature(&self, tau: f64) -> f64 {
        self.lobe_sum(tau).2 - self.baseline(tau).2
    }

    /// Intersecting-tangents foot: where the tangent at the steepest point of
    /// the systolic upstroke crosses the onset level (zero).
    pub(crate) fn tangent_foot(&self, systolic_center: f64) -> f64 {
        let end = (systolic_center * self.shape_period).min(self.span);
        let steps = 400;
        let h = end / steps as f64;
        let best = (0..=steps)
            .map(|i| i as f64 * h)
            .max_by(|a, b| self.slope(*a).total_cmp(&self.slope(*b)))
            .unwrap_or(0.0);
        // the steepest point is a root of the curvature; bisect around the scan maximum
        let (mut lo, mut hi) = ((best - h).max(0.0), (best + h).min(end));
        if self.curvature(lo) > 0.0 && self.curvature(hi) < 0.0 {
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if self.curvature(mid) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
        } else {
            lo = best;
            hi = best;
        }
        let t_up = 0.5 * (lo + hi);
        let slope = self.slope(t_up);
        if slope <= 0.0 {
            return 0.0;
        }
        (t_up - self.value(t_up) / slope).clamp(0.0, t_up)
    }
}

/// One beat of `period` seconds sampled at `sample_rate`, onset at index 0.
pub fn beat_waveform(template: &BeatTemplate, period: f64, sample_rate: f64) -> Result<Vec<f64>, SynthError> {
    template.validate()?;
    if !(period > 0.0 && period.is_finite()) {
        return Err(SynthError::InvalidTemplate(format!("period {period} must be positive")));
    }
    if !(sample_rate > 0.0) {
        return Err(SynthError::InvalidTemplate("sample rate must be positive".into()));
    }
    let shape = BeatShape::new(template, period, period);
    let n = ((period * sample_rate).round() as usize).max(1);
    Ok((0..n).map(|i| shape.value(i as f64 / sample_rate)).collect())
}

/// Offset of the intersecting-tangents foot from the beat onset for a beat
/// of the given shape period and span.
pub fn tangent_foot_offset(template: &BeatTemplate, shape_period: f64, span: f64) -> f64 {
    BeatShape::new(template, shape_period, span).tangent_foot(template.systolic_lobe().center_frac)
}
