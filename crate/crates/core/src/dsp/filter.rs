//! Butterworth band-pass realized as cascaded biquads (direct form II
//! transposed). The high-pass and low-pass halves each have the full
//! `order`, so the default order-4 design rolls off at 24 dB/octave on
//! both sides of the band.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::DspError;
use crate::signal::Trace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FilterMode {
    /// Single forward pass; running state, non-zero group delay.
    CausalStreaming,
    /// Forward-backward pass with zero net phase.
    ZeroPhaseOffline,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FilterSpec {
    pub low_cut: f64,
    pub high_cut: f64,
    pub order: usize,
    pub mode: FilterMode,
}

impl Default for FilterSpec {
    fn default() -> Self {
        Self {
            low_cut: 0.2,
            high_cut: 45.0,
            order: 4,
            mode: FilterMode::ZeroPhaseOffline,
        }
    }
}

impl FilterSpec {
    pub fn validate(&self, sample_rate: f64) -> Result<(), DspError> {
        if self.order == 0 || !self.order.is_multiple_of(2) {
            return Err(DspError::InvalidOrder(self.order));
        }
        let nyquist = sample_rate / 2.0;
        if !(self.low_cut > 0.0 && self.low_cut < self.high_cut && self.high_cut < nyquist) {
            return Err(DspError::BandOutOfRange {
                low: self.low_cut,
                high: self.high_cut,
                nyquist,
            });
        }
        Ok(())
    }

    /// Seconds at each end of a filtered trace that still carry start-up
    /// transients: `max(5 s, 3 / low_cut)`.
    pub fn edge_transient_seconds(&self) -> f64 {
        (3.0 / self.low_cut).max(5.0)
    }
}

/// One normalized second-order section, `a0 = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    /// Output for a constant unit input once transients have died out.
    fn dc_gain(&self) -> f64 {
        (self.b[0] + self.b[1] + self.b[2]) / (1.0 + self.a[0] + self.a[1])
    }

    /// State that makes a constant input `x` pass through with no transient.
    fn steady_state(&self, x: f64) -> [f64; 2] {
        let y = self.dc_gain() * x;
        let z2 = self.b[2] * x - self.a[1] * y;
        let z1 = self.b[1] * x - self.a[0] * y + z2;
        [z1, z2]
    }

    #[inline]
    fn step(&self, z: &mut [f64; 2], x: f64) -> f64 {
        let y = self.b[0] * x + z[0];
        z[0] = self.b[1] * x - self.a[0] * y + z[1];
        z[1] = self.b[2] * x - self.a[1] * y;
        y
    }
}

/// Running state of a causal filter; one per stream.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    z: Vec<[f64; 2]>,
}

/// A designed band-pass filter for a fixed sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Bandpass {
    spec: FilterSpec,
    sample_rate: f64,
    sections: Vec<Biquad>,
}

impl Bandpass {
    pub fn design(spec: FilterSpec, sample_rate: f64) -> Result<Self, DspError> {
        spec.validate(sample_rate)?;
        let mut sections = Vec::with_capacity(spec.order);
        sections.extend(butterworth_sections(spec.order, spec.low_cut, sample_rate, Kind::HighPass));
        sections.extend(butterworth_sections(spec.order, spec.high_cut, sample_rate, Kind::LowPass));
        Ok(Self {
            spec,
            sample_rate,
            sections,
        })
    }

    pub fn spec(&self) -> &FilterSpec {
        &self.spec
    }

    pub fn sections(&self) -> &[Biquad] {
        &self.sections
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn zero_state(&self) -> FilterState {
        FilterState {
            z: vec![[0.0; 2]; self.sections.len()],
        }
    }

    /// State as if the input had been constant at `x` forever.
    pub fn steady_state(&self, x: f64) -> FilterState {
        let mut input = x;
        let z = self
            .sections
            .iter()
            .map(|s| {
                let z = s.steady_state(input);
                input *= s.dc_gain();
                z
            })
            .collect();
        FilterState { z }
    }

    /// Filters one chunk of a stream. Feeding consecutive chunks with the
    /// returned state is identical to filtering the concatenation.
    pub fn process_chunk(&self, mut state: FilterState, chunk: &[f64]) -> (Vec<f64>, FilterState) {
        let mut out = chunk.to_vec();
        self.run_in_place(&mut state, &mut out);
        (out, state)
    }

    fn run_in_place(&self, state: &mut FilterState, data: &mut [f64]) {
        for (section, z) in self.sections.iter().zip(state.z.iter_mut()) {
            for v in data.iter_mut() {
                *v = section.step(z, *v);
            }
        }
    }

    /// Causal pass over a whole signal, primed with the steady state of its
    /// first sample.
    pub fn filter_causal(&self, x: &[f64]) -> Vec<f64> {
        let Some(&first) = x.first() else {
            return Vec::new();
        };
        let mut state = self.steady_state(first);
        let mut out = x.to_vec();
        self.run_in_place(&mut state, &mut out);
        out
    }

    /// Forward-backward pass. The signal is padded at both ends with its
    /// odd (point-symmetric) extension and each pass starts from the steady
    /// state of its first padded sample.
    pub fn filter_zero_phase(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        if n == 0 {
            return Vec::new();
        }
        let pad = self.pad_len().min(n - 1);
        let mut ext = Vec::with_capacity(n + 2 * pad);
        ext.extend((1..=pad).rev().map(|i| 2.0 * x[0] - x[i]));
        ext.extend_from_slice(x);
        ext.extend((1..=pad).map(|i| 2.0 * x[n - 1] - x[n - 1 - i]));

        let mut state = self.steady_state(ext[0]);
        self.run_in_place(&mut state, &mut ext);
        ext.reverse();
        let mut state = self.steady_state(ext[0]);
        self.run_in_place(&mut state, &mut ext);
        ext.reverse();
        ext[pad..pad + n].to_vec()
    }

    fn pad_len(&self) -> usize {
        (3.0 / self.spec.low_cut * self.sample_rate).ceil() as usize
    }

    /// Magnitude response of the cascade at `freq` Hz, evaluated from the
    /// section coefficients.
    pub fn magnitude_at(&self, freq: f64) -> f64 {
        let w = 2.0 * PI * freq / self.sample_rate;
        let (c1, s1) = (w.cos(), -w.sin());
        let (c2, s2) = ((2.0 * w).cos(), -(2.0 * w).sin());
        self.sections
            .iter()
            .map(|s| {
                let num = (s.b[0] + s.b[1] * c1 + s.b[2] * c2, s.b[1] * s1 + s.b[2] * s2);
                let den = (1.0 + s.a[0] * c1 + s.a[1] * c2, s.a[0] * s1 + s.a[1] * s2);
                (num.0.hypot(num.1)) / (den.0.hypot(den.1))
            })
            .product()
    }
}

#[derive(Clone, Copy)]
enum Kind {
    LowPass,
    HighPass,
}

/// Bilinear-transformed Butterworth sections with pre-warped cutoff.
fn butterworth_sections(order: usize, cutoff: f64, sample_rate: f64, kind: Kind) -> Vec<Biquad> {
    let k = (PI * cutoff / sample_rate).tan();
    (0..order / 2)
        .map(|i| {
            let q = 1.0 / (2.0 * (PI * (2 * i + 1) as f64 / (2 * order) as f64).sin());
            let norm = 1.0 / (1.0 + k / q + k * k);
            let a = [2.0 * (k * k - 1.0) * norm, (1.0 - k / q + k * k) * norm];
            let b = match kind {
                Kind::LowPass => {
                    let b0 = k * k * norm;
                    [b0, 2.0 * b0, b0]
                }
                Kind::HighPass => [norm, -2.0 * norm, norm],
            };
            Biquad { b, a }
        })
        .collect()
}

/// Band-limits a trace according to `spec`.
pub fn bandpass(trace: &Trace, spec: &FilterSpec) -> Result<Trace, DspError> {
    let filter = Bandpass::design(*spec, trace.sample_rate())?;
    let out = match spec.mode {
        FilterMode::CausalStreaming => filter.filter_causal(trace.samples()),
        FilterMode::ZeroPhaseOffline => filter.filter_zero_phase(trace.samples()),
    };
    Ok(trace.with_samples(out)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::Site;
    use proptest::prelude::*;

    const FS: f64 = 250.0;

    /// Closed-form Butterworth magnitude of the bilinear design, independent
    /// of the section coefficients.
    fn oracle_gain(spec: &FilterSpec, f: f64) -> f64 {
        let warp = |x: f64| (PI * x / FS).tan();
        let n = spec.order as i32;
        let hp = 1.0 / (1.0 + (warp(spec.low_cut) / warp(f)).powi(2 * n)).sqrt();
        let lp = 1.0 / (1.0 + (warp(f) / warp(spec.high_cut)).powi(2 * n)).sqrt();
        hp * lp
    }

    fn sine(freq: f64, seconds: f64) -> Trace {
        let n = (seconds * FS) as usize;
        let v = (0..n).map(|i| (2.0 * PI * freq * i as f64 / FS).sin()).collect();
        Trace::new(FS, 0.0, v, Site::Wrist).unwrap()
    }

    fn steady_amplitude(x: &[f64], edge: usize) -> f64 {
        x[edge..x.len() - edge].iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    #[test]
    fn coefficient_response_matches_closed_form() {
        let spec = FilterSpec::default();
        let f = Bandpass::design(spec, FS).unwrap();
        for freq in [0.05, 0.2, 0.5, 1.0, 10.0, 45.0, 60.0, 100.0] {
            let (a, b) = (f.magnitude_at(freq), oracle_gain(&spec, freq));
            assert!((a - b).abs() < 1e-9, "{freq} Hz: {a} vs {b}");
        }
    }

    #[test]
    fn dc_rejected_zero_phase() {
        let t = Trace::new(FS, 0.0, vec![1.0; 5000], Site::Wrist).unwrap();
        let y = bandpass(&t, &FilterSpec::default()).unwrap();
        let edge = (5.0 * FS) as usize;
        assert!(steady_amplitude(y.samples(), edge) < 1e-3);
    }

    #[test]
    fn passband_and_stopband_amplitudes() {
        let zero_phase = FilterSpec::default();
        let causal = FilterSpec {
            mode: FilterMode::CausalStreaming,
            ..zero_phase
        };
        let edge = (15.0 * FS) as usize;
        for (freq, lo, hi) in [(1.0, 0.95, 1.05), (60.0, 0.0, 0.3)] {
            let x = sine(freq, 60.0);
            let zp = steady_amplitude(bandpass(&x, &zero_phase).unwrap().samples(), edge);
            let ca = steady_amplitude(bandpass(&x, &causal).unwrap().samples(), edge);
            let g = oracle_gain(&zero_phase, freq);
            assert!((zp - g * g).abs() < 0.01, "{freq} Hz zero-phase {zp} vs {}", g * g);
            assert!((ca - g).abs() < 0.01, "{freq} Hz causal {ca} vs {g}");
            for a in [zp, ca] {
                assert!(a >= lo && a <= hi, "{freq} Hz amplitude {a}");
            }
        }
    }

    #[test]
    fn zero_phase_has_no_lag() {
        let x = sine(2.0, 60.0);
        let y = bandpass(&x, &FilterSpec::default()).unwrap();
        let edge = (15.0 * FS) as usize;
        let (xs, ys) = (&x.samples()[edge..x.len() - edge], &y.samples()[edge..y.len() - edge]);
        let xcorr = |lag: isize| -> f64 {
            (0..xs.len())
                .filter_map(|i| {
                    let j = i as isize + lag;
                    (j >= 0 && (j as usize) < ys.len()).then(|| xs[i] * ys[j as usize])
                })
                .sum()
        };
        let best = (-20..=20).max_by(|&a, &b| xcorr(a).total_cmp(&xcorr(b))).unwrap();
        assert_eq!(best, 0);
    }

    #[test]
    fn band_validation() {
        let bad = FilterSpec {
            high_cut: 130.0,
            ..Default::default()
        };
        assert!(matches!(bad.validate(FS), Err(DspError::BandOutOfRange { .. })));
        let odd = FilterSpec {
            order: 3,
            ..Default::default()
        };
        assert_eq!(odd.validate(FS), Err(DspError::InvalidOrder(3)));
        assert_eq!(FilterSpec::default().edge_transient_seconds(), 15.0);
    }

    #[test]
    fn chunked_stream_matches_single_pass() {
        let f = Bandpass::design(FilterSpec::default(), FS).unwrap();
        let x: Vec<f64> = (0..3000).map(|i| ((i * 7919) % 101) as f64 / 50.0 - 1.0).collect();
        let (whole, _) = f.process_chunk(f.zero_state(), &x);
        let mut state = f.zero_state();
        let mut pieces = Vec::new();
        for chunk in x.chunks(337) {
            let (y, s) = f.process_chunk(state, chunk);
            pieces.extend(y);
            state = s;
        }
        assert_eq!(whole, pieces);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn linearity(
            a in -3.0f64..3.0, b in -3.0f64..3.0,
            f1 in 0.3f64..40.0, f2 in 0.3f64..40.0,
            causal in any::<bool>(),
        ) {
            let spec = FilterSpec {
                mode: if causal { FilterMode::CausalStreaming } else { FilterMode::ZeroPhaseOffline },
                ..Default::default()
            };
            let n = 4000;
            let x: Vec<f64> = (0..n).map(|i| (2.0 * PI * f1 * i as f64 / FS).sin() + 0.3).collect();
            let y: Vec<f64> = (0..n).map(|i| (2.0 * PI * f2 * i as f64 / FS).cos() * (i as f64 / n as f64)).collect();
            let mix: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
            let tr = |v: Vec<f64>| Trace::new(FS, 0.0, v, Site::Wrist).unwrap();
            let fx = bandpass(&tr(x), &spec).unwrap();
            let fy = bandpass(&tr(y), &spec).unwrap();
            let fm = bandpass(&tr(mix), &spec).unwrap();
            let scale = fm.samples().iter().fold(1.0f64, |m, v| m.max(v.abs()));
            for ((m, p), q) in fm.samples().iter().zip(fx.samples()).zip(fy.samples()) {
                prop_assert!((m - (a * p + b * q)).abs() <= 1e-9 * scale);
            }
        }
    }
}
