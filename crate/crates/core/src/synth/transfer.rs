use serde::{Deserialize, Serialize};

use super::rng::Prng;
use super::SynthError;
use crate::signal::Trace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    /// Transmission falls as the fiber is deformed.
    Decreasing,
    Increasing,
}

/// Mapping from mechanical perturbation to transmitted intensity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensorTransfer {
    pub baseline: f64,
    pub gain: f64,
    pub polarity: Polarity,
    pub monotonic: bool,
    /// Perturbation at which a non-monotonic response turns back.
    pub fold_point: f64,
}

impl Default for SensorTransfer {
    fn default() -> Self {
        Self {
            baseline: 1.0,
            gain: 0.1,
            polarity: Polarity::Decreasing,
            monotonic: true,
            fold_point: 1.0,
        }
    }
}

impl SensorTransfer {
    pub fn validate(&self) -> Result<(), SynthError> {
        if !(self.baseline > 0.0 && self.gain > 0.0 && self.fold_point.is_finite()) {
            return Err(SynthError::InvalidConfig(
                "transfer baseline and gain must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Noise-free intensity for perturbation `p`.
    pub fn respond(&self, p: f64) -> f64 {
        let effective = if self.monotonic || p <= self.fold_point {
            p
        } else {
            2.0 * self.fold_point - p
        };
        let sign = match self.polarity {
            Polarity::Decreasing => -1.0,
            Polarity::Increasing => 1.0,
        };
        self.baseline + sign * self.gain * effective
    }
}

/// Maps a perturbation trace to intensity and adds white Gaussian noise
/// drawn from the stream for `seed`.
pub fn apply_sensor_transfer(
    perturbation: &Trace,
    transfer: &SensorTransfer,
    noise_sd: f64,
    seed: u64,
) -> Result<Trace, SynthError> {
    transfer.validate()?;
    if !(noise_sd >= 0.0) {
        return Err(SynthError::InvalidConfig("noise_sd must be >= 0".into()));
    }
    let mut rng = Prng::new(seed);
    let out = perturbation
        .samples()
        .iter()
        .map(|&p| {
            let clean = transfer.respond(p);
            if noise_sd > 0.0 {
                clean + noise_sd * rng.standard_normal()
            } else {
                clean
            }
        })
        .collect();
    Ok(perturbation.with_samples(out)?)
}
