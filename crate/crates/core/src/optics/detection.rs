//! Reference-biased photodetection and value decoding.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::modulator::ComplexAmplitude;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectionMode {
    SingleEnded,
    Homodyne,
}

/// Amplitudes here are in value units: the ideal chip's combined signal
/// field equals the digital dot product.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionModel {
    pub mode: DetectionMode,
    pub reference_amplitude: f64,
    pub additive_noise_std: f64,
    pub gain: f64,
    /// Negative photocurrents down to `-clamp_tolerance` decode as zero intensity.
    pub clamp_tolerance: f64,
}

impl DetectionModel {
    pub fn single_ended(reference_amplitude: f64) -> Self {
        Self {
            mode: DetectionMode::SingleEnded,
            reference_amplitude,
            additive_noise_std: 0.0,
            gain: 1.0,
            clamp_tolerance: 1e-9,
        }
    }

    pub fn homodyne(reference_amplitude: f64) -> Self {
        Self { mode: DetectionMode::Homodyne, ..Self::single_ended(reference_amplitude) }
    }

    /// Noise-free photocurrent.
    pub fn intensity(&self, combined: ComplexAmplitude) -> f64 {
        match self.mode {
            DetectionMode::SingleEnded => {
                self.gain * (combined + self.reference_amplitude).norm_sqr()
            }
            DetectionMode::Homodyne => self.gain * self.reference_amplitude * combined.re,
        }
    }
}

pub fn photodetect<R: Rng + ?Sized>(combined: ComplexAmplitude, detection: &DetectionModel, rng: &mut R) -> f64 {
    let clean = detection.intensity(combined);
    if detection.additive_noise_std > 0.0 {
        let n: f64 = StandardNormal.sample(rng);
        clean + detection.additive_noise_std * n
    } else {
        clean
    }
}

pub fn decode(photocurrent: f64, detection: &DetectionModel) -> Result<f64> {
    match detection.mode {
        DetectionMode::SingleEnded => {
            let i = if photocurrent < 0.0 {
                if photocurrent < -detection.clamp_tolerance {
                    return Err(Error::NegativeIntensity {
                        current: photocurrent,
                        tolerance: detection.clamp_tolerance,
                    });
                }
                0.0
            } else {
                photocurrent
            };
            Ok((i / detection.gain).sqrt() - detection.reference_amplitude)
        }
        DetectionMode::Homodyne => Ok(photocurrent / (detection.gain * detection.reference_amplitude)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use rand::SeedableRng;

    fn rng() -> rand_chacha::ChaCha8Rng {
        rand_chacha::ChaCha8Rng::seed_from_u64(0)
    }

    #[test]
    fn single_ended_examples() {
        let d = DetectionModel::single_ended(2.0);
        let i = photodetect(Complex64::new(-1.0, 0.0), &d, &mut rng());
        assert!((i - 1.0).abs() < 1e-15);
        assert!((decode(i, &d).unwrap() + 1.0).abs() < 1e-15);
        let i0 = photodetect(Complex64::new(0.0, 0.0), &d, &mut rng());
        assert!((i0 - 4.0).abs() < 1e-15);
        assert_eq!(decode(i0, &d).unwrap(), 0.0);
    }

    #[test]
    fn homodyne_examples() {
        let d = DetectionModel::homodyne(1.0);
        let i = photodetect(Complex64::new(0.5, 0.0), &d, &mut rng());
        assert!((i - 0.5).abs() < 1e-15);
        assert!((decode(i, &d).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn negative_intensity_beyond_clamp() {
        let d = DetectionModel::single_ended(1.0);
        assert_eq!(decode(-1e-12, &d).unwrap(), -1.0);
        assert!(matches!(decode(-0.1, &d), Err(Error::NegativeIntensity { .. })));
    }

    proptest::proptest! {
        #[test]
        fn round_trip_below_reference(s in -2.99f64..2.99) {
            let d = DetectionModel::single_ended(3.0);
            let i = photodetect(Complex64::new(s, 0.0), &d, &mut rng());
            proptest::prop_assert!((decode(i, &d).unwrap() - s).abs() < 1e-12);
        }
    }
}
