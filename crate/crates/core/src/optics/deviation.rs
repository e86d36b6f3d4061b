use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::chip::{ChipState, LinearMap};
use crate::rng::{self, purpose};
use crate::{Error, Result};

/// Seeded fabrication and calibration imperfections applied to an ideal chip.
///
/// Draw order is fixed regardless of which fields are zero, so changing one
/// magnitude leaves every other draw of the same seed untouched.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeviationProfile {
    /// Full width of the uniform per-branch splitting deviation.
    pub splitter_unevenness_db: f64,
    /// Relative std of each arm's `P_π`.
    pub p_pi_mismatch_frac: f64,
    pub bias_offset_std_rad: f64,
    /// Excess loss per branch is uniform on `[0, spread]`.
    pub insertion_loss_spread_db: f64,
    pub tail_phase_offset_std_rad: f64,
    /// RMS over the active branches of the weight-drive gain error.
    pub drive_gain_error_rms: f64,
    pub drive_offset_error_std: f64,
}

impl Default for DeviationProfile {
    fn default() -> Self {
        Self::zero()
    }
}

impl DeviationProfile {
    pub fn zero() -> Self {
        Self {
            splitter_unevenness_db: 0.0,
            p_pi_mismatch_frac: 0.0,
            bias_offset_std_rad: 0.0,
            insertion_loss_spread_db: 0.0,
            tail_phase_offset_std_rad: 0.0,
            drive_gain_error_rms: 0.0,
            drive_offset_error_std: 0.0,
        }
    }

    /// Device-level spread of a fresh chip: uneven splitting, random path
    /// phases, bias errors and slightly mismatched heaters.
    pub fn fabrication() -> Self {
        Self {
            splitter_unevenness_db: 1.2,
            p_pi_mismatch_frac: 0.01,
            bias_offset_std_rad: 0.3,
            insertion_loss_spread_db: 0.5,
            tail_phase_offset_std_rad: std::f64::consts::PI,
            ..Self::zero()
        }
    }

    /// Fabrication spread plus the residual weight-drive error left after
    /// coarse calibration.
    pub fn coarse() -> Self {
        Self { drive_gain_error_rms: 0.29, drive_offset_error_std: 0.02, ..Self::fabrication() }
    }

    /// Only per-branch linear drive errors; everything else ideal.
    pub fn linear_only(gain_rms: f64, offset_std: f64) -> Self {
        Self { drive_gain_error_rms: gain_rms, drive_offset_error_std: offset_std, ..Self::zero() }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("splitter_unevenness_db", self.splitter_unevenness_db),
            ("p_pi_mismatch_frac", self.p_pi_mismatch_frac),
            ("bias_offset_std_rad", self.bias_offset_std_rad),
            ("insertion_loss_spread_db", self.insertion_loss_spread_db),
            ("tail_phase_offset_std_rad", self.tail_phase_offset_std_rad),
            ("drive_gain_error_rms", self.drive_gain_error_rms),
            ("drive_offset_error_std", self.drive_offset_error_std),
        ];
        for (name, v) in fields {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be a non-negative number, got {v}")));
            }
        }
        Ok(())
    }

    pub fn apply(&self, chip: &mut ChipState, seed: u64) -> Result<()> {
        self.validate()?;
        let mut r = rng::stream(seed, purpose::DEVIATION, 0);
        let normal = |r: &mut rng::SimRng| -> f64 { StandardNormal.sample(r) };
        let n = chip.branches.len();
        let mut split_db = vec![0.0; n];
        for (j, b) in chip.branches.iter_mut().enumerate() {
            let u: f64 = r.random();
            split_db[j] = (2.0 * u - 1.0) * self.splitter_unevenness_db / 2.0;
            let l: f64 = r.random();
            b.insertion_loss_db = l * self.insertion_loss_spread_db;
            for m in [&mut b.slow_mod, &mut b.fast_mod] {
                for arm in [&mut m.upper, &mut m.lower] {
                    let scale = 1.0 + self.p_pi_mismatch_frac * normal(&mut r);
                    arm.p_pi_mw *= scale.max(0.1);
                }
            }
            b.slow_mod.bias_offset_rad = self.bias_offset_std_rad * normal(&mut r);
            b.fast_mod.bias_offset_rad = self.bias_offset_std_rad * normal(&mut r);
            b.path_phase_rad = self.tail_phase_offset_std_rad * normal(&mut r);
        }
        chip.splitter.branch_deviation_db = split_db;

        let m = chip.active;
        let z: Vec<f64> = (0..m).map(|_| normal(&mut r)).collect();
        let offsets: Vec<f64> = (0..m).map(|_| self.drive_offset_error_std * normal(&mut r)).collect();
        let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        for j in 0..m {
            let dir = if norm > 0.0 { z[j] / norm } else { 0.0 };
            chip.branches[j].drive_error = LinearMap {
                gain: 1.0 + self.drive_gain_error_rms * (m as f64).sqrt() * dir,
                offset: offsets[j],
            };
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::chip::ChipConfig;
    use rand::SeedableRng;

    #[test]
    fn zero_profile_reproduces_ideal_chip() {
        let cfg = ChipConfig::default();
        let ideal = ChipState::ideal(&cfg, 5).unwrap();
        let zero = ChipState::new(&cfg, &DeviationProfile::zero(), 5).unwrap();
        assert_eq!(ideal, zero);
        let mut r = rng::SimRng::seed_from_u64(0);
        let a = ideal.dot_product(&[0.3, 0.1, -0.7], &[0.9, -0.2, 0.4], &mut r).unwrap();
        let b = zero.dot_product(&[0.3, 0.1, -0.7], &[0.9, -0.2, 0.4], &mut r).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn unevenness_is_bounded() {
        let cfg = ChipConfig::default();
        for seed in 0..50 {
            let chip = ChipState::new(&cfg, &DeviationProfile::fabrication(), seed).unwrap();
            let out = chip.splitter.split(num_complex::Complex64::new(1.0, 0.0));
            let p: Vec<f64> = out.branch_fields.iter().map(|f| 10.0 * f.norm_sqr().log10()).collect();
            let spread = p.iter().cloned().fold(f64::MIN, f64::max) - p.iter().cloned().fold(f64::MAX, f64::min);
            assert!(spread <= 1.2 + 1e-9, "seed {seed}: {spread}");
        }
    }

    #[test]
    fn drive_gain_rms_is_exact() {
        let cfg = ChipConfig::default();
        let profile = DeviationProfile::linear_only(0.2, 0.0);
        for seed in 0..10 {
            let chip = ChipState::new(&cfg, &profile, seed).unwrap();
            let ms = (0..3).map(|j| (chip.branches[j].drive_error.gain - 1.0).powi(2)).sum::<f64>() / 3.0;
            assert!((ms.sqrt() - 0.2).abs() < 1e-12);
        }
    }

    #[test]
    fn negative_fields_are_rejected() {
        let p = DeviationProfile { bias_offset_std_rad: -0.1, ..DeviationProfile::zero() };
        assert!(matches!(p.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn profiles_round_trip_through_json() {
        let p = DeviationProfile::coarse();
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(serde_json::from_str::<DeviationProfile>(&s).unwrap(), p);
        let partial: DeviationProfile = serde_json::from_str(r#"{"bias_offset_std_rad": 0.2}"#).unwrap();
        assert_eq!(partial.bias_offset_std_rad, 0.2);
        assert_eq!(partial.splitter_unevenness_db, 0.0);
    }
}
