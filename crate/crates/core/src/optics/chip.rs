use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::combiner::combine;
use super::detection::{decode, photodetect, DetectionMode, DetectionModel};
use super::deviation::DeviationProfile;
use super::modulator::{encode_value, ComplexAmplitude, ModulatorState, PhaseShifterParams};
use super::splitter::SplitterModel;
use crate::rng::{self, SimRng};
use crate::{Error, Result};

/// Floor for monitor readings in dB.
pub const MONITOR_FLOOR_DB: f64 = -120.0;

/// Chip configuration as stored in JSON; units are part of the field names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChipConfig {
    pub physical_branches: usize,
    pub active_branches: usize,
    pub reference_fraction: f64,
    pub residual_monitor_fraction: f64,
    pub monitor_tap_fraction: f64,
    pub phase_shifter: PhaseShifterParams,
    /// `P_π` assumed by the value encoder.
    pub encoding_p_pi_mw: f64,
    /// Hardware weights may reach `±weight_headroom` so that BPC can boost weak branches.
    pub weight_headroom: f64,
    pub detection_mode: DetectionMode,
    /// `None` selects 1.5× the largest reachable |weighted sum|.
    pub reference_amplitude: Option<f64>,
    pub photocurrent_noise_std: f64,
    pub detector_gain: f64,
    pub phase_drift_std_rad: f64,
}

impl Default for ChipConfig {
    fn default() -> Self {
        Self {
            physical_branches: 9,
            active_branches: 3,
            reference_fraction: 0.5,
            residual_monitor_fraction: 0.3,
            monitor_tap_fraction: 0.1,
            phase_shifter: PhaseShifterParams::default(),
            encoding_p_pi_mw: 1.81,
            weight_headroom: 2.0,
            detection_mode: DetectionMode::SingleEnded,
            reference_amplitude: None,
            photocurrent_noise_std: 0.0,
            detector_gain: 1.0,
            phase_drift_std_rad: 0.0,
        }
    }
}

impl ChipConfig {
    /// Same chip without detector noise or phase drift.
    pub fn noise_free(self) -> Self {
        Self { photocurrent_noise_std: 0.0, phase_drift_std_rad: 0.0, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.physical_branches == 0 || self.active_branches == 0 {
            return bad("branch counts must be positive");
        }
        if self.active_branches > self.physical_branches {
            return bad("active_branches exceeds physical_branches");
        }
        if !(0.0..1.0).contains(&self.reference_fraction)
            || !(0.0..1.0).contains(&self.residual_monitor_fraction)
            || !(0.0..1.0).contains(&self.monitor_tap_fraction)
        {
            return bad("power fractions must lie in [0, 1)");
        }
        let p = &self.phase_shifter;
        if p.p_pi_mw <= 0.0 || p.r_ohm <= 0.0 || p.p0_bias_mw < 0.0 || self.encoding_p_pi_mw <= 0.0 {
            return bad("phase shifter parameters must be positive");
        }
        if self.weight_headroom < 1.0 {
            return bad("weight_headroom must be >= 1");
        }
        if self.detector_gain <= 0.0 || self.photocurrent_noise_std < 0.0 || self.phase_drift_std_rad < 0.0 {
            return bad("detector gain must be positive and noise levels non-negative");
        }
        if let Some(r) = self.reference_amplitude {
            if r <= 0.0 {
                return bad("reference_amplitude must be positive");
            }
        }
        // the encoder must reach a quarter period on every arm
        let quarter = ModulatorState::drive_power_mw(PI / 2.0, self.encoding_p_pi_mw);
        if quarter > p.p0_bias_mw {
            return bad("p0_bias_mw too small to reach full transparency");
        }
        Ok(())
    }
}

/// `gain·v + offset`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearMap {
    pub gain: f64,
    pub offset: f64,
}

impl LinearMap {
    pub const IDENTITY: LinearMap = LinearMap { gain: 1.0, offset: 0.0 };

    pub fn apply(&self, v: f64) -> f64 {
        self.gain * v + self.offset
    }

    pub fn then(&self, outer: &LinearMap) -> LinearMap {
        LinearMap { gain: outer.gain * self.gain, offset: outer.gain * self.offset + outer.offset }
    }
}

impl Default for LinearMap {
    fn default() -> Self {
        Self::IDENTITY
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModSlot {
    Slow,
    Fast,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchState {
    pub slow_mod: ModulatorState,
    pub fast_mod: ModulatorState,
    /// Tail phase-shifter setting.
    pub tail_phase_rad: f64,
    /// Uncontrolled optical path phase of the branch relative to the reference.
    pub path_phase_rad: f64,
    /// Excess loss between the last monitor tap and the combiner.
    pub insertion_loss_db: f64,
    pub monitor_tap_fraction: f64,
    /// Residual error of the analog weight drive path.
    pub drive_error: LinearMap,
    /// Digital pre-distortion applied to requested weights.
    pub predistortion: LinearMap,
}

impl BranchState {
    fn new(params: PhaseShifterParams, tap: f64) -> Self {
        Self {
            slow_mod: ModulatorState::matched(params),
            fast_mod: ModulatorState::matched(params),
            tail_phase_rad: 0.0,
            path_phase_rad: 0.0,
            insertion_loss_db: 0.0,
            monitor_tap_fraction: tap,
            drive_error: LinearMap::IDENTITY,
            predistortion: LinearMap::IDENTITY,
        }
    }

    pub fn modulator(&self, slot: ModSlot) -> &ModulatorState {
        match slot {
            ModSlot::Slow => &self.slow_mod,
            ModSlot::Fast => &self.fast_mod,
        }
    }

    pub fn modulator_mut(&mut self, slot: ModSlot) -> &mut ModulatorState {
        match slot {
            ModSlot::Slow => &mut self.slow_mod,
            ModSlot::Fast => &mut self.fast_mod,
        }
    }
}

/// Drive phases for one branch; `sin(drive)` is the nominal transmission.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchDrive {
    pub slow: f64,
    pub fast: f64,
}

impl BranchDrive {
    pub const CLOSED: BranchDrive = BranchDrive { slow: 0.0, fast: 0.0 };
    pub const OPEN: BranchDrive = BranchDrive { slow: PI / 2.0, fast: PI / 2.0 };
}

/// One simulated chip instance.
///
/// All randomness in the hardware parameters comes from `rng_seed`; shot
/// noise is drawn from generators supplied by the caller (see
/// [`ChipState::shot_rng`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChipState {
    pub branches: Vec<BranchState>,
    pub active: usize,
    pub splitter: SplitterModel,
    pub detection: DetectionModel,
    pub phase_drift_std_rad: f64,
    pub rng_seed: u64,
    pub encoding_p_pi_mw: f64,
    pub weight_headroom: f64,
    /// Combined field of one ideal branch carrying value 1; maps fields to values.
    pub value_scale: f64,
}

impl ChipState {
    pub fn ideal(config: &ChipConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let splitter = SplitterModel::design(
            config.physical_branches,
            config.reference_fraction,
            config.residual_monitor_fraction,
        );
        let n_ports = config.physical_branches + 1;
        let tap = config.monitor_tap_fraction;
        let value_scale = splitter.ideal_branch_power().sqrt() * (1.0 - tap)
            / (config.weight_headroom * (n_ports as f64).sqrt());
        let reach = config.active_branches as f64 * config.weight_headroom;
        let reference = config.reference_amplitude.unwrap_or(1.5 * reach);
        let mut detection = match config.detection_mode {
            DetectionMode::SingleEnded => DetectionModel::single_ended(reference),
            DetectionMode::Homodyne => DetectionModel::homodyne(reference),
        };
        detection.additive_noise_std = config.photocurrent_noise_std;
        detection.gain = config.detector_gain;
        Ok(Self {
            branches: (0..config.physical_branches)
                .map(|_| BranchState::new(config.phase_shifter, tap))
                .collect(),
            active: config.active_branches,
            splitter,
            detection,
            phase_drift_std_rad: config.phase_drift_std_rad,
            rng_seed: seed,
            encoding_p_pi_mw: config.encoding_p_pi_mw,
            weight_headroom: config.weight_headroom,
            value_scale,
        })
    }

    /// Ideal chip with the deviation profile drawn from `seed`.
    pub fn new(config: &ChipConfig, profile: &DeviationProfile, seed: u64) -> Result<Self> {
        let mut chip = Self::ideal(config, seed)?;
        profile.apply(&mut chip, seed)?;
        Ok(chip)
    }

    pub fn n_ports(&self) -> usize {
        self.branches.len() + 1
    }

    /// Shot-noise generator for a numbered measurement stream.
    pub fn shot_rng(&self, stream: u64) -> SimRng {
        rng::stream(self.rng_seed, rng::purpose::SHOT_NOISE, stream)
    }

    fn check_branch(&self, index: usize) -> Result<()> {
        if index >= self.branches.len() {
            return Err(Error::IndexOutOfRange { index, len: self.branches.len() });
        }
        Ok(())
    }

    fn branch_field(
        &self,
        index: usize,
        drive: BranchDrive,
        input: ComplexAmplitude,
        jitter: f64,
    ) -> Result<ComplexAmplitude> {
        let b = &self.branches[index];
        let keep = (1.0 - b.monitor_tap_fraction).sqrt();
        let mut e = b.slow_mod.field(input, drive.slow, self.encoding_p_pi_mw)? * keep;
        e = b.fast_mod.field(e, drive.fast, self.encoding_p_pi_mw)? * keep;
        let loss = 10f64.powf(-b.insertion_loss_db / 20.0);
        Ok(e * Complex64::from_polar(loss, b.path_phase_rad + b.tail_phase_rad + jitter))
    }

    /// Combined signal field (reference excluded) in value units. Branches
    /// without a drive are dark.
    pub fn signal_field<R: Rng + ?Sized>(&self, drives: &[BranchDrive], rng: &mut R) -> Result<ComplexAmplitude> {
        if drives.len() > self.branches.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} drives for {} branches",
                drives.len(),
                self.branches.len()
            )));
        }
        let split = self.splitter.split(Complex64::new(1.0, 0.0));
        let mut ports = vec![Complex64::new(0.0, 0.0); self.n_ports()];
        for (j, d) in drives.iter().enumerate() {
            let jitter = if self.phase_drift_std_rad > 0.0 {
                let n: f64 = StandardNormal.sample(rng);
                n * self.phase_drift_std_rad
            } else {
                0.0
            };
            ports[j + 1] = self.branch_field(j, *d, split.branch_fields[j], jitter)?;
        }
        let n = self.n_ports();
        Ok(combine(&ports, n)? / self.value_scale)
    }

    /// Photocurrent for the given drives with an optional extra phase on
    /// the summed signal (used for phase-stepping measurements).
    pub fn photocurrent<R: Rng + ?Sized>(&self, drives: &[BranchDrive], signal_phase: f64, rng: &mut R) -> Result<f64> {
        let s = self.signal_field(drives, rng)? * Complex64::from_polar(1.0, signal_phase);
        Ok(photodetect(s, &self.detection, rng))
    }

    pub fn measure<R: Rng + ?Sized>(&self, drives: &[BranchDrive], rng: &mut R) -> Result<f64> {
        let i = self.photocurrent(drives, 0.0, rng)?;
        decode(i, &self.detection)
    }

    /// Analog dot product of values in `[-1, 1]`; `x` rides on the slow
    /// modulators and `w` on the fast ones after digital pre-distortion.
    pub fn dot_product<R: Rng + ?Sized>(&self, x: &[f64], w: &[f64], rng: &mut R) -> Result<f64> {
        for &v in w {
            if !(v.abs() <= 1.0 + 1e-12) {
                return Err(Error::EncodingOutOfRange { value: v });
            }
        }
        let mut hw = [0.0; 16];
        let mut hw_vec;
        let hw: &mut [f64] = if w.len() <= 16 {
            &mut hw[..w.len()]
        } else {
            hw_vec = vec![0.0; w.len()];
            &mut hw_vec
        };
        for (j, (h, &v)) in hw.iter_mut().zip(w).enumerate() {
            let pd = self.branches.get(j).map(|b| b.predistortion).unwrap_or_default();
            *h = pd.apply(v).clamp(-self.weight_headroom, self.weight_headroom);
        }
        self.dot_product_hw(x, hw, rng)
    }

    /// Dot product with hardware weights in `[-headroom, headroom]`, bypassing
    /// the pre-distortion table.
    pub fn dot_product_hw<R: Rng + ?Sized>(&self, x: &[f64], w_hw: &[f64], rng: &mut R) -> Result<f64> {
        if x.len() != w_hw.len() {
            return Err(Error::DimensionMismatch(format!("x has {} values, w has {}", x.len(), w_hw.len())));
        }
        if x.len() > self.active {
            return Err(Error::ChunkWidthExceedsChip { chunk: x.len(), active: self.active });
        }
        let mut drives = [BranchDrive::CLOSED; 16];
        let mut drives_vec;
        let drives: &mut [BranchDrive] = if x.len() <= 16 {
            &mut drives[..x.len()]
        } else {
            drives_vec = vec![BranchDrive::CLOSED; x.len()];
            &mut drives_vec
        };
        for (j, d) in drives.iter_mut().enumerate() {
            if !(w_hw[j].abs() <= self.weight_headroom + 1e-12) {
                return Err(Error::EncodingOutOfRange { value: w_hw[j] / self.weight_headroom });
            }
            let amp = (self.branches[j].drive_error.apply(w_hw[j]) / self.weight_headroom).clamp(-1.0, 1.0);
            *d = BranchDrive { slow: encode_value(x[j])?, fast: amp.asin() };
        }
        self.measure(drives, rng)
    }

    /// Power tapped after the addressed modulator, in dB relative to the chip input.
    pub fn monitor_power(&self, branch: usize, slot: ModSlot, drive: BranchDrive) -> Result<f64> {
        self.check_branch(branch)?;
        let b = &self.branches[branch];
        let split = self.splitter.split(Complex64::new(1.0, 0.0));
        let mut e = b.slow_mod.field(split.branch_fields[branch], drive.slow, self.encoding_p_pi_mw)?;
        if slot == ModSlot::Fast {
            e = b.fast_mod.field(e * (1.0 - b.monitor_tap_fraction).sqrt(), drive.fast, self.encoding_p_pi_mw)?;
        }
        let p = b.monitor_tap_fraction * e.norm_sqr();
        Ok(if p > 0.0 { (10.0 * p.log10()).max(MONITOR_FLOOR_DB) } else { MONITOR_FLOOR_DB })
    }

    /// Branch drives for a measurement that opens only `open` (all others closed).
    pub fn solo_drives(&self, open: usize, drive: BranchDrive) -> Vec<BranchDrive> {
        let mut d = vec![BranchDrive::CLOSED; self.active.max(open + 1)];
        d[open] = drive;
        d
    }
}
