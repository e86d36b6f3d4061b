//! Calibration of a deviated chip: transmission fits, bias nulling, tail
//! phase alignment and in-situ backpropagation control.

pub mod align;
pub mod bias;
pub mod bpc;
pub mod fit;
pub mod measure;

use serde::{Deserialize, Serialize};

pub use align::{align_phases, in_phase_maximum, open_field, AlignmentCurve};
pub use bias::calibrate_bias;
pub use bpc::{
    bpc, bpc_gradient, calibrate_predistortion, gradient_from_outputs, measure_outputs, measured_mse, BpcBatch,
    BpcConfig, BpcReport, PredistortionReport,
};
pub use fit::{default_sweep_mw, fit_sine, fit_transmission_curve, measure_transmission};
pub use measure::measure_field;

use crate::optics::{ChipState, LinearMap, ModSlot, TransmissionCurveFit};
use crate::rng::{self, purpose};
use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchCalibration {
    pub branch: usize,
    pub slow_bias_rad: f64,
    pub fast_bias_rad: f64,
    pub tail_phase_rad: f64,
    pub slow_fit: TransmissionCurveFit,
    pub fast_fit: TransmissionCurveFit,
    pub predistortion: LinearMap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub seed: u64,
    pub branches: Vec<BranchCalibration>,
    pub alignment: Vec<AlignmentCurve>,
    pub bpc: Option<PredistortionReport>,
}

/// Points per transmission sweep in the coarse calibration.
pub const FIT_POINTS: usize = 101;

/// Bias nulling, phase alignment and gain equalisation from the fitted
/// transmission amplitudes. What remains afterwards is the weight-drive
/// error that only in-situ measurements reveal.
pub fn coarse_calibrate(chip: &mut ChipState, seed: u64) -> Result<CalibrationReport> {
    let mut r = rng::stream(seed, purpose::CALIBRATION, 0);
    let m = chip.active;
    let mut biases = Vec::with_capacity(m);
    for j in 0..m {
        let slow = calibrate_bias(chip, j, ModSlot::Slow, &mut r)?;
        chip.branches[j].slow_mod.bias_setting_rad = slow;
        let fast = calibrate_bias(chip, j, ModSlot::Fast, &mut r)?;
        chip.branches[j].fast_mod.bias_setting_rad = fast;
        biases.push((slow, fast));
    }
    let alignment = align_phases(chip, &mut r)?;
    let mut branches = Vec::with_capacity(m);
    for (j, (slow_bias, fast_bias)) in biases.into_iter().enumerate() {
        let sweep = default_sweep_mw(chip, j, ModSlot::Slow, FIT_POINTS);
        let slow_fit = fit_transmission_curve(chip, j, ModSlot::Slow, &sweep, &mut r)?;
        let sweep = default_sweep_mw(chip, j, ModSlot::Fast, FIT_POINTS);
        let fast_fit = fit_transmission_curve(chip, j, ModSlot::Fast, &sweep, &mut r)?;
        let predistortion = LinearMap { gain: chip.weight_headroom / fast_fit.a, offset: 0.0 };
        let b = &mut chip.branches[j];
        b.slow_mod.transmission_fit = Some(slow_fit);
        b.fast_mod.transmission_fit = Some(fast_fit);
        b.predistortion = predistortion;
        branches.push(BranchCalibration {
            branch: j,
            slow_bias_rad: slow_bias,
            fast_bias_rad: fast_bias,
            tail_phase_rad: b.tail_phase_rad,
            slow_fit,
            fast_fit,
            predistortion,
        });
    }
    Ok(CalibrationReport { seed, branches, alignment, bpc: None })
}

/// Coarse calibration followed by a BPC-derived pre-distortion table.
pub fn full_calibrate(chip: &mut ChipState, bpc_config: &BpcConfig, seed: u64) -> Result<CalibrationReport> {
    let mut report = coarse_calibrate(chip, seed)?;
    report.bpc = Some(calibrate_predistortion(chip, 0.8, bpc_config, seed)?);
    for (b, c) in chip.branches.iter().zip(report.branches.iter_mut()) {
        c.predistortion = b.predistortion;
    }
    Ok(report)
}
