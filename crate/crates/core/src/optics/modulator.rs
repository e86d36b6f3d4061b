//! Push-pull thermo-optic modulators.
//!
//! Both arms carry a common bias power `p0_bias_mw`; the drive pushes one arm
//! up and the other down by the same signal power. The thermal phase of an
//! arm is `π·P/P_π`, so with matched arms the field amplitude at the null
//! bias point is `sin(drive)` with no residual phase. Mismatched `P_π`
//! leaves a drive-dependent phase rotation that single-ended detection turns
//! into nonlinearity.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Field amplitude in the dimensionless units of the chip model.
pub type ComplexAmplitude = Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseShifterParams {
    pub p_pi_mw: f64,
    pub r_ohm: f64,
    pub p0_bias_mw: f64,
}

impl Default for PhaseShifterParams {
    fn default() -> Self {
        Self { p_pi_mw: 1.81, r_ohm: 1600.0, p0_bias_mw: 2.28 }
    }
}

impl PhaseShifterParams {
    /// Largest `|Δφ|` accepted by [`voltages_for_phase`].
    pub fn max_phase_difference(&self) -> f64 {
        2.0 * PI * self.p0_bias_mw / self.p_pi_mw
    }
}

/// Arm voltages that realise the inter-arm phase difference `delta_phi`.
///
/// Each arm dissipates `P0 ± Δφ/(2π)·P_π`; the voltage follows from
/// `V = sqrt(P·R)` with `P` in watts.
pub fn voltages_for_phase(delta_phi: f64, params: &PhaseShifterParams) -> Result<(f64, f64)> {
    let shift = delta_phi / (2.0 * PI) * params.p_pi_mw;
    let upper = params.p0_bias_mw + shift;
    let lower = params.p0_bias_mw - shift;
    if upper < 0.0 || lower < 0.0 || !delta_phi.is_finite() {
        return Err(Error::PhaseOutOfRange {
            phase_rad: delta_phi,
            limit_rad: params.max_phase_difference(),
        });
    }
    Ok(((upper * 1e-3 * params.r_ohm).sqrt(), (lower * 1e-3 * params.r_ohm).sqrt()))
}

/// Inverse of [`voltages_for_phase`].
pub fn phase_for_voltages(v_upper: f64, v_lower: f64, params: &PhaseShifterParams) -> f64 {
    let p_upper = v_upper * v_upper / params.r_ohm * 1e3;
    let p_lower = v_lower * v_lower / params.r_ohm * 1e3;
    PI * (p_upper - p_lower) / params.p_pi_mw
}

/// `a·sin(b·x + c) + d` with `x` the per-arm drive power in mW.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransmissionCurveFit {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub r_squared: f64,
}

impl TransmissionCurveFit {
    pub fn eval(&self, x: f64) -> f64 {
        self.a * (self.b * x + self.c).sin() + self.d
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulatorState {
    pub upper: PhaseShifterParams,
    pub lower: PhaseShifterParams,
    /// Hardware bias error relative to the null point.
    pub bias_offset_rad: f64,
    /// Correction applied through the bias phase shifters.
    pub bias_setting_rad: f64,
    pub transmission_fit: Option<TransmissionCurveFit>,
}

impl Default for ModulatorState {
    fn default() -> Self {
        Self::matched(PhaseShifterParams::default())
    }
}

impl ModulatorState {
    pub fn matched(params: PhaseShifterParams) -> Self {
        Self {
            upper: params,
            lower: params,
            bias_offset_rad: 0.0,
            bias_setting_rad: 0.0,
            transmission_fit: None,
        }
    }

    /// Per-arm signal power (mW) for a drive phase, using the nominal `P_π`
    /// the encoder assumes. Equivalent to [`voltages_for_phase`] with
    /// `Δφ = 2·drive`.
    pub fn drive_power_mw(drive_phase: f64, encoding_p_pi_mw: f64) -> f64 {
        drive_phase * encoding_p_pi_mw / PI
    }

    fn power_limit_mw(&self) -> f64 {
        self.upper.p0_bias_mw.min(self.lower.p0_bias_mw)
    }

    /// Field response to a per-arm signal power `p_sig_mw`.
    pub fn field_for_power(&self, input: ComplexAmplitude, p_sig_mw: f64) -> Result<ComplexAmplitude> {
        let limit = self.power_limit_mw();
        if !(p_sig_mw.abs() <= limit) {
            return Err(Error::PhaseOutOfRange {
                phase_rad: p_sig_mw * PI / self.upper.p_pi_mw,
                limit_rad: limit * PI / self.upper.p_pi_mw,
            });
        }
        let sum = 1.0 / self.upper.p_pi_mw + 1.0 / self.lower.p_pi_mw;
        let diff = 1.0 / self.upper.p_pi_mw - 1.0 / self.lower.p_pi_mw;
        let amplitude =
            (p_sig_mw * PI / 2.0 * sum + self.bias_offset_rad + self.bias_setting_rad).sin();
        let rotation = p_sig_mw * PI / 2.0 * diff;
        Ok(input * Complex64::from_polar(amplitude, rotation))
    }

    /// Same as [`ModulatorState::field_for_power`] with the drive given as the
    /// phase argument of the nominal transmission `sin(drive)`.
    pub fn field(&self, input: ComplexAmplitude, drive_phase: f64, encoding_p_pi_mw: f64) -> Result<ComplexAmplitude> {
        self.field_for_power(input, Self::drive_power_mw(drive_phase, encoding_p_pi_mw))
    }

    pub fn is_matched(&self) -> bool {
        self.upper.p_pi_mw == self.lower.p_pi_mw
    }
}

/// Free-function form of [`ModulatorState::field`] for the default encoder `P_π`.
pub fn modulator_field(input: ComplexAmplitude, drive_phase: f64, state: &ModulatorState) -> Result<ComplexAmplitude> {
    state.field(input, drive_phase, PhaseShifterParams::default().p_pi_mw)
}

/// Drive phase for a value in `[-1, 1]` so that `sin(drive) = value`.
pub fn encode_value(value: f64) -> Result<f64> {
    if !(value.abs() <= 1.0 + 1e-12) {
        return Err(Error::EncodingOutOfRange { value });
    }
    Ok(value.clamp(-1.0, 1.0).asin())
}
