//! Bias-null search by second-harmonic minimisation.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;

use super::fit::golden_min;
use super::measure::measure_field;
use crate::optics::{BranchDrive, ChipState, ModSlot};
use crate::{Error, Result};

/// Samples per period of the triangular test drive.
pub const WAVEFORM_SAMPLES: usize = 64;
pub const GRID_POINTS: usize = 64;

/// Symmetric triangle spanning `±amplitude`; half-wave symmetric, so a
/// correctly biased modulator answers with odd harmonics only.
pub fn triangle_drive(samples: usize, amplitude: f64) -> Vec<f64> {
    (0..samples)
        .map(|k| {
            let t = k as f64 / samples as f64;
            let tri = if t < 0.5 { 4.0 * t - 1.0 } else { 3.0 - 4.0 * t };
            amplitude * tri
        })
        .collect()
}

/// Magnitude of DFT bin `k` of a complex waveform.
pub fn harmonic(waveform: &[Complex64], k: usize) -> f64 {
    let n = waveform.len() as f64;
    waveform
        .iter()
        .enumerate()
        .map(|(i, v)| v * Complex64::from_polar(1.0, -2.0 * PI * (k * i) as f64 / n))
        .sum::<Complex64>()
        .norm()
}

/// Output waveform of one modulator under the triangular drive with the
/// given bias setting.
pub fn response_waveform<R: Rng + ?Sized>(
    chip: &ChipState,
    branch: usize,
    slot: ModSlot,
    drive: &[f64],
    rng: &mut R,
) -> Result<Vec<Complex64>> {
    drive
        .iter()
        .map(|&theta| {
            let d = match slot {
                ModSlot::Slow => BranchDrive { slow: theta, fast: PI / 2.0 },
                ModSlot::Fast => BranchDrive { slow: PI / 2.0, fast: theta },
            };
            measure_field(chip, &chip.solo_drives(branch, d), rng)
        })
        .collect()
}

/// Bias setting that nulls the addressed modulator, in `[-π/2, π/2)`.
///
/// The chip itself is not modified.
pub fn calibrate_bias<R: Rng + ?Sized>(chip: &ChipState, branch: usize, slot: ModSlot, rng: &mut R) -> Result<f64> {
    if branch >= chip.branches.len() {
        return Err(Error::IndexOutOfRange { index: branch, len: chip.branches.len() });
    }
    let drive = triangle_drive(WAVEFORM_SAMPLES, PI / 2.0);
    let mut probe = chip.clone();
    let mut second = |b: f64, rng: &mut R| -> Result<(f64, f64)> {
        probe.branches[branch].modulator_mut(slot).bias_setting_rad = b;
        let w = response_waveform(&probe, branch, slot, &drive, rng)?;
        Ok((harmonic(&w, 2), harmonic(&w, 1)))
    };

    let step = PI / GRID_POINTS as f64;
    let mut curve = Vec::with_capacity(GRID_POINTS);
    for i in 0..GRID_POINTS {
        curve.push(second(-PI / 2.0 + i as f64 * step, rng)?);
    }
    let (lo2, hi2) = curve.iter().fold((f64::MAX, f64::MIN), |(l, h), c| (l.min(c.0), h.max(c.0)));
    let signal = curve.iter().map(|c| c.0 + c.1).fold(0.0, f64::max);
    let scale = WAVEFORM_SAMPLES as f64;
    if signal < 1e-9 * scale || hi2 - lo2 < 1e-9 * scale {
        return Err(Error::NoMinimumFound(format!(
            "branch {branch} {slot:?}: second-harmonic response is flat"
        )));
    }
    let k = curve
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .0.total_cmp(&b.1 .0))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let center = -PI / 2.0 + k as f64 * step;
    let mut err = None;
    let best = golden_min(center - step, center + step, 1e-7, |b| match second(b, rng) {
        Ok(v) => v.0,
        Err(e) => {
            err.get_or_insert(e);
            f64::MAX
        }
    });
    if let Some(e) = err {
        return Err(e);
    }
    Ok(wrap_half(best))
}

/// Wraps into `[-π/2, π/2)`.
fn wrap_half(b: f64) -> f64 {
    (b + PI / 2.0).rem_euclid(PI) - PI / 2.0
}
