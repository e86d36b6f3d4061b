use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;

use crate::optics::{BranchDrive, ChipState, DetectionMode};
use crate::Result;

/// Complex signal field (value units) recovered from three phase-stepped
/// photocurrent readings at signal phases 0, π/2 and π.
pub fn measure_field<R: Rng + ?Sized>(chip: &ChipState, drives: &[BranchDrive], rng: &mut R) -> Result<Complex64> {
    let det = &chip.detection;
    let g = det.gain;
    let e = det.reference_amplitude;
    match det.mode {
        DetectionMode::SingleEnded => {
            let i0 = chip.photocurrent(drives, 0.0, rng)?;
            let iq = chip.photocurrent(drives, PI / 2.0, rng)?;
            let ipi = chip.photocurrent(drives, PI, rng)?;
            Ok(Complex64::new((i0 - ipi) / (4.0 * e * g), ((i0 + ipi) / 2.0 - iq) / (2.0 * e * g)))
        }
        DetectionMode::Homodyne => {
            let i0 = chip.photocurrent(drives, 0.0, rng)?;
            let iq = chip.photocurrent(drives, PI / 2.0, rng)?;
            Ok(Complex64::new(i0 / (g * e), -iq / (g * e)))
        }
    }
}
