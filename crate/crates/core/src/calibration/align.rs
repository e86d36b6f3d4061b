//! Sequential tail-phase alignment.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::optics::{BranchDrive, ChipState};
use crate::Result;

pub const SWEEP_POINTS: usize = 128;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentCurve {
    pub branch: usize,
    pub tail_phase_rad: Vec<f64>,
    pub photocurrent: Vec<f64>,
    pub locked_phase_rad: f64,
}

impl AlignmentCurve {
    pub fn peak(&self) -> f64 {
        self.photocurrent.iter().cloned().fold(f64::MIN, f64::max)
    }
}

/// Aligns the active branches one after another: branch `j` is opened with
/// branches `0..j` locked and the rest closed, its tail phase is swept over
/// one period and locked at the maximum of the curve's first harmonic, which
/// averages the detector noise over the whole sweep. Returns the
/// interference curves.
pub fn align_phases<R: Rng + ?Sized>(chip: &mut ChipState, rng: &mut R) -> Result<Vec<AlignmentCurve>> {
    let mut curves = Vec::with_capacity(chip.active);
    for j in 0..chip.active {
        let mut drives = vec![BranchDrive::CLOSED; chip.active];
        drives[..=j].fill(BranchDrive::OPEN);
        let step = 2.0 * PI / SWEEP_POINTS as f64;
        let phases: Vec<f64> = (0..SWEEP_POINTS).map(|i| i as f64 * step).collect();
        let mut current = Vec::with_capacity(SWEEP_POINTS);
        for &p in &phases {
            chip.branches[j].tail_phase_rad = p;
            current.push(chip.photocurrent(&drives, 0.0, rng)?);
        }
        let harmonic: Complex64 = phases.iter().zip(&current).map(|(&p, &y)| y * Complex64::from_polar(1.0, -p)).sum();
        let locked = (-harmonic.arg()).rem_euclid(2.0 * PI);
        chip.branches[j].tail_phase_rad = locked;
        curves.push(AlignmentCurve { branch: j, tail_phase_rad: phases, photocurrent: current, locked_phase_rad: locked });
    }
    Ok(curves)
}

/// `Σ|A_n|/√n` over the active branches at full transparency: the largest
/// combined amplitude the chip can reach (value units).
pub fn in_phase_maximum(chip: &ChipState) -> Result<f64> {
    let mut probe = chip.clone();
    probe.phase_drift_std_rad = 0.0;
    let mut total = 0.0;
    let mut rng = crate::rng::stream(0, 0, 0);
    for j in 0..chip.active {
        total += probe.signal_field(&probe.solo_drives(j, BranchDrive::OPEN), &mut rng)?.norm();
    }
    Ok(total)
}

/// Combined signal with every active branch at full transparency.
pub fn open_field(chip: &ChipState) -> Result<Complex64> {
    let mut probe = chip.clone();
    probe.phase_drift_std_rad = 0.0;
    let mut rng = crate::rng::stream(0, 0, 0);
    probe.signal_field(&vec![BranchDrive::OPEN; chip.active], &mut rng)
}
