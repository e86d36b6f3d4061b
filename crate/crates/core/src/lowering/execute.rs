use super::schedule::Schedule;
use crate::optics::ChipState;
use crate::rng::{self, purpose};
use crate::{Error, Exec, Result};

/// Steps per noise stream; blocks are the unit of parallel work.
pub const BLOCK_STEPS: usize = 2048;

/// Runs every step through the chip and accumulates digitally.
///
/// Block `b` draws its shot noise from its own stream derived from the chip
/// seed and `seed`, and contributions are summed in step order, so the
/// result does not depend on `exec`.
pub fn execute_schedule(schedule: &Schedule, chip: &ChipState, seed: u64, exec: Exec) -> Result<Vec<f64>> {
    if schedule.chunk_width > chip.active {
        return Err(Error::ChunkWidthExceedsChip { chunk: schedule.chunk_width, active: chip.active });
    }
    let steps = schedule.step_count();
    let run_seed = rng::derive_seed(chip.rng_seed, purpose::SHOT_NOISE, seed);
    let blocks = exec.try_map(steps.div_ceil(BLOCK_STEPS), |b| {
        let mut r = rng::stream(run_seed, purpose::SHOT_NOISE, b as u64);
        (b * BLOCK_STEPS..((b + 1) * BLOCK_STEPS).min(steps))
            .map(|s| {
                let (x, w) = schedule.step(s);
                chip.dot_product(x, w, &mut r)
            })
            .collect::<Result<Vec<f64>>>()
    })?;
    let dots: Vec<f64> = blocks.into_iter().flatten().collect();
    Ok(schedule.accumulate(&dots))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lowering::decompose_mvm;
    use crate::optics::{ChipConfig, DeviationProfile};
    use crate::rng::SimRng;
    use crate::tensor::Matrix;
    use rand::{Rng, SeedableRng};

    #[test]
    fn ideal_chip_matches_dense() {
        let chip = ChipState::ideal(&ChipConfig::default(), 0).unwrap();
        let mut r = SimRng::seed_from_u64(0);
        let a = Matrix::from_vec(9, 4, (0..36).map(|_| r.random_range(-2.0..2.0)).collect()).unwrap();
        let x: Vec<f64> = (0..9).map(|_| r.random_range(-1.0..1.0)).collect();
        let s = decompose_mvm(&x, &a, 3).unwrap();
        let out = execute_schedule(&s, &chip, 0, Exec::Sequential).unwrap();
        for (p, q) in out.iter().zip(a.vec_mul(&x).unwrap()) {
            assert!((p - q).abs() < 1e-9);
        }
        let zero = execute_schedule(&decompose_mvm(&[0.0; 9], &a, 3).unwrap(), &chip, 0, Exec::Sequential).unwrap();
        assert!(zero.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn too_wide_chunks_are_rejected() {
        let chip = ChipState::ideal(&ChipConfig::default(), 0).unwrap();
        let s = decompose_mvm(&[1.0; 8], &Matrix::zeros(8, 1), 4).unwrap();
        assert!(matches!(
            execute_schedule(&s, &chip, 0, Exec::Sequential),
            Err(Error::ChunkWidthExceedsChip { chunk: 4, active: 3 })
        ));
    }

    #[test]
    fn policies_give_identical_bits() {
        let cfg = ChipConfig { photocurrent_noise_std: 0.1, phase_drift_std_rad: 0.01, ..Default::default() };
        let chip = ChipState::new(&cfg, &DeviationProfile::coarse(), 3).unwrap();
        let mut r = SimRng::seed_from_u64(1);
        let a = Matrix::from_vec(40, 300, (0..12000).map(|_| r.random_range(-1.0..1.0)).collect()).unwrap();
        let x: Vec<f64> = (0..40).map(|_| r.random_range(-1.0..1.0)).collect();
        let s = decompose_mvm(&x, &a, 3).unwrap();
        let seq = execute_schedule(&s, &chip, 7, Exec::Sequential).unwrap();
        let par = execute_schedule(&s, &chip, 7, Exec::Parallel).unwrap();
        assert_eq!(
            seq.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            par.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }
}
