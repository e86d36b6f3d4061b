//! In-situ backpropagation control (BPC): gradient descent on the hardware
//! weights using measured chip outputs.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::optics::{ChipState, LinearMap};
use crate::rng::{self, purpose};
use crate::stats::normalized_residual_std;
use crate::{Error, Result};

/// Residual growth over the starting std that, after three consecutive
/// increases, counts as divergence.
pub const DIVERGENCE_FACTOR: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BpcBatch {
    /// `N × M` inputs, one row per time step.
    pub x: Vec<Vec<f64>>,
    pub w_target: Vec<f64>,
    pub y_hat: Vec<f64>,
}

impl BpcBatch {
    pub fn new(x: Vec<Vec<f64>>, w_target: Vec<f64>) -> Result<Self> {
        if x.is_empty() || w_target.is_empty() {
            return Err(Error::EmptyInput);
        }
        if let Some(r) = x.iter().find(|r| r.len() != w_target.len()) {
            return Err(Error::DimensionMismatch(format!(
                "batch row of length {} for {} weights",
                r.len(),
                w_target.len()
            )));
        }
        let y_hat = x.iter().map(|r| r.iter().zip(&w_target).map(|(a, b)| a * b).sum()).collect();
        Ok(Self { x, w_target, y_hat })
    }

    /// `n` rows drawn uniformly from `[-1, 1]^M`.
    pub fn uniform<R: Rng + ?Sized>(w_target: &[f64], n: usize, rng: &mut R) -> Result<Self> {
        let x = (0..n)
            .map(|_| (0..w_target.len()).map(|_| rng.random_range(-1.0..=1.0)).collect())
            .collect();
        Self::new(x, w_target.to_vec())
    }

    /// Four rows of a Hadamard matrix (columns mutually orthogonal), for up to three weights.
    pub fn hadamard(w_target: &[f64]) -> Result<Self> {
        if w_target.len() > 3 {
            return Err(Error::DimensionMismatch("hadamard batch supports at most 3 weights".into()));
        }
        let h = [[1.0, 1.0, 1.0], [-1.0, 1.0, -1.0], [1.0, -1.0, -1.0], [-1.0, -1.0, 1.0]];
        Self::new(h.iter().map(|r| r[..w_target.len()].to_vec()).collect(), w_target.to_vec())
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

/// Runs every time step of the batch through the chip with hardware weights `w_hw`.
pub fn measure_outputs<R: Rng + ?Sized>(chip: &ChipState, batch: &BpcBatch, w_hw: &[f64], rng: &mut R) -> Result<Vec<f64>> {
    batch.x.iter().map(|x| chip.dot_product_hw(x, w_hw, rng)).collect()
}

/// `∂L/∂w_j = (2/N)·Σ_i (y_i − ŷ_i)·x_ij` from measured outputs `y`.
pub fn gradient_from_outputs(batch: &BpcBatch, y: &[f64]) -> Vec<f64> {
    let n = batch.len() as f64;
    let mut g = vec![0.0; batch.w_target.len()];
    for ((x, &yi), &yh) in batch.x.iter().zip(y).zip(&batch.y_hat) {
        let r = yi - yh;
        for (gj, &xj) in g.iter_mut().zip(x) {
            *gj += 2.0 / n * r * xj;
        }
    }
    g
}

pub fn bpc_gradient<R: Rng + ?Sized>(chip: &ChipState, batch: &BpcBatch, w_hw: &[f64], rng: &mut R) -> Result<Vec<f64>> {
    if batch.is_empty() {
        return Err(Error::EmptyInput);
    }
    let y = measure_outputs(chip, batch, w_hw, rng)?;
    Ok(gradient_from_outputs(batch, &y))
}

/// Mean squared error of the measured outputs.
pub fn measured_mse<R: Rng + ?Sized>(chip: &ChipState, batch: &BpcBatch, w_hw: &[f64], rng: &mut R) -> Result<f64> {
    let y = measure_outputs(chip, batch, w_hw, rng)?;
    Ok(y.iter().zip(&batch.y_hat).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / batch.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BpcConfig {
    pub max_iters: usize,
    /// 1.5 is the Newton step for inputs uniform on `[-1, 1]` (Hessian `2/3·I`).
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Stop once the residual std changes by less than this.
    pub tolerance: f64,
}

impl Default for BpcConfig {
    fn default() -> Self {
        Self { max_iters: 10, learning_rate: 1.5, batch_size: 250, tolerance: 1e-4 }
    }
}

/// `(expected, measured)` pairs of one batch.
pub type Samples = Vec<(f64, f64)>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BpcReport {
    pub w_target: Vec<f64>,
    pub residual_std_before: f64,
    pub residual_std_after: f64,
    /// Residual std of every measured batch; entry 0 is before any update.
    pub std_history: Vec<f64>,
    pub gradient_history: Vec<Vec<f64>>,
    pub weight_history: Vec<Vec<f64>>,
    pub iterations: usize,
    pub converged: bool,
    pub samples_before: Samples,
    pub samples_after: Samples,
}

impl BpcReport {
    pub fn final_weights(&self) -> &[f64] {
        self.weight_history.last().map(Vec::as_slice).unwrap_or(&[])
    }

    /// Residual std after at most `iters` updates.
    pub fn std_after(&self, iters: usize) -> f64 {
        self.std_history[iters.min(self.std_history.len() - 1)]
    }
}

/// Gradient descent on the hardware weights for one target weight vector.
/// Every iteration measures a fresh batch drawn from `batch_seed`.
pub fn bpc(chip: &ChipState, w_target: &[f64], config: &BpcConfig, batch_seed: u64) -> Result<BpcReport> {
    if w_target.len() > chip.active {
        return Err(Error::ChunkWidthExceedsChip { chunk: w_target.len(), active: chip.active });
    }
    if config.batch_size == 0 {
        return Err(Error::EmptyInput);
    }
    let h = chip.weight_headroom;
    let mut w: Vec<f64> = w_target
        .iter()
        .enumerate()
        .map(|(j, &t)| chip.branches[j].predistortion.apply(t).clamp(-h, h))
        .collect();
    let shot_seed = rng::derive_seed(chip.rng_seed, purpose::BPC_BATCH, batch_seed);
    let run = |it: u64, w: &[f64]| -> Result<(BpcBatch, Vec<f64>, f64)> {
        let batch = BpcBatch::uniform(w_target, config.batch_size, &mut rng::stream(batch_seed, purpose::BPC_BATCH, it))?;
        let y = measure_outputs(chip, &batch, w, &mut rng::stream(shot_seed, purpose::SHOT_NOISE, it))?;
        let s = normalized_residual_std(&y, &batch.y_hat);
        Ok((batch, y, s))
    };
    let pairs = |b: &BpcBatch, y: &[f64]| b.y_hat.iter().cloned().zip(y.iter().cloned()).collect::<Samples>();

    let (mut batch, mut y, std0) = run(0, &w)?;
    let samples_before = pairs(&batch, &y);
    let mut report = BpcReport {
        w_target: w_target.to_vec(),
        residual_std_before: std0,
        residual_std_after: std0,
        std_history: vec![std0],
        gradient_history: Vec::new(),
        weight_history: vec![w.clone()],
        iterations: 0,
        converged: false,
        samples_before,
        samples_after: Vec::new(),
    };
    let mut increases = 0;
    let mut prev = std0;
    for it in 1..=config.max_iters {
        let g = gradient_from_outputs(&batch, &y);
        for (wj, gj) in w.iter_mut().zip(&g) {
            *wj = (*wj - config.learning_rate * gj).clamp(-h, h);
        }
        let (b, yy, s) = run(it as u64, &w)?;
        batch = b;
        y = yy;
        report.gradient_history.push(g);
        report.weight_history.push(w.clone());
        report.std_history.push(s);
        report.iterations = it;
        increases = if s > prev { increases + 1 } else { 0 };
        // jitter at the noise floor can rise three times in a row and
        // creep past the start; real divergence grows geometrically
        if increases >= 3 && s > DIVERGENCE_FACTOR * std0 {
            return Err(Error::Diverged { iterations: it });
        }
        if (prev - s).abs() < config.tolerance {
            report.converged = true;
            break;
        }
        prev = s;
    }
    report.residual_std_after = *report.std_history.last().unwrap_or(&std0);
    report.samples_after = pairs(&batch, &y);
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredistortionReport {
    pub level: f64,
    pub positive: BpcReport,
    pub negative: BpcReport,
    pub maps: Vec<LinearMap>,
}

/// Runs BPC at uniform targets `+level` and `-level` and stores the
/// resulting per-branch linear maps as the chip's pre-distortion table.
pub fn calibrate_predistortion(chip: &mut ChipState, level: f64, config: &BpcConfig, seed: u64) -> Result<PredistortionReport> {
    if !(level > 0.0 && level <= 1.0) {
        return Err(Error::Config(format!("pre-distortion level {level} outside (0, 1]")));
    }
    let m = chip.active;
    let positive = bpc(chip, &vec![level; m], config, rng::derive_seed(seed, purpose::CALIBRATION, 0))?;
    let negative = bpc(chip, &vec![-level; m], config, rng::derive_seed(seed, purpose::CALIBRATION, 1))?;
    let (wp, wn) = (positive.final_weights(), negative.final_weights());
    let maps: Vec<LinearMap> = (0..m)
        .map(|j| LinearMap { gain: (wp[j] - wn[j]) / (2.0 * level), offset: (wp[j] + wn[j]) / 2.0 })
        .collect();
    for (b, map) in chip.branches.iter_mut().zip(&maps) {
        b.predistortion = *map;
    }
    Ok(PredistortionReport { level, positive, negative, maps })
}
