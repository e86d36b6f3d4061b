use std::f64::consts::FRAC_PI_4;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::encode::{mf_encode, radon_encode, vpds_encode, EncodedExample, Process};
use super::mask::{Mask, SparsityReading};
use super::phantom::phantom;
use super::radon::min_rays;
use crate::rng::{self, purpose};
use crate::{Error, Exec, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub process: Process,
    pub count: usize,
    pub size: usize,
    pub seed: u64,
    /// Even-row phase drawn uniformly from this range per example.
    pub mf_theta_range: (f64, f64),
    pub vpds_sparsity: f64,
    pub sparsity_reading: SparsityReading,
    pub radon_angles: usize,
    /// `None` uses one ray more than the image diagonal.
    pub radon_rays: Option<usize>,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            process: Process::Mf,
            count: 690,
            size: 32,
            seed: 0,
            mf_theta_range: (FRAC_PI_4, 3.0 * FRAC_PI_4),
            vpds_sparsity: 0.6,
            sparsity_reading: SparsityReading::Zeroed,
            radon_angles: 60,
            radon_rays: None,
        }
    }
}

impl DatasetConfig {
    pub fn rays(&self) -> usize {
        self.radon_rays.unwrap_or(min_rays(self.size) + 1)
    }

    pub fn input_len(&self) -> usize {
        match self.process {
            Process::Mf | Process::Vpds => 2 * self.size * self.size,
            Process::Radon => self.radon_angles * self.rays(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub config: DatasetConfig,
    pub examples: Vec<EncodedExample>,
    pub phantom_seeds: Vec<u64>,
    pub mf_thetas: Vec<f64>,
    pub mask: Option<Mask>,
    pub train: Vec<usize>,
    pub val: Vec<usize>,
}

impl Dataset {
    pub fn train_examples(&self) -> Vec<EncodedExample> {
        self.train.iter().map(|&i| self.examples[i].clone()).collect()
    }

    pub fn val_examples(&self) -> Vec<EncodedExample> {
        self.val.iter().map(|&i| self.examples[i].clone()).collect()
    }
}

/// Train/validation sizes in the 2700:400 proportion (training share rounded down).
pub fn split_sizes(count: usize) -> (usize, usize) {
    let train = count * 2700 / 3100;
    (train, count - train)
}

pub fn build_dataset(config: &DatasetConfig, exec: Exec) -> Result<Dataset> {
    if config.count < 10 {
        return Err(Error::Config(format!("dataset count {} is below 10", config.count)));
    }
    let n = config.size;
    let mask = match config.process {
        Process::Vpds => Some(Mask::vpds(n, config.vpds_sparsity, config.sparsity_reading, rng::derive_seed(config.seed, purpose::MASK, 0))?),
        _ => None,
    };
    let phantom_seeds: Vec<u64> = (0..config.count).map(|i| rng::derive_seed(config.seed, purpose::PHANTOM, i as u64)).collect();
    let (lo, hi) = config.mf_theta_range;
    let mf_thetas: Vec<f64> = (0..config.count)
        .map(|i| {
            if config.process == Process::Mf && hi > lo {
                rng::stream(config.seed, purpose::DATASET, i as u64 + 1).random_range(lo..hi)
            } else {
                lo
            }
        })
        .collect();
    let rays = config.rays();
    let examples = exec.try_map(config.count, |i| {
        let img = phantom(phantom_seeds[i], n)?.pixels;
        match config.process {
            Process::Mf => mf_encode(&img, n, mf_thetas[i]),
            Process::Vpds => vpds_encode(&img, n, mask.as_ref().expect("mask built for vPDS")),
            Process::Radon => radon_encode(&img, n, config.radon_angles, rays),
        }
    })?;
    let mut order: Vec<usize> = (0..config.count).collect();
    order.shuffle(&mut rng::stream(config.seed, purpose::DATASET, 0));
    let (n_train, _) = split_sizes(config.count);
    let mut train = order[..n_train].to_vec();
    let mut val = order[n_train..].to_vec();
    train.sort_unstable();
    val.sort_unstable();
    Ok(Dataset { config: config.clone(), examples, phantom_seeds, mf_thetas, mask, train, val })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_follows_the_ratio() {
        assert_eq!(split_sizes(690), (600, 90));
        assert_eq!(split_sizes(3100), (2700, 400));
    }

    #[test]
    fn split_is_disjoint_and_deterministic() {
        let cfg = DatasetConfig { count: 40, size: 8, ..Default::default() };
        let a = build_dataset(&cfg, Exec::Parallel).unwrap();
        let b = build_dataset(&cfg, Exec::Sequential).unwrap();
        assert_eq!(a, b);
        assert!(a.train.iter().all(|i| !a.val.contains(i)));
        assert_eq!(a.train.len() + a.val.len(), 40);
        let other = build_dataset(&DatasetConfig { seed: 1, ..cfg }, Exec::Sequential).unwrap();
        assert_ne!(a.train, other.train);
    }

    #[test]
    fn every_process_builds_with_matching_input_length() {
        for process in Process::ALL {
            let cfg = DatasetConfig { process, count: 12, size: 16, radon_angles: 10, ..Default::default() };
            let d = build_dataset(&cfg, Exec::Sequential).unwrap();
            assert!(d.examples.iter().all(|e| e.input.len() == cfg.input_len() && e.truth.len() == 256));
            assert_eq!(d.mask.is_some(), process == Process::Vpds);
        }
        assert_eq!(DatasetConfig::default().rays(), 47);
    }

    #[test]
    fn tiny_count_is_rejected() {
        assert!(build_dataset(&DatasetConfig { count: 9, ..Default::default() }, Exec::Sequential).is_err());
    }
}
