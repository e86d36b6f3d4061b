//! Variable-density Poisson-disk k-space masks.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::rng::{self, purpose};
use crate::{Error, Result};

/// How a sparsity target is read: as the fraction of zeroed samples or of
/// retained ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SparsityReading {
    #[default]
    Zeroed,
    Retained,
}

pub const SPARSITY_TOLERANCE: f64 = 0.03;
/// Exclusion radius at the k-space center, pixels. Below the lattice
/// spacing, so the center is fully sampled.
pub const R_MIN: f64 = 0.5;
const BISECTION_STEPS: usize = 60;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mask {
    pub size: usize,
    /// Row-major on the centered grid; `true` keeps the sample.
    pub keep: Vec<bool>,
    /// Outer exclusion radius that produced a Poisson-disk mask.
    pub r_max: Option<f64>,
}

impl Mask {
    pub fn zeroed_fraction(&self) -> f64 {
        self.keep.iter().filter(|k| !**k).count() as f64 / self.keep.len() as f64
    }

    /// Dart throwing in a seeded candidate order with exclusion radius
    /// `r(d) = R_MIN + (r_max - R_MIN)·d/d_max`; `r_max` is bisected until
    /// the zeroed fraction is within tolerance of the target. The 4×4 block
    /// around DC is always kept.
    pub fn vpds(size: usize, target: f64, reading: SparsityReading, seed: u64) -> Result<Self> {
        if size < 8 {
            return Err(Error::InvalidGeometry(format!("mask size {size} is below 8")));
        }
        let zeroed_target = match reading {
            SparsityReading::Zeroed => target,
            SparsityReading::Retained => 1.0 - target,
        };
        let mut order: Vec<usize> = (0..size * size).collect();
        order.shuffle(&mut rng::stream(seed, purpose::MASK, size as u64));
        let (mut lo, mut hi) = (R_MIN, size as f64);
        let mut best = Self::throw(size, &order, R_MIN);
        for _ in 0..BISECTION_STEPS {
            let mid = 0.5 * (lo + hi);
            let m = Self::throw(size, &order, mid);
            let z = m.zeroed_fraction();
            if (z - zeroed_target).abs() < (best.zeroed_fraction() - zeroed_target).abs() {
                best = m;
            }
            if (z - zeroed_target).abs() <= SPARSITY_TOLERANCE / 4.0 {
                break;
            }
            if z < zeroed_target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let achieved = best.zeroed_fraction();
        if (achieved - zeroed_target).abs() > SPARSITY_TOLERANCE {
            return Err(Error::SparsityUnreachable { target: zeroed_target, achieved });
        }
        Ok(best)
    }

    fn throw(size: usize, order: &[usize], r_max: f64) -> Self {
        let d_max = (size / 2) as f64 * std::f64::consts::SQRT_2;
        let radius = |i: usize| radius_at(size, i, r_max, d_max);
        let mut keep = vec![false; size * size];
        let mut accepted: Vec<(f64, f64, f64)> = Vec::new();
        for i in dc_block(size) {
            keep[i] = true;
            accepted.push(((i / size) as f64, (i % size) as f64, radius(i)));
        }
        for &i in order {
            if keep[i] {
                continue;
            }
            let (y, x, r) = ((i / size) as f64, (i % size) as f64, radius(i));
            let clear = accepted.iter().all(|&(qy, qx, qr)| {
                let d2 = (y - qy).powi(2) + (x - qx).powi(2);
                d2 >= r.max(qr).powi(2)
            });
            if clear {
                keep[i] = true;
                accepted.push((y, x, r));
            }
        }
        Self { size, keep, r_max: Some(r_max) }
    }
}

/// Exclusion radius of sample `i` for a given outer radius.
pub fn radius_at(size: usize, i: usize, r_max: f64, d_max: f64) -> f64 {
    let c = (size / 2) as f64;
    let d = (((i / size) as f64 - c).powi(2) + ((i % size) as f64 - c).powi(2)).sqrt();
    R_MIN + (r_max - R_MIN) * d / d_max
}

/// Indices of the 4×4 block centered on DC.
pub fn dc_block(size: usize) -> impl Iterator<Item = usize> {
    let c = size / 2;
    (c - 2..c + 2).flat_map(move |y| (c - 2..c + 2).map(move |x| y * size + x))
}
