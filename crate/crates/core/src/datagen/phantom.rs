use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::{self, purpose};
use crate::{Error, Result};

/// Normalized ellipse phantom.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Phantom {
    pub size: usize,
    pub seed: u64,
    /// Row-major, peak 1 before `mean_removed` was subtracted.
    pub pixels: Vec<f64>,
    pub mean_removed: f64,
}

pub const MIN_SIZE: usize = 8;

/// A large "head" ellipse plus 4–11 smaller ones with additive intensities,
/// scaled to peak 1 and then centered to zero mean.
pub fn phantom(seed: u64, size: usize) -> Result<Phantom> {
    if size < MIN_SIZE {
        return Err(Error::InvalidGeometry(format!("phantom size {size} is below {MIN_SIZE}")));
    }
    let mut r = rng::stream(seed, purpose::PHANTOM, size as u64);
    let count = r.random_range(5..=12usize);
    let mut pixels = vec![0.0; size * size];
    for e in 0..count {
        let (cx, cy, a, b, value) = if e == 0 {
            (
                r.random_range(-0.1..0.1),
                r.random_range(-0.1..0.1),
                r.random_range(0.65..0.9),
                r.random_range(0.65..0.9),
                r.random_range(0.3..0.6),
            )
        } else {
            (
                r.random_range(-0.6..0.6),
                r.random_range(-0.6..0.6),
                r.random_range(0.08..0.4),
                r.random_range(0.08..0.4),
                r.random_range(0.1..0.8),
            )
        };
        let angle: f64 = r.random_range(0.0..std::f64::consts::PI);
        let (s, c) = angle.sin_cos();
        for y in 0..size {
            let v = (2 * y + 1) as f64 / size as f64 - 1.0 - cy;
            for x in 0..size {
                let u = (2 * x + 1) as f64 / size as f64 - 1.0 - cx;
                let (p, q) = (u * c + v * s, -u * s + v * c);
                if (p / a).powi(2) + (q / b).powi(2) <= 1.0 {
                    pixels[y * size + x] += value;
                }
            }
        }
    }
    let peak = pixels.iter().cloned().fold(f64::MIN, f64::max);
    // The head ellipse always covers the center pixels.
    debug_assert!(peak > 0.0);
    pixels.iter_mut().for_each(|p| *p /= peak);
    let mean = pixels.iter().sum::<f64>() / pixels.len() as f64;
    pixels.iter_mut().for_each(|p| *p -= mean);
    Ok(Phantom { size, seed, pixels, mean_removed: mean })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_normalized() {
        for seed in 0..20 {
            let p = phantom(seed, 16).unwrap();
            assert_eq!(p, phantom(seed, 16).unwrap());
            let peak = p.pixels.iter().map(|v| v + p.mean_removed).fold(f64::MIN, f64::max);
            assert!((peak - 1.0).abs() < 1e-12);
            assert!(p.pixels.iter().sum::<f64>().abs() / 256.0 < 1e-12);
        }
        assert_ne!(phantom(0, 16).unwrap().pixels, phantom(1, 16).unwrap().pixels);
    }

    #[test]
    fn histogram_spans_both_signs() {
        let (mut pos, mut neg) = (0usize, 0usize);
        for seed in 0..1000 {
            for v in phantom(seed, 8).unwrap().pixels {
                pos += (v > 0.0) as usize;
                neg += (v < 0.0) as usize;
            }
        }
        assert!(pos > 1000 && neg > 1000);
    }

    #[test]
    fn too_small_is_rejected() {
        assert!(matches!(phantom(0, 7), Err(Error::InvalidGeometry(_))));
    }
}
