use serde::{Deserialize, Serialize};

use crate::tensor::Matrix;
use crate::{Error, Result};

/// A lowered plan of width-`M` dot products.
///
/// Step `s` multiplies `slow[s·M..(s+1)·M]` with `fast[s·M..(s+1)·M]`, scales
/// the result by `slab_scales[slab[s]]` and adds it to accumulator `acc[s]`.
/// All stored values lie in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub chunk_width: usize,
    pub slow: Vec<f64>,
    pub fast: Vec<f64>,
    pub acc: Vec<u64>,
    pub slab: Vec<u64>,
    pub slab_scales: Vec<f64>,
    pub accumulator_count: usize,
    /// Logical shape of the accumulators, e.g. `[C, H, W]` for a convolution.
    pub output_shape: Vec<usize>,
}

/// Step count of an MVM with `K` inputs and `N` outputs on a width-`M` core.
pub fn count_mvm_steps(k: usize, n: usize, m: usize) -> u64 {
    (k.div_ceil(m) as u64) * n as u64
}

fn max_abs(v: impl Iterator<Item = f64>) -> f64 {
    v.fold(0.0, |a, b| a.max(b.abs()))
}

impl Schedule {
    pub fn new(chunk_width: usize) -> Result<Self> {
        if chunk_width == 0 {
            return Err(Error::DimensionMismatch("chunk width must be at least 1".into()));
        }
        Ok(Self {
            chunk_width,
            slow: Vec::new(),
            fast: Vec::new(),
            acc: Vec::new(),
            slab: Vec::new(),
            slab_scales: Vec::new(),
            accumulator_count: 0,
            output_shape: Vec::new(),
        })
    }

    pub fn step_count(&self) -> usize {
        self.acc.len()
    }

    pub fn step(&self, s: usize) -> (&[f64], &[f64]) {
        let m = self.chunk_width;
        (&self.slow[s * m..(s + 1) * m], &self.fast[s * m..(s + 1) * m])
    }

    /// Appends `xᵀ·A` writing into accumulators `offset..offset + N`.
    ///
    /// `x` is cut into chunks of `M` (tail zero-padded); chunk `c` and rows
    /// `c·M..` of `A` form one slab, scaled by their max-abs values.
    pub fn push_mvm(&mut self, x: &[f64], a: &Matrix, offset: usize) -> Result<()> {
        if x.is_empty() || a.cols == 0 {
            return Err(Error::DimensionMismatch("MVM needs K ≥ 1 and N ≥ 1".into()));
        }
        if x.len() != a.rows {
            return Err(Error::DimensionMismatch(format!(
                "x has {} values, A has {} rows",
                x.len(),
                a.rows
            )));
        }
        let m = self.chunk_width;
        let n = a.cols;
        let chunks = x.len().div_ceil(m);
        self.slow.reserve(chunks * n * m);
        self.fast.reserve(chunks * n * m);
        for c in 0..chunks {
            let rows = c * m..((c + 1) * m).min(x.len());
            let sx = max_abs(x[rows.clone()].iter().cloned());
            let sa = max_abs(rows.clone().flat_map(|r| a.data[r * n..(r + 1) * n].iter().cloned()));
            let sx = if sx > 0.0 { sx } else { 1.0 };
            let sa = if sa > 0.0 { sa } else { 1.0 };
            let slab = self.slab_scales.len() as u64;
            self.slab_scales.push(sx * sa);
            let mut xs = vec![0.0; m];
            for (i, r) in rows.clone().enumerate() {
                xs[i] = x[r] / sx;
            }
            for col in 0..n {
                self.slow.extend_from_slice(&xs);
                for i in 0..m {
                    let r = c * m + i;
                    self.fast.push(if r < x.len() { a.data[r * n + col] / sa } else { 0.0 });
                }
                self.acc.push((offset + col) as u64);
                self.slab.push(slab);
            }
        }
        self.accumulator_count = self.accumulator_count.max(offset + n);
        Ok(())
    }

    /// Scaled contribution of one step given its dot product.
    #[inline]
    pub fn contribution(&self, s: usize, dot: f64) -> f64 {
        self.slab_scales[self.slab[s] as usize] * dot
    }

    /// Adds per-step dot products into the accumulators in step order.
    pub fn accumulate(&self, dots: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.accumulator_count];
        for (s, &d) in dots.iter().enumerate() {
            out[self.acc[s] as usize] += self.contribution(s, d);
        }
        out
    }

    /// Replay with an exact digital dot product.
    pub fn replay_digital(&self) -> Vec<f64> {
        let dots: Vec<f64> = (0..self.step_count())
            .map(|s| {
                let (a, b) = self.step(s);
                a.iter().zip(b).map(|(x, y)| x * y).sum()
            })
            .collect();
        self.accumulate(&dots)
    }
}

/// Lowers `xᵀ·A` (`x` of length `K`, `A` of shape `K × N`) onto a width-`M` core.
pub fn decompose_mvm(x: &[f64], a: &Matrix, m: usize) -> Result<Schedule> {
    let mut s = Schedule::new(m)?;
    s.push_mvm(x, a, 0)?;
    s.output_shape = vec![a.cols];
    Ok(s)
}
