//! Dense row-major containers shared by the lowering and network code.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!("{} values for a {rows}×{cols} matrix", data.len())));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    /// `xᵀ·A` for a length-`rows` vector.
    pub fn vec_mul(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.rows {
            return Err(Error::DimensionMismatch(format!(
                "vector of length {} against {} rows",
                x.len(),
                self.rows
            )));
        }
        let mut out = vec![0.0; self.cols];
        for (r, &xv) in x.iter().enumerate() {
            let row = &self.data[r * self.cols..(r + 1) * self.cols];
            for (o, a) in out.iter_mut().zip(row) {
                *o += xv * a;
            }
        }
        Ok(out)
    }
}

/// `C × H × W` feature map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMap {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl FeatureMap {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self { channels, height, width, data: vec![0.0; channels * height * width] }
    }

    pub fn from_vec(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != channels * height * width {
            return Err(Error::ShapeMismatch(format!(
                "{} values for a {channels}×{height}×{width} map",
                data.len()
            )));
        }
        Ok(Self { channels, height, width, data })
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[(c * self.height + y) * self.width + x]
    }

    /// Value at signed coordinates, zero outside the map.
    #[inline]
    pub fn get_padded(&self, c: usize, y: isize, x: isize) -> f64 {
        if y < 0 || x < 0 || y >= self.height as isize || x >= self.width as isize {
            0.0
        } else {
            self.get(c, y as usize, x as usize)
        }
    }

    #[inline]
    pub fn set(&mut self, c: usize, y: usize, x: usize, v: f64) {
        self.data[(c * self.height + y) * self.width + x] = v;
    }

    pub fn plane(&self, c: usize) -> &[f64] {
        let n = self.height * self.width;
        &self.data[c * n..(c + 1) * n]
    }
}

/// Convolution kernels, `out × in × k × k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    pub out_channels: usize,
    pub in_channels: usize,
    pub size: usize,
    pub data: Vec<f64>,
}

impl Kernel {
    pub fn zeros(out_channels: usize, in_channels: usize, size: usize) -> Self {
        Self { out_channels, in_channels, size, data: vec![0.0; out_channels * in_channels * size * size] }
    }

    pub fn from_vec(out_channels: usize, in_channels: usize, size: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != out_channels * in_channels * size * size {
            return Err(Error::ShapeMismatch(format!(
                "{} values for a {out_channels}×{in_channels}×{size}×{size} kernel",
                data.len()
            )));
        }
        Ok(Self { out_channels, in_channels, size, data })
    }

    #[inline]
    pub fn index(&self, o: usize, i: usize, ky: usize, kx: usize) -> usize {
        ((o * self.in_channels + i) * self.size + ky) * self.size + kx
    }

    #[inline]
    pub fn get(&self, o: usize, i: usize, ky: usize, kx: usize) -> f64 {
        self.data[self.index(o, i, ky, kx)]
    }

    /// Flattened receptive-field weights of one output channel, in patch-row order.
    pub fn flattened(&self, o: usize) -> &[f64] {
        let n = self.in_channels * self.size * self.size;
        &self.data[o * n..(o + 1) * n]
    }

    /// Taps mirrored in both spatial axes.
    pub fn flipped(&self) -> Kernel {
        let k = self.size;
        let mut out = self.clone();
        for o in 0..self.out_channels {
            for i in 0..self.in_channels {
                for ky in 0..k {
                    for kx in 0..k {
                        let idx = out.index(o, i, k - 1 - ky, k - 1 - kx);
                        out.data[idx] = self.get(o, i, ky, kx);
                    }
                }
            }
        }
        out
    }

    /// Input and output channels exchanged.
    pub fn transposed(&self) -> Kernel {
        let k = self.size;
        let mut out = Kernel::zeros(self.in_channels, self.out_channels, k);
        for o in 0..self.out_channels {
            for i in 0..self.in_channels {
                for ky in 0..k {
                    for kx in 0..k {
                        let idx = out.index(i, o, ky, kx);
                        out.data[idx] = self.get(o, i, ky, kx);
                    }
                }
            }
        }
        out
    }
}
