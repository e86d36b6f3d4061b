use serde::{Deserialize, Serialize};

use super::schedule::Schedule;
use crate::tensor::{FeatureMap, Kernel, Matrix};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvGeometry {
    pub height: usize,
    pub width: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
}

impl ConvGeometry {
    /// Stride 1 with the output the same size as the input (odd kernels).
    pub fn same(height: usize, width: usize, kernel: usize) -> Self {
        Self { height, width, kernel, stride: 1, padding: kernel.saturating_sub(1) / 2 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kernel == 0 || self.stride == 0 {
            return Err(Error::InvalidGeometry("kernel size and stride must be positive".into()));
        }
        if self.height + 2 * self.padding < self.kernel || self.width + 2 * self.padding < self.kernel {
            return Err(Error::InvalidGeometry(format!(
                "{}×{} map with padding {} is smaller than a {}×{} kernel",
                self.height, self.width, self.padding, self.kernel, self.kernel
            )));
        }
        Ok(())
    }

    pub fn out_height(&self) -> usize {
        (self.height + 2 * self.padding - self.kernel) / self.stride + 1
    }

    pub fn out_width(&self) -> usize {
        (self.width + 2 * self.padding - self.kernel) / self.stride + 1
    }
}

/// im2col result: column `p` is the receptive field of output position `p`
/// flattened in `(channel, ky, kx)` order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchMatrix {
    pub matrix: Matrix,
    pub geometry: ConvGeometry,
    pub in_channels: usize,
}

pub fn im2col_patch(map: &FeatureMap, kernel: usize, stride: usize, padding: usize) -> Result<PatchMatrix> {
    let g = ConvGeometry { height: map.height, width: map.width, kernel, stride, padding };
    g.validate()?;
    let (oh, ow) = (g.out_height(), g.out_width());
    let rows = map.channels * kernel * kernel;
    let cols = oh * ow;
    let mut m = Matrix::zeros(rows, cols);
    for c in 0..map.channels {
        for ky in 0..kernel {
            for kx in 0..kernel {
                let r = (c * kernel + ky) * kernel + kx;
                let row = &mut m.data[r * cols..(r + 1) * cols];
                for oy in 0..oh {
                    let y = (oy * stride + ky) as isize - padding as isize;
                    for ox in 0..ow {
                        let x = (ox * stride + kx) as isize - padding as isize;
                        row[oy * ow + ox] = map.get_padded(c, y, x);
                    }
                }
            }
        }
    }
    Ok(PatchMatrix { matrix: m, geometry: g, in_channels: map.channels })
}

fn check_channels(map: &FeatureMap, kernel: &Kernel) -> Result<()> {
    if kernel.in_channels != map.channels {
        return Err(Error::DimensionMismatch(format!(
            "kernel expects {} input channels, map has {}",
            kernel.in_channels, map.channels
        )));
    }
    Ok(())
}

/// Sliding-window cross-correlation, evaluated directly.
pub fn conv2d_direct(map: &FeatureMap, kernel: &Kernel, stride: usize, padding: usize) -> Result<FeatureMap> {
    check_channels(map, kernel)?;
    let g = ConvGeometry { height: map.height, width: map.width, kernel: kernel.size, stride, padding };
    g.validate()?;
    let (oh, ow) = (g.out_height(), g.out_width());
    let k = kernel.size;
    let mut out = FeatureMap::zeros(kernel.out_channels, oh, ow);
    for o in 0..kernel.out_channels {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut s = 0.0;
                for i in 0..map.channels {
                    for ky in 0..k {
                        for kx in 0..k {
                            let y = (oy * stride + ky) as isize - padding as isize;
                            let x = (ox * stride + kx) as isize - padding as isize;
                            s += kernel.get(o, i, ky, kx) * map.get_padded(i, y, x);
                        }
                    }
                }
                out.set(o, oy, ox, s);
            }
        }
    }
    Ok(out)
}

/// Stride-1 transposed convolution by scattering, cropped to the input size:
/// `out[o, y+ky-p, x+kx-p] += K[o,i,ky,kx]·in[i,y,x]`.
pub fn deconv2d_direct(map: &FeatureMap, kernel: &Kernel, padding: usize) -> Result<FeatureMap> {
    check_channels(map, kernel)?;
    let k = kernel.size;
    let (h, w) = (map.height, map.width);
    let oh = (h + k - 1).checked_sub(2 * padding).filter(|&v| v > 0);
    let ow = (w + k - 1).checked_sub(2 * padding).filter(|&v| v > 0);
    let (oh, ow) = match (oh, ow) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::InvalidGeometry("padding removes the whole output".into())),
    };
    let mut out = FeatureMap::zeros(kernel.out_channels, oh, ow);
    for o in 0..kernel.out_channels {
        for i in 0..map.channels {
            for y in 0..h {
                for x in 0..w {
                    let v = map.get(i, y, x);
                    for ky in 0..k {
                        let ty = (y + ky) as isize - padding as isize;
                        if ty < 0 || ty >= oh as isize {
                            continue;
                        }
                        for kx in 0..k {
                            let tx = (x + kx) as isize - padding as isize;
                            if tx < 0 || tx >= ow as isize {
                                continue;
                            }
                            let idx = (o * oh + ty as usize) * ow + tx as usize;
                            out.data[idx] += kernel.get(o, i, ky, kx) * v;
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// One MVM per output channel: the flattened kernel on the slow modulators,
/// patch-matrix columns on the fast ones. Same padding, stride 1.
pub fn lower_conv(map: &FeatureMap, kernel: &Kernel, m: usize) -> Result<Schedule> {
    lower_conv_with(map, kernel, 1, kernel.size.saturating_sub(1) / 2, m)
}

pub fn lower_conv_with(map: &FeatureMap, kernel: &Kernel, stride: usize, padding: usize, m: usize) -> Result<Schedule> {
    check_channels(map, kernel)?;
    let patch = im2col_patch(map, kernel.size, stride, padding)?;
    let mut s = Schedule::new(m)?;
    let positions = patch.matrix.cols;
    for o in 0..kernel.out_channels {
        s.push_mvm(kernel.flattened(o), &patch.matrix, o * positions)?;
    }
    s.output_shape = vec![kernel.out_channels, patch.geometry.out_height(), patch.geometry.out_width()];
    Ok(s)
}

/// Stride-1 transposed convolution with same-size output, lowered as a
/// convolution with the spatially flipped kernel and padding `k-1-p`.
pub fn lower_deconv(map: &FeatureMap, kernel: &Kernel, m: usize) -> Result<Schedule> {
    let p = kernel.size.saturating_sub(1) / 2;
    lower_conv_with(map, &kernel.flipped(), 1, kernel.size - 1 - p, m)
}

/// Reshapes schedule accumulators into a feature map.
pub fn to_feature_map(schedule: &Schedule, values: Vec<f64>) -> Result<FeatureMap> {
    match schedule.output_shape.as_slice() {
        [c, h, w] => FeatureMap::from_vec(*c, *h, *w, values),
        other => Err(Error::ShapeMismatch(format!("schedule output shape {other:?} is not a feature map"))),
    }
}
