use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::fourier::{dft2_real, to_channels};
use super::mask::Mask;
use super::radon::radon;
use crate::network::Sample;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Process {
    Mf,
    Vpds,
    Radon,
}

impl Process {
    pub const ALL: [Process; 3] = [Process::Mf, Process::Vpds, Process::Radon];

    pub fn name(self) -> &'static str {
        match self {
            Process::Mf => "mf",
            Process::Vpds => "vpds",
            Process::Radon => "radon",
        }
    }
}

impl std::str::FromStr for Process {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Process::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown encoding process '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedExample {
    pub process: Process,
    /// `[2, n, n]` for Fourier processes, `[angles, rays]` for Radon.
    pub input_shape: Vec<usize>,
    pub input: Vec<f64>,
    pub truth: Vec<f64>,
    pub size: usize,
}

impl Sample for EncodedExample {
    fn input(&self) -> &[f64] {
        &self.input
    }
    fn truth(&self) -> &[f64] {
        &self.truth
    }
}

fn check_square(image: &[f64], n: usize) -> Result<()> {
    if image.len() != n * n {
        return Err(Error::ShapeMismatch(format!("image has {} pixels, expected {n}×{n}", image.len())));
    }
    Ok(())
}

/// k-space with every even row (centered grid, array index) multiplied by `e^{jθ}`.
pub fn mf_spectrum(image: &[f64], n: usize, theta: f64) -> Result<Vec<Complex64>> {
    check_square(image, n)?;
    let mut f = dft2_real(image, n);
    let shift = Complex64::from_polar(1.0, theta);
    for row in (0..n).step_by(2) {
        f[row * n..(row + 1) * n].iter_mut().for_each(|v| *v *= shift);
    }
    Ok(f)
}

pub fn mf_encode(image: &[f64], n: usize, theta: f64) -> Result<EncodedExample> {
    Ok(EncodedExample {
        process: Process::Mf,
        input_shape: vec![2, n, n],
        input: to_channels(&mf_spectrum(image, n, theta)?),
        truth: image.to_vec(),
        size: n,
    })
}

pub fn vpds_encode(image: &[f64], n: usize, mask: &Mask) -> Result<EncodedExample> {
    check_square(image, n)?;
    if mask.size != n {
        return Err(Error::ShapeMismatch(format!("mask is {}×{0}, image {n}×{n}", mask.size)));
    }
    let mut f = dft2_real(image, n);
    f.iter_mut().zip(&mask.keep).for_each(|(v, &k)| {
        if !k {
            *v = Complex64::default();
        }
    });
    Ok(EncodedExample {
        process: Process::Vpds,
        input_shape: vec![2, n, n],
        input: to_channels(&f),
        truth: image.to_vec(),
        size: n,
    })
}

/// Sinogram scaled by `1/n` so inputs stay O(1) for the first tanh layer.
pub fn radon_encode(image: &[f64], n: usize, angles: usize, rays: usize) -> Result<EncodedExample> {
    check_square(image, n)?;
    let mut s = radon(image, n, angles, rays)?;
    s.iter_mut().for_each(|v| *v /= n as f64);
    Ok(EncodedExample { process: Process::Radon, input_shape: vec![angles, rays], input: s, truth: image.to_vec(), size: n })
}
