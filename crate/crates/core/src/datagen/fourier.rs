//! Centered unitary 2-D DFT (DC at index `n/2` on both axes).

use num_complex::Complex64;
use rustfft::FftPlanner;

fn roll(data: &[Complex64], n: usize, shift: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::default(); data.len()];
    for y in 0..n {
        for x in 0..n {
            out[((y + shift) % n) * n + (x + shift) % n] = data[y * n + x];
        }
    }
    out
}

fn fft2(data: &mut [Complex64], n: usize, inverse: bool) {
    let mut planner = FftPlanner::new();
    let fft = if inverse { planner.plan_fft_inverse(n) } else { planner.plan_fft_forward(n) };
    fft.process(data);
    let mut col = vec![Complex64::default(); n];
    for x in 0..n {
        for y in 0..n {
            col[y] = data[y * n + x];
        }
        fft.process(&mut col);
        for y in 0..n {
            data[y * n + x] = col[y];
        }
    }
    let scale = 1.0 / n as f64;
    data.iter_mut().for_each(|v| *v *= scale);
}

/// Forward transform of an `n × n` image.
pub fn dft2(image: &[Complex64], n: usize) -> Vec<Complex64> {
    assert_eq!(image.len(), n * n, "image is not n × n");
    let mut d = roll(image, n, n - n / 2);
    fft2(&mut d, n, false);
    roll(&d, n, n / 2)
}

pub fn idft2(spectrum: &[Complex64], n: usize) -> Vec<Complex64> {
    assert_eq!(spectrum.len(), n * n, "spectrum is not n × n");
    let mut d = roll(spectrum, n, n - n / 2);
    fft2(&mut d, n, true);
    roll(&d, n, n / 2)
}

pub fn dft2_real(image: &[f64], n: usize) -> Vec<Complex64> {
    dft2(&image.iter().map(|&v| Complex64::new(v, 0.0)).collect::<Vec<_>>(), n)
}

/// Real and imaginary planes concatenated.
pub fn to_channels(spectrum: &[Complex64]) -> Vec<f64> {
    spectrum.iter().map(|c| c.re).chain(spectrum.iter().map(|c| c.im)).collect()
}

pub fn from_channels(channels: &[f64]) -> Vec<Complex64> {
    let half = channels.len() / 2;
    (0..half).map(|i| Complex64::new(channels[i], channels[half + i])).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SimRng;
    use rand::{Rng, SeedableRng};

    #[test]
    fn round_trip_and_parseval() {
        let mut r = SimRng::seed_from_u64(0);
        for n in [8, 9, 16] {
            let img: Vec<f64> = (0..n * n).map(|_| r.random_range(-1.0..1.0)).collect();
            let f = dft2_real(&img, n);
            let back = idft2(&f, n);
            assert!(back.iter().zip(&img).all(|(b, a)| (b.re - a).abs() < 1e-10 && b.im.abs() < 1e-10));
            let e_img: f64 = img.iter().map(|v| v * v).sum();
            let e_f: f64 = f.iter().map(|c| c.norm_sqr()).sum();
            assert!((e_img - e_f).abs() < 1e-10);
        }
    }

    #[test]
    fn dc_sits_at_the_center() {
        let n = 8;
        let f = dft2_real(&[1.0; 64], n);
        assert!((f[(n / 2) * n + n / 2].re - 8.0).abs() < 1e-12);
        let rest: f64 = f.iter().map(|c| c.norm()).sum::<f64>() - f[(n / 2) * n + n / 2].norm();
        assert!(rest < 1e-10);
    }

    #[test]
    fn matches_direct_sum() {
        let n = 6;
        let mut r = SimRng::seed_from_u64(1);
        let img: Vec<f64> = (0..n * n).map(|_| r.random_range(-1.0..1.0)).collect();
        let f = dft2_real(&img, n);
        let c = (n / 2) as f64;
        for ky in 0..n {
            for kx in 0..n {
                let mut acc = Complex64::default();
                for y in 0..n {
                    for x in 0..n {
                        let ph = -2.0 * std::f64::consts::PI
                            * ((ky as f64 - c) * (y as f64 - c) + (kx as f64 - c) * (x as f64 - c))
                            / n as f64;
                        acc += Complex64::from_polar(img[y * n + x], ph);
                    }
                }
                acc /= n as f64;
                assert!((acc - f[ky * n + kx]).norm() < 1e-10);
            }
        }
    }
}
