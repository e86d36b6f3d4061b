//! Pixel-driven parallel-beam projection with linear splatting.

use crate::{Error, Result};

/// Minimum ray count that covers the image diagonal.
pub fn min_rays(n: usize) -> usize {
    (n as f64 * std::f64::consts::SQRT_2).ceil() as usize
}

/// Projection angle `a·π/angles`.
pub fn angle(a: usize, angles: usize) -> f64 {
    a as f64 * std::f64::consts::PI / angles as f64
}

/// Fractional ray coordinate of pixel `(y, x)` at angle `theta`. Pixel
/// centers are measured from the image center with `y` pointing up.
pub fn ray_position(n: usize, rays: usize, y: usize, x: usize, theta: f64) -> f64 {
    let c = (n as f64 - 1.0) / 2.0;
    let (s, co) = theta.sin_cos();
    (x as f64 - c) * co + (c - y as f64) * s + (rays as f64 - 1.0) / 2.0
}

/// Sinogram of an `n × n` image, `angles × rays` row-major.
pub fn radon(image: &[f64], n: usize, angles: usize, rays: usize) -> Result<Vec<f64>> {
    if image.len() != n * n {
        return Err(Error::ShapeMismatch(format!("image has {} pixels, expected {n}×{n}", image.len())));
    }
    if angles == 0 || rays < min_rays(n) {
        return Err(Error::InvalidGeometry(format!(
            "{angles} angles × {rays} rays cannot cover a {n}×{n} image (need ≥ 1 angle and ≥ {} rays)",
            min_rays(n)
        )));
    }
    let mut out = vec![0.0; angles * rays];
    for a in 0..angles {
        let theta = angle(a, angles);
        let row = &mut out[a * rays..(a + 1) * rays];
        for y in 0..n {
            for x in 0..n {
                let v = image[y * n + x];
                if v == 0.0 {
                    continue;
                }
                // Clamp guards rounding at the diagonal extremes only.
                let u = ray_position(n, rays, y, x, theta).clamp(0.0, (rays - 1) as f64);
                let lo = u.floor();
                let frac = u - lo;
                let i = lo as usize;
                row[i] += v * (1.0 - frac);
                if frac > 0.0 {
                    row[i + 1] += v * frac;
                }
            }
        }
    }
    Ok(out)
}
