//! Sinusoidal fits of modulator transmission curves.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;

use super::measure::measure_field;
use crate::optics::{BranchDrive, ChipState, ModSlot, TransmissionCurveFit};
use crate::{Error, Result};

/// Curves whose measured swing is below this are treated as dead.
pub const MIN_SWING: f64 = 1e-6;
/// Fits below this R² are rejected.
pub const MIN_R_SQUARED: f64 = 0.9;

/// Evenly spaced per-arm drive powers covering the full drive range of a modulator.
pub fn default_sweep_mw(chip: &ChipState, branch: usize, slot: ModSlot, points: usize) -> Vec<f64> {
    let m = chip.branches[branch].modulator(slot);
    let p = m.upper.p0_bias_mw.min(m.lower.p0_bias_mw);
    (0..points)
        .map(|i| -p + 2.0 * p * i as f64 / (points - 1) as f64)
        .collect()
}

/// Sweeps one modulator (the other one in the branch fully open, all other
/// branches closed) and fits `a·sin(b·P + c) + d` to the signed amplitude,
/// with `P` the per-arm drive power in mW.
pub fn fit_transmission_curve<R: Rng + ?Sized>(
    chip: &ChipState,
    branch: usize,
    slot: ModSlot,
    sweep_mw: &[f64],
    rng: &mut R,
) -> Result<TransmissionCurveFit> {
    let y = measure_transmission(chip, branch, slot, sweep_mw, rng)?;
    fit_sine(sweep_mw, &y, PI / chip.encoding_p_pi_mw)
}

/// Signed field amplitude at each sweep point (principal-axis projection
/// of the measured complex field).
pub fn measure_transmission<R: Rng + ?Sized>(
    chip: &ChipState,
    branch: usize,
    slot: ModSlot,
    sweep_mw: &[f64],
    rng: &mut R,
) -> Result<Vec<f64>> {
    if branch >= chip.branches.len() {
        return Err(Error::IndexOutOfRange { index: branch, len: chip.branches.len() });
    }
    let b0 = PI / chip.encoding_p_pi_mw;
    let (lo, hi) = sweep_mw
        .iter()
        .fold((f64::MAX, f64::MIN), |(l, h), &p| (l.min(p), h.max(p)));
    if sweep_mw.len() < 8 || (hi - lo) * b0 < 2.0 * PI - 1e-9 {
        return Err(Error::FitDiverged("sweep must cover a full transmission period".into()));
    }
    let mut fields = Vec::with_capacity(sweep_mw.len());
    for &p in sweep_mw {
        let theta = p * PI / chip.encoding_p_pi_mw;
        let drive = match slot {
            ModSlot::Slow => BranchDrive { slow: theta, fast: PI / 2.0 },
            ModSlot::Fast => BranchDrive { slow: PI / 2.0, fast: theta },
        };
        fields.push(measure_field(chip, &chip.solo_drives(branch, drive), rng)?);
    }
    Ok(signed_projection(&fields, sweep_mw, b0))
}

/// Projects complex samples onto their principal axis, oriented so the
/// result correlates positively with `sin(b0·x)`.
fn signed_projection(fields: &[Complex64], x: &[f64], b0: f64) -> Vec<f64> {
    let n = fields.len() as f64;
    let mean = fields.iter().sum::<Complex64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for f in fields {
        let d = f - mean;
        sxx += d.re * d.re;
        syy += d.im * d.im;
        sxy += d.re * d.im;
    }
    let angle = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    let rot = Complex64::from_polar(1.0, -angle);
    let mut y: Vec<f64> = fields.iter().map(|f| (f * rot).re).collect();
    let corr: f64 = y.iter().zip(x).map(|(v, &p)| v * (b0 * p).sin()).sum();
    if corr < 0.0 {
        y.iter_mut().for_each(|v| *v = -*v);
    }
    y
}

/// Least-squares fit of `a·sin(b·x + c) + d`; `b` is searched over
/// `[b_guess/2, 2·b_guess]`.
pub fn fit_sine(x: &[f64], y: &[f64], b_guess: f64) -> Result<TransmissionCurveFit> {
    if x.len() != y.len() || x.len() < 4 {
        return Err(Error::DimensionMismatch("sine fit needs matching samples, at least 4".into()));
    }
    let (ymin, ymax) = y.iter().fold((f64::MAX, f64::MIN), |(l, h), &v| (l.min(v), h.max(v)));
    if !(ymax - ymin >= MIN_SWING) {
        return Err(Error::FitDiverged(format!("measured swing {:.3e} is below {MIN_SWING:e}", ymax - ymin)));
    }
    let grid = 161;
    let at = |k: f64| b_guess * 2f64.powf(-1.0 + 2.0 * k / (grid - 1) as f64);
    let mut best = (f64::MAX, 0usize);
    for k in 0..grid {
        let sse = linear_part(x, y, at(k as f64)).map(|r| r.1).unwrap_or(f64::MAX);
        if sse < best.0 {
            best = (sse, k);
        }
    }
    let lo = at(best.1 as f64 - 1.0);
    let hi = at(best.1 as f64 + 1.0);
    let b = golden_min(lo, hi, 1e-12 * b_guess, |b| linear_part(x, y, b).map(|r| r.1).unwrap_or(f64::MAX));
    let ([alpha, beta, d], sse) = linear_part(x, y, b)
        .ok_or_else(|| Error::FitDiverged("singular least-squares system".into()))?;
    let ym = y.iter().sum::<f64>() / y.len() as f64;
    let sst: f64 = y.iter().map(|v| (v - ym).powi(2)).sum();
    let r_squared = 1.0 - sse / sst;
    let fit = TransmissionCurveFit {
        a: alpha.hypot(beta),
        b,
        c: beta.atan2(alpha),
        d,
        r_squared,
    };
    if !(r_squared >= MIN_R_SQUARED) {
        return Err(Error::FitDiverged(format!("R² = {r_squared:.4} below {MIN_R_SQUARED}")));
    }
    Ok(fit)
}

/// For fixed `b`, solves `y ≈ α·sin(bx) + β·cos(bx) + d`; returns the
/// coefficients and the residual sum of squares.
fn linear_part(x: &[f64], y: &[f64], b: f64) -> Option<([f64; 3], f64)> {
    let mut ata = [[0.0; 3]; 3];
    let mut aty = [0.0; 3];
    for (&xi, &yi) in x.iter().zip(y) {
        let row = [(b * xi).sin(), (b * xi).cos(), 1.0];
        for r in 0..3 {
            aty[r] += row[r] * yi;
            for c in 0..3 {
                ata[r][c] += row[r] * row[c];
            }
        }
    }
    let coef = solve3(ata, aty)?;
    let sse = x
        .iter()
        .zip(y)
        .map(|(&xi, &yi)| (yi - coef[0] * (b * xi).sin() - coef[1] * (b * xi).cos() - coef[2]).powi(2))
        .sum();
    Some((coef, sse))
}

fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let piv = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..3 {
            let f = a[r][col] / a[col][col];
            for c in col..3 {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for r in (0..3).rev() {
        let s: f64 = (r + 1..3).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

/// Golden-section minimisation of a unimodal function on `[lo, hi]`.
pub fn golden_min<F: FnMut(f64) -> f64>(mut lo: f64, mut hi: f64, tol: f64, mut f: F) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..200 {
        if (hi - lo).abs() <= tol {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        }
    }
    0.5 * (lo + hi)
}

/// Per-arm drive power at which a fitted curve crosses its offset with positive slope.
pub fn null_power_mw(fit: &TransmissionCurveFit) -> f64 {
    -fit.c / fit.b
}
