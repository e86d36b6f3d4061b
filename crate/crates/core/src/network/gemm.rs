//! Row-major GEMM and im2col helpers for the exact backend.

/// `C = op(A)·op(B) + beta·C` with `C` of shape `m × n`. `A` is stored as
/// `m × k` (or `k × m` when `trans_a`), `B` as `k × n` (or `n × k`).
#[allow(clippy::too_many_arguments)]
pub fn gemm(m: usize, k: usize, n: usize, a: &[f64], trans_a: bool, b: &[f64], trans_b: bool, c: &mut [f64], beta: f64) {
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n, "gemm operand too small");
    if m == 0 || n == 0 {
        return;
    }
    let (rsa, csa) = if trans_a { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if trans_b { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: the strides describe matrices that lie inside the asserted slice lengths.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Patch matrix (`c·k² × n²`) of a `c × n × n` map, stride 1.
pub fn im2col(input: &[f64], c: usize, n: usize, k: usize, pad: usize) -> Vec<f64> {
    let px = n * n;
    let mut out = vec![0.0; c * k * k * px];
    for ch in 0..c {
        let plane = &input[ch * px..(ch + 1) * px];
        for ky in 0..k {
            for kx in 0..k {
                let row = &mut out[((ch * k + ky) * k + kx) * px..][..px];
                for oy in 0..n {
                    let y = (oy + ky) as isize - pad as isize;
                    if y < 0 || y >= n as isize {
                        continue;
                    }
                    let src = &plane[y as usize * n..][..n];
                    let dst = &mut row[oy * n..][..n];
                    for (ox, d) in dst.iter_mut().enumerate() {
                        let x = (ox + kx) as isize - pad as isize;
                        if x >= 0 && x < n as isize {
                            *d = src[x as usize];
                        }
                    }
                }
            }
        }
    }
    out
}

/// Adjoint of [`im2col`]: scatters patch-matrix gradients back onto the map.
pub fn col2im(cols: &[f64], c: usize, n: usize, k: usize, pad: usize, out: &mut [f64]) {
    let px = n * n;
    for ch in 0..c {
        for ky in 0..k {
            for kx in 0..k {
                let row = &cols[((ch * k + ky) * k + kx) * px..][..px];
                for oy in 0..n {
                    let y = (oy + ky) as isize - pad as isize;
                    if y < 0 || y >= n as isize {
                        continue;
                    }
                    let dst = &mut out[ch * px + y as usize * n..][..n];
                    for ox in 0..n {
                        let x = (ox + kx) as isize - pad as isize;
                        if x >= 0 && x < n as isize {
                            dst[x as usize] += row[oy * n + ox];
                        }
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lowering::im2col_patch;
    use crate::rng::SimRng;
    use crate::tensor::FeatureMap;
    use rand::{Rng, SeedableRng};

    fn naive(m: usize, k: usize, n: usize, a: &[f64], b: &[f64]) -> Vec<f64> {
        let mut c = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                c[i * n + j] = (0..k).map(|l| a[i * k + l] * b[l * n + j]).sum();
            }
        }
        c
    }

    fn transpose(rows: usize, cols: usize, a: &[f64]) -> Vec<f64> {
        let mut t = vec![0.0; a.len()];
        for r in 0..rows {
            for c in 0..cols {
                t[c * rows + r] = a[r * cols + c];
            }
        }
        t
    }

    #[test]
    fn gemm_all_transposes() {
        let mut r = SimRng::seed_from_u64(0);
        let (m, k, n) = (5, 7, 3);
        let a: Vec<f64> = (0..m * k).map(|_| r.random_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..k * n).map(|_| r.random_range(-1.0..1.0)).collect();
        let expect = naive(m, k, n, &a, &b);
        let at = transpose(m, k, &a);
        let bt = transpose(k, n, &b);
        for (ta, tb) in [(false, false), (true, false), (false, true), (true, true)] {
            let mut c = vec![0.0; m * n];
            gemm(m, k, n, if ta { &at } else { &a }, ta, if tb { &bt } else { &b }, tb, &mut c, 0.0);
            assert!(c.iter().zip(&expect).all(|(x, y)| (x - y).abs() < 1e-12));
        }
    }

    #[test]
    fn im2col_agrees_with_lowering() {
        let mut r = SimRng::seed_from_u64(1);
        let map = FeatureMap::from_vec(2, 6, 6, (0..72).map(|_| r.random_range(-1.0..1.0)).collect()).unwrap();
        let fast = im2col(&map.data, 2, 6, 5, 2);
        assert_eq!(fast, im2col_patch(&map, 5, 1, 2).unwrap().matrix.data);
    }

    #[test]
    fn col2im_is_the_adjoint() {
        let mut r = SimRng::seed_from_u64(2);
        let (c, n, k, pad) = (2, 5, 3, 1);
        let x: Vec<f64> = (0..c * n * n).map(|_| r.random_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..c * k * k * n * n).map(|_| r.random_range(-1.0..1.0)).collect();
        let lhs: f64 = im2col(&x, c, n, k, pad).iter().zip(&y).map(|(a, b)| a * b).sum();
        let mut back = vec![0.0; x.len()];
        col2im(&y, c, n, k, pad, &mut back);
        let rhs: f64 = x.iter().zip(&back).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }
}
