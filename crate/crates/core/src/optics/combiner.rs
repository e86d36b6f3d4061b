//! Cascaded directional-coupler combiner.

use super::modulator::ComplexAmplitude;
use crate::{Error, Result};

/// Runs the 2×2 coupler recursion
/// `A'_{n+1} = sqrt(n/(n+1))·A'_n + sqrt(1/(n+1))·A_n` with `A'_1 = A_0`
/// and returns the through-port field of the last stage.
pub fn combine(fields: &[ComplexAmplitude], n_ports: usize) -> Result<ComplexAmplitude> {
    if fields.is_empty() || n_ports == 0 {
        return Err(Error::EmptyInput);
    }
    if fields.len() != n_ports {
        return Err(Error::DimensionMismatch(format!(
            "combiner has {n_ports} ports but got {} fields",
            fields.len()
        )));
    }
    let mut acc = fields[0];
    for (n, a) in fields.iter().enumerate().skip(1) {
        let n = n as f64;
        acc = acc * (n / (n + 1.0)).sqrt() + a * (1.0 / (n + 1.0)).sqrt();
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};

    fn closed_form(fields: &[Complex64]) -> Complex64 {
        fields.iter().sum::<Complex64>() / (fields.len() as f64).sqrt()
    }

    #[test]
    fn ten_in_phase_unit_fields() {
        let f = vec![Complex64::new(1.0, 0.0); 10];
        assert!((combine(&f, 10).unwrap().re - 10f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn single_port_and_cancellation() {
        let mut f = vec![Complex64::new(0.0, 0.0); 10];
        f[0] = Complex64::new(1.0, 0.0);
        assert!((combine(&f, 10).unwrap().re - 0.1f64.sqrt()).abs() < 1e-15);
        f[1] = Complex64::new(-1.0, 0.0);
        assert!(combine(&f, 10).unwrap().norm() < 1e-15);
    }

    #[test]
    fn empty_and_mismatched_inputs() {
        assert!(matches!(combine(&[], 0), Err(Error::EmptyInput)));
        assert!(matches!(combine(&[Complex64::new(1.0, 0.0)], 2), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn matches_closed_form_for_random_fields() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let n = rng.random_range(1..=16);
            let f: Vec<Complex64> = (0..n)
                .map(|_| Complex64::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)))
                .collect();
            assert!((combine(&f, n).unwrap() - closed_form(&f)).norm() < 1e-12);
        }
    }
}
