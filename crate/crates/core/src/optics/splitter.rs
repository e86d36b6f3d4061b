//! Input splitter: an MMI tap for the reference followed by a cascade of
//! directional couplers feeding the modulating branches.

use serde::{Deserialize, Serialize};

use super::modulator::ComplexAmplitude;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitterModel {
    pub reference_fraction: f64,
    /// Fraction of the bus power coupled out by each DC stage.
    pub branch_ratios: Vec<f64>,
    pub residual_monitor_fraction: f64,
    /// Per-branch power deviation in dB relative to the design.
    pub branch_deviation_db: Vec<f64>,
}

impl SplitterModel {
    /// Cascade designed for `branches` equal outputs with `residual` of the
    /// bus power left for the monitor port. Stage `i` (1-based) couples
    /// `q / (1 - (i-1)·q)` of what remains, `q = (1-residual)/branches`;
    /// with no residual this is the `1/i` distribution counted from the end.
    pub fn design(branches: usize, reference_fraction: f64, residual: f64) -> Self {
        let q = (1.0 - residual) / branches as f64;
        let branch_ratios = (0..branches)
            .map(|i| q / (1.0 - i as f64 * q))
            .collect();
        Self {
            reference_fraction,
            branch_ratios,
            residual_monitor_fraction: residual,
            branch_deviation_db: vec![0.0; branches],
        }
    }

    pub fn branches(&self) -> usize {
        self.branch_ratios.len()
    }

    /// Design power of one branch for unit input power.
    pub fn ideal_branch_power(&self) -> f64 {
        (1.0 - self.reference_fraction) * (1.0 - self.residual_monitor_fraction) / self.branches() as f64
    }

    pub fn split(&self, input: ComplexAmplitude) -> SplitOutput {
        let p_in = input.norm_sqr();
        let reference = input * self.reference_fraction.sqrt();
        let mut bus = input * (1.0 - self.reference_fraction).sqrt();
        let mut branches = Vec::with_capacity(self.branches());
        for &k in &self.branch_ratios {
            branches.push(bus * k.sqrt());
            bus *= (1.0 - k).sqrt();
        }
        let monitor_power = bus.norm_sqr();

        // deviations rescale branch powers; anything above the design total is lost
        let scaled: Vec<f64> = branches
            .iter()
            .zip(&self.branch_deviation_db)
            .map(|(b, d)| b.norm_sqr() * 10f64.powf(d / 10.0))
            .collect();
        let design_total: f64 = branches.iter().map(|b| b.norm_sqr()).sum();
        let scaled_total: f64 = scaled.iter().sum();
        let norm = if scaled_total > design_total && scaled_total > 0.0 {
            design_total / scaled_total
        } else {
            1.0
        };
        let branch_fields: Vec<ComplexAmplitude> = branches
            .iter()
            .zip(&self.branch_deviation_db)
            .map(|(b, d)| *b * (10f64.powf(d / 20.0) * norm.sqrt()))
            .collect();
        let out_total: f64 = reference.norm_sqr()
            + monitor_power
            + branch_fields.iter().map(|b| b.norm_sqr()).sum::<f64>();
        SplitOutput {
            reference,
            branch_fields,
            monitor_power,
            lost_power: (p_in - out_total).max(0.0),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SplitOutput {
    pub reference: ComplexAmplitude,
    pub branch_fields: Vec<ComplexAmplitude>,
    pub monitor_power: f64,
    pub lost_power: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn ideal_branches_share_power_evenly() {
        let s = SplitterModel::design(9, 0.5, 0.3);
        let out = s.split(Complex64::new(1.0, 0.0));
        for b in &out.branch_fields {
            assert!((b.norm_sqr() - 0.5 * 0.7 / 9.0).abs() < 1e-15);
        }
        let p0 = out.branch_fields[0].norm_sqr();
        assert!(out.branch_fields.iter().all(|b| (b.norm_sqr() - p0).abs() < 1e-14 * p0));
        assert!((out.reference.norm_sqr() - 0.5).abs() < 1e-15);
        assert!((out.monitor_power - 0.15).abs() < 1e-14);
    }

    #[test]
    fn lossless_cascade_conserves_energy() {
        let s = SplitterModel::design(9, 0.5, 0.3);
        let input = Complex64::new(0.6, -0.3);
        let out = s.split(input);
        let total = out.reference.norm_sqr()
            + out.monitor_power
            + out.branch_fields.iter().map(|b| b.norm_sqr()).sum::<f64>();
        assert!((total - input.norm_sqr()).abs() < 1e-12);
    }

    #[test]
    fn zero_residual_gives_one_over_i_ratios() {
        let s = SplitterModel::design(9, 0.5, 0.0);
        for (i, r) in s.branch_ratios.iter().enumerate() {
            assert!((r - 1.0 / (9 - i) as f64).abs() < 1e-14);
        }
    }

    #[test]
    fn unevenness_bounds_branch_ratio() {
        let mut s = SplitterModel::design(9, 0.5, 0.3);
        s.branch_deviation_db = vec![0.6, -0.6, 0.1, 0.3, -0.2, 0.0, 0.5, -0.4, 0.2];
        let out = s.split(Complex64::new(1.0, 0.0));
        let p: Vec<f64> = out.branch_fields.iter().map(|b| b.norm_sqr()).collect();
        let max = p.iter().cloned().fold(f64::MIN, f64::max);
        let min = p.iter().cloned().fold(f64::MAX, f64::min);
        assert!(max / min <= 10f64.powf(0.12) * (1.0 + 1e-12));
        let total: f64 = p.iter().sum::<f64>() + out.reference.norm_sqr() + out.monitor_power;
        assert!(total <= 1.0 + 1e-12);
    }
}
