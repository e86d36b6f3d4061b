//! Pass/fail thresholds for each experiment report, used by `--check`.

use serde::{Deserialize, Serialize};

use super::*;
use crate::datagen::Process;
use super::networks::ProcessReconstruction;

pub const FIT_R2_MIN: f64 = 0.999;
pub const ALIGNMENT_MIN: f64 = 0.999;
pub const BPC_PASS_FRACTION: f64 = 0.9;
pub const LOWERING_MAX_ERROR: f64 = 1e-9;
pub const LAYER_STD_MAX: f64 = 0.02;
pub const RECONSTRUCTION_RATIO_MAX: f64 = 2.5;
pub const SWEEP_R2_MIN: f64 = 0.9;
/// Ablation seeds whose ordering must hold, as a fraction of those run.
pub const ABLATION_SEED_FRACTION: f64 = 0.8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: impl Into<String>, passed: bool, detail: String) -> Check {
    Check { name: name.into(), passed, detail }
}

impl CharacterizeReport {
    pub fn checks(&self) -> Vec<Check> {
        vec![
            check("fit_r_squared", self.min_r_squared > FIT_R2_MIN, format!("min R² {:.6} > {FIT_R2_MIN}", self.min_r_squared)),
            check(
                "splitter_evenness",
                self.evenness_spread_db <= self.evenness_bound_db,
                format!("spread {:.4} dB <= {} dB", self.evenness_spread_db, self.evenness_bound_db),
            ),
            check("peaks_increasing", self.peaks_increasing, format!("peaks {:?}", self.alignment_peaks)),
            check(
                "alignment",
                self.alignment_efficiency >= ALIGNMENT_MIN,
                format!("{:.6} of the in-phase maximum", self.alignment_efficiency),
            ),
        ]
    }
}

impl CalibrateReport {
    pub fn checks(&self) -> Vec<Check> {
        let r2 = self
            .calibration
            .branches
            .iter()
            .flat_map(|b| [b.slow_fit.r_squared, b.fast_fit.r_squared])
            .fold(1.0, f64::min);
        let mut out = vec![check("fit_r_squared", r2 > FIT_R2_MIN, format!("min R² {r2:.6} > {FIT_R2_MIN}"))];
        if let Some(bpc) = &self.calibration.bpc {
            for (name, r) in [("bpc_positive", &bpc.positive), ("bpc_negative", &bpc.negative)] {
                out.push(check(
                    name,
                    r.residual_std_after < r.residual_std_before,
                    format!("std {:.5} -> {:.5}", r.residual_std_before, r.residual_std_after),
                ));
            }
        }
        out
    }
}

impl BpcDemoReport {
    pub fn checks(&self) -> Vec<Check> {
        let mut out = Vec::new();
        if let Some(s) = self.sets.first() {
            out.push(check(
                "bpc_reproduction",
                s.pass_fraction >= BPC_PASS_FRACTION,
                format!("{:.0}% of chips with std {:.4} -> {:.4} (median)", 100.0 * s.pass_fraction, s.median_before, s.median_after_two),
            ));
        }
        for (k, s) in self.sets.iter().enumerate().skip(1) {
            out.push(check(
                format!("bpc_settles_set{k}"),
                s.settled_fraction >= BPC_PASS_FRACTION,
                format!("{:.0}% of chips settled within two iterations", 100.0 * s.settled_fraction),
            ));
        }
        out
    }
}

impl LowerReport {
    pub fn checks(&self) -> Vec<Check> {
        vec![check(
            "ideal_chip_exact",
            self.max_abs_error <= LOWERING_MAX_ERROR,
            format!("max error {:.3e}", self.max_abs_error),
        )]
    }
}

impl TrainReport {
    pub fn checks(&self) -> Vec<Check> {
        self.runs
            .iter()
            .map(|r| {
                check(
                    format!("{}_loss_decreasing", r.process.name()),
                    r.decreasing_first_ten && r.final_val_loss.is_finite(),
                    format!("final validation loss {:.5}", r.final_val_loss),
                )
            })
            .collect()
    }
}

impl LayerAccuracyReport {
    pub fn checks(&self) -> Vec<Check> {
        vec![
            check("fc_layer", self.fc_normalized_std <= LAYER_STD_MAX, format!("normalized std {:.5}", self.fc_normalized_std)),
            check("conv_layer", self.conv_normalized_std <= LAYER_STD_MAX, format!("normalized std {:.5}", self.conv_normalized_std)),
        ]
    }
}

impl ReconstructionReport {
    pub fn checks(&self) -> Vec<Check> {
        let mut out: Vec<Check> = self
            .processes
            .iter()
            .map(|p| {
                check(
                    format!("{}_ratio", p.process.name()),
                    p.ratio <= RECONSTRUCTION_RATIO_MAX,
                    format!("{:.5} / {:.5} = {:.3}", p.injected_error_std, p.exact_error_std, p.ratio),
                )
            })
            .collect();
        if self.processes.len() == Process::ALL.len() {
            let gap = |p: &ProcessReconstruction| p.injected_error_std - p.exact_error_std;
            let radon = self.processes.iter().find(|p| p.process == Process::Radon).map(gap);
            let others = self.processes.iter().filter(|p| p.process != Process::Radon).map(gap).fold(f64::INFINITY, f64::min);
            if let Some(r) = radon {
                out.push(check("radon_smallest_gap", r < others, format!("radon gap {r:.5}, others from {others:.5}")));
            }
        }
        out
    }
}

impl SweepReport {
    pub fn checks(&self) -> Vec<Check> {
        vec![
            check(
                "linear_fit",
                self.fit.r_squared >= SWEEP_R2_MIN && self.fit.slope > 0.0,
                format!("R² {:.4}, slope {:.4}", self.fit.r_squared, self.fit.slope),
            ),
            check("monotone", self.monotone, String::new()),
        ]
    }
}

impl AblationReport {
    pub fn checks(&self) -> Vec<Check> {
        let mut processes: Vec<Process> = self.seeds.iter().map(|s| s.process).collect();
        processes.dedup();
        processes
            .into_iter()
            .map(|p| {
                let total = self.seeds.iter().filter(|s| s.process == p).count();
                let passing = self.passing_seeds(p);
                let needed = (ABLATION_SEED_FRACTION * total as f64).ceil() as usize;
                check(format!("{}_ordering", p.name()), passing >= needed, format!("{passing}/{total} seeds"))
            })
            .collect()
    }
}
