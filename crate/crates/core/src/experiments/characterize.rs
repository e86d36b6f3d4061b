use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{finish, ExperimentConfig};
use crate::calibration::{coarse_calibrate, default_sweep_mw, full_calibrate, in_phase_maximum, measure_transmission, open_field, CalibrationReport, FIT_POINTS};
use crate::io::{svg_plot, Manifest, OutputDir, PlotStyle, Series, Table};
use crate::optics::{BranchDrive, ChipState, ModSlot};
use crate::rng::{self, purpose};
use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulatorFit {
    pub branch: usize,
    pub slot: ModSlot,
    pub r_squared: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharacterizeReport {
    /// Peak-to-peak spread of the branch powers leaving the splitter, dB.
    pub evenness_spread_db: f64,
    pub evenness_bound_db: f64,
    pub fits: Vec<ModulatorFit>,
    pub min_r_squared: f64,
    /// Photocurrent peak of each sequential alignment curve.
    pub alignment_peaks: Vec<f64>,
    pub peaks_increasing: bool,
    /// Open-chip combined amplitude over the in-phase maximum.
    pub alignment_efficiency: f64,
    #[serde(skip)]
    pub manifest: Option<Manifest>,
}

/// Splitter evenness, transmission sweeps with sine fits and the
/// sequential interference curves of one deviated chip.
pub fn run_characterize(cfg: &ExperimentConfig, out: &std::path::Path) -> Result<CharacterizeReport> {
    cfg.validate()?;
    let mut dir = OutputDir::create(out)?;
    let mut chip = ChipState::new(&cfg.chip, &cfg.deviation, cfg.seed)?;

    let split = chip.splitter.split(Complex64::new(1.0, 0.0));
    let powers_db: Vec<f64> = split.branch_fields.iter().map(|f| 10.0 * f.norm_sqr().log10()).collect();
    let mean_db = powers_db.iter().sum::<f64>() / powers_db.len() as f64;
    let mut even = Table::new(&["branch", "power_db", "deviation_db"]);
    for (j, p) in powers_db.iter().enumerate() {
        even.push(vec![j as f64, *p, p - mean_db]);
    }
    let spread = powers_db.iter().cloned().fold(f64::MIN, f64::max) - powers_db.iter().cloned().fold(f64::MAX, f64::min);
    dir.table("evenness.csv", &even)?;
    let plot = [Series { x: "branch", y: "deviation_db", style: PlotStyle::Points }];
    dir.write("evenness.svg", svg_plot(&even, &plot, "Splitter evenness", "branch", "deviation (dB)")?.as_bytes())?;

    let calib = coarse_calibrate(&mut chip, cfg.seed)?;
    let mut r = rng::stream(cfg.seed, purpose::CALIBRATION, 1);
    let mut fits = Vec::new();
    for b in &calib.branches {
        for (slot, fit) in [(ModSlot::Slow, b.slow_fit), (ModSlot::Fast, b.fast_fit)] {
            let sweep = default_sweep_mw(&chip, b.branch, slot, FIT_POINTS);
            let y = measure_transmission(&chip, b.branch, slot, &sweep, &mut r)?;
            let mut t = Table::new(&["drive_mw", "amplitude", "fit"]);
            for (x, v) in sweep.iter().zip(&y) {
                t.push(vec![*x, *v, fit.eval(*x)]);
            }
            let name = format!("transmission_b{}_{}", b.branch, slot_name(slot));
            dir.table(&format!("{name}.csv"), &t)?;
            let plot = [
                Series { x: "drive_mw", y: "amplitude", style: PlotStyle::Points },
                Series { x: "drive_mw", y: "fit", style: PlotStyle::Line },
            ];
            let title = format!("Branch {} {} modulator, R² = {:.5}", b.branch, slot_name(slot), fit.r_squared);
            dir.write(&format!("{name}.svg"), svg_plot(&t, &plot, &title, "drive power (mW)", "amplitude")?.as_bytes())?;
            fits.push(ModulatorFit { branch: b.branch, slot, r_squared: fit.r_squared });
        }
    }

    let mut curves = Table {
        header: std::iter::once("tail_phase_rad".to_string())
            .chain(calib.alignment.iter().map(|c| format!("branches_0_to_{}", c.branch)))
            .collect(),
        rows: Vec::new(),
    };
    if let Some(first) = calib.alignment.first() {
        for i in 0..first.tail_phase_rad.len() {
            let mut row = vec![first.tail_phase_rad[i]];
            row.extend(calib.alignment.iter().map(|c| c.photocurrent[i]));
            curves.push(row);
        }
    }
    dir.table("alignment.csv", &curves)?;
    let names: Vec<String> = curves.header[1..].to_vec();
    let plot: Vec<Series> = names.iter().map(|n| Series { x: "tail_phase_rad", y: n, style: PlotStyle::Line }).collect();
    dir.write("alignment.svg", svg_plot(&curves, &plot, "Sequential phase alignment", "tail phase (rad)", "photocurrent")?.as_bytes())?;

    let peaks: Vec<f64> = calib.alignment.iter().map(|c| c.peak()).collect();
    let efficiency = open_field(&chip)?.norm() / in_phase_maximum(&chip)?;
    let report = CharacterizeReport {
        evenness_spread_db: spread,
        evenness_bound_db: cfg.deviation.splitter_unevenness_db,
        min_r_squared: fits.iter().map(|f| f.r_squared).fold(1.0, f64::min),
        fits,
        peaks_increasing: peaks.windows(2).all(|w| w[1] > w[0]),
        alignment_peaks: peaks,
        alignment_efficiency: efficiency,
        manifest: None,
    };
    let manifest = finish(dir, "characterize", cfg, &report)?;
    Ok(CharacterizeReport { manifest: Some(manifest), ..report })
}

pub(crate) fn slot_name(slot: ModSlot) -> &'static str {
    match slot {
        ModSlot::Slow => "slow",
        ModSlot::Fast => "fast",
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrateReport {
    pub calibration: CalibrationReport,
    #[serde(skip)]
    pub manifest: Option<Manifest>,
}

/// Full calibration (coarse plus BPC pre-distortion) of one deviated chip.
pub fn run_calibrate(cfg: &ExperimentConfig, out: &std::path::Path) -> Result<CalibrateReport> {
    cfg.validate()?;
    let mut dir = OutputDir::create(out)?;
    let mut chip = ChipState::new(&cfg.chip, &cfg.deviation, cfg.seed)?;
    let calibration = full_calibrate(&mut chip, &cfg.bpc, cfg.seed)?;
    let mut t = Table::new(&["branch", "slow_bias_rad", "fast_bias_rad", "tail_phase_rad", "slow_fit_r2", "fast_fit_r2", "gain", "offset"]);
    for b in &calibration.branches {
        t.push(vec![
            b.branch as f64,
            b.slow_bias_rad,
            b.fast_bias_rad,
            b.tail_phase_rad,
            b.slow_fit.r_squared,
            b.fast_fit.r_squared,
            b.predistortion.gain,
            b.predistortion.offset,
        ]);
    }
    dir.table("calibration.csv", &t)?;
    dir.json("chip.json", &chip)?;
    let mut probe = Table::new(&["drive_rad", "monitor_db"]);
    for i in 0..=64 {
        let d = -std::f64::consts::FRAC_PI_2 + std::f64::consts::PI * i as f64 / 64.0;
        probe.push(vec![d, chip.monitor_power(0, ModSlot::Fast, BranchDrive { slow: std::f64::consts::FRAC_PI_2, fast: d })?]);
    }
    dir.table("monitor_branch0.csv", &probe)?;
    let report = CalibrateReport { calibration, manifest: None };
    let manifest = finish(dir, "calibrate", cfg, &report)?;
    Ok(CalibrateReport { manifest: Some(manifest), ..report })
}
