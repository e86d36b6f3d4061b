use serde::{Deserialize, Serialize};

use super::{finish, ExperimentConfig};
use crate::calibration::{bpc, coarse_calibrate, BpcReport};
use crate::io::{svg_plot, Manifest, OutputDir, PlotStyle, Series, Table};
use crate::optics::ChipState;
use crate::{Error, Result};

/// Normalized residual std window expected before correction.
pub const PRE_BPC_RANGE: (f64, f64) = (0.05, 0.07);
pub const POST_BPC_MAX: f64 = 0.035;
pub const ITERATIONS_ALLOWED: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BpcRun {
    pub chip_seed: u64,
    pub weights: Vec<f64>,
    pub std_before: f64,
    /// Residual std after at most two updates.
    pub std_after_two: f64,
    pub std_final: f64,
    pub iterations: usize,
    pub trajectory: Vec<f64>,
}

impl BpcRun {
    fn from_report(chip_seed: u64, r: &BpcReport) -> Self {
        Self {
            chip_seed,
            weights: r.w_target.clone(),
            std_before: r.residual_std_before,
            std_after_two: r.std_after(ITERATIONS_ALLOWED),
            std_final: r.residual_std_after,
            iterations: r.iterations,
            trajectory: r.std_history.clone(),
        }
    }

    pub fn reproduces_figure(&self) -> bool {
        (PRE_BPC_RANGE.0..=PRE_BPC_RANGE.1).contains(&self.std_before) && self.std_after_two <= POST_BPC_MAX
    }

    /// Two updates get within 10% of the lowest std seen in the run.
    pub fn settled_within_two(&self) -> bool {
        let best = self.trajectory.iter().cloned().fold(f64::MAX, f64::min);
        self.std_after_two <= 1.1 * best
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightSetSummary {
    pub weights: Vec<f64>,
    pub median_before: f64,
    pub median_after_two: f64,
    pub pass_fraction: f64,
    pub settled_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BpcDemoReport {
    pub runs: Vec<BpcRun>,
    pub sets: Vec<WeightSetSummary>,
    #[serde(skip)]
    pub manifest: Option<Manifest>,
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Coarsely calibrated chips `seed..seed+chips`, each corrected by BPC for
/// every configured weight set.
pub fn run_bpc_demo(cfg: &ExperimentConfig, out: &std::path::Path) -> Result<BpcDemoReport> {
    cfg.validate()?;
    if cfg.bpc_demo.weight_sets.is_empty() || cfg.bpc_demo.chips == 0 {
        return Err(Error::Config("bpc demo needs at least one chip and one weight set".into()));
    }
    let mut dir = OutputDir::create(out)?;
    let sets = &cfg.bpc_demo.weight_sets;
    let per_chip = cfg.exec.try_map(cfg.bpc_demo.chips, |i| {
        let seed = cfg.seed + i as u64;
        let mut chip = ChipState::new(&cfg.chip, &cfg.deviation, seed)?;
        coarse_calibrate(&mut chip, seed)?;
        sets.iter().map(|w| bpc(&chip, w, &cfg.bpc, seed)).collect::<Result<Vec<_>>>()
    })?;

    let mut summary = Table::new(&["chip_seed", "weight_set", "std_before", "std_after_two", "std_final", "iterations"]);
    let mut trajectory = Table::new(&["chip_seed", "weight_set", "iteration", "std"]);
    let mut runs = Vec::new();
    for (i, reports) in per_chip.iter().enumerate() {
        let seed = cfg.seed + i as u64;
        for (k, r) in reports.iter().enumerate() {
            let run = BpcRun::from_report(seed, r);
            summary.push(vec![seed as f64, k as f64, run.std_before, run.std_after_two, run.std_final, run.iterations as f64]);
            for (it, s) in run.trajectory.iter().enumerate() {
                trajectory.push(vec![seed as f64, k as f64, it as f64, *s]);
            }
            runs.push(run);
        }
    }
    dir.table("bpc_summary.csv", &summary)?;
    dir.table("bpc_trajectory.csv", &trajectory)?;

    for (k, r) in per_chip[0].iter().enumerate() {
        let mut scatter = Table::new(&["expected", "measured_before", "measured_after"]);
        for ((e, b), (_, a)) in r.samples_before.iter().zip(&r.samples_after) {
            scatter.push(vec![*e, *b, *a]);
        }
        dir.table(&format!("scatter_set{k}.csv"), &scatter)?;
        let plot = [
            Series { x: "expected", y: "measured_before", style: PlotStyle::Points },
            Series { x: "expected", y: "measured_after", style: PlotStyle::Points },
        ];
        dir.write(&format!("scatter_set{k}.svg"), svg_plot(&scatter, &plot, &format!("Weights {:?}", r.w_target), "expected", "measured")?.as_bytes())?;

        let before: Vec<f64> = r.samples_before.iter().map(|(e, m)| m - e).collect();
        let after: Vec<f64> = r.samples_after.iter().map(|(e, m)| m - e).collect();
        let hist = histogram(&before, &after, 31);
        dir.table(&format!("residuals_set{k}.csv"), &hist)?;
        let plot = [
            Series { x: "residual", y: "count_before", style: PlotStyle::Line },
            Series { x: "residual", y: "count_after", style: PlotStyle::Line },
        ];
        dir.write(&format!("residuals_set{k}.svg"), svg_plot(&hist, &plot, "Residual histogram", "residual", "count")?.as_bytes())?;

        let mut traj = Table::new(&["iteration", "std"]);
        r.std_history.iter().enumerate().for_each(|(i, s)| traj.push(vec![i as f64, *s]));
        dir.write(
            &format!("trajectory_set{k}.svg"),
            svg_plot(&traj, &[Series { x: "iteration", y: "std", style: PlotStyle::Line }], "BPC trajectory", "iteration", "normalized std")?.as_bytes(),
        )?;
    }

    let set_summaries = sets
        .iter()
        .enumerate()
        .map(|(k, w)| {
            let mine: Vec<&BpcRun> = runs.iter().skip(k).step_by(sets.len()).collect();
            let n = mine.len() as f64;
            WeightSetSummary {
                weights: w.clone(),
                median_before: median(mine.iter().map(|r| r.std_before).collect()),
                median_after_two: median(mine.iter().map(|r| r.std_after_two).collect()),
                pass_fraction: mine.iter().filter(|r| r.reproduces_figure()).count() as f64 / n,
                settled_fraction: mine.iter().filter(|r| r.settled_within_two()).count() as f64 / n,
            }
        })
        .collect();
    let report = BpcDemoReport { runs, sets: set_summaries, manifest: None };
    let manifest = finish(dir, "bpc", cfg, &report.sets)?;
    Ok(BpcDemoReport { manifest: Some(manifest), ..report })
}

fn histogram(before: &[f64], after: &[f64], bins: usize) -> Table {
    let lim = before.iter().chain(after).fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
    let width = 2.0 * lim / bins as f64;
    let count = |xs: &[f64], b: usize| {
        xs.iter().filter(|v| (((*v + lim) / width).floor() as usize).min(bins - 1) == b).count() as f64
    };
    let mut t = Table::new(&["residual", "count_before", "count_after"]);
    for b in 0..bins {
        t.push(vec![-lim + (b as f64 + 0.5) * width, count(before, b), count(after, b)]);
    }
    t
}
