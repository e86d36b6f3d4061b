//! Reproducible experiment runners. Each writes its data as CSV, plots as
//! SVG, images as PGM and a `manifest.json` holding the resolved config and
//! a SHA-256 of every output.

pub mod ablation;
pub mod bpc_demo;
pub mod characterize;
pub mod checks;
pub mod config;
pub mod networks;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use ablation::{run_domain_ablation, AblationReport, AblationRun, SeedOutcome};
pub use bpc_demo::{run_bpc_demo, BpcDemoReport, BpcRun, WeightSetSummary};
pub use checks::Check;
pub use characterize::{run_calibrate, run_characterize, CalibrateReport, CharacterizeReport};
pub use config::{AblationConfig, BackendChoice, BpcDemoConfig, ExperimentConfig, InjectionLevels, NetworkShape, SweepConfig};
pub use networks::{
    layer_accuracy, run_error_sweep, run_layer_accuracy, run_reconstruction, run_train, LayerAccuracyReport,
    ProcessReconstruction, ReconstructionReport, SweepPoint, SweepReport, TrainReport, TrainSummary,
};

use crate::datagen::build_dataset;
use crate::io::{read_manifest, Manifest, OutputDir, Table};
use crate::lowering::{decompose_mvm, execute_schedule, lower_conv, Schedule};
use crate::network::{Backend, DomainMode, ErrorInjection, LayerSpec, Network};
use crate::optics::ChipState;
use crate::tensor::{FeatureMap, Kernel, Matrix};
use crate::{Error, Result};

pub(crate) fn finish<T: Serialize>(dir: OutputDir, name: &str, cfg: &ExperimentConfig, summary: &T) -> Result<Manifest> {
    dir.finish(name, cfg.seed, serde_json::to_value(cfg)?, serde_json::to_value(summary)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Characterize,
    Calibrate,
    Bpc,
    Lower,
    Train,
    Reconstruct,
    Sweep,
    Ablate,
    LayerAccuracy,
}

impl Experiment {
    pub const ALL: [Experiment; 9] = [
        Experiment::Characterize,
        Experiment::Calibrate,
        Experiment::Bpc,
        Experiment::Lower,
        Experiment::Train,
        Experiment::Reconstruct,
        Experiment::Sweep,
        Experiment::Ablate,
        Experiment::LayerAccuracy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Characterize => "characterize",
            Experiment::Calibrate => "calibrate",
            Experiment::Bpc => "bpc",
            Experiment::Lower => "lower",
            Experiment::Train => "train",
            Experiment::Reconstruct => "reconstruct",
            Experiment::Sweep => "sweep",
            Experiment::Ablate => "ablate",
            Experiment::LayerAccuracy => "layer-accuracy",
        }
    }

    pub fn run(self, cfg: &ExperimentConfig, out: &Path) -> Result<Manifest> {
        Ok(self.run_checked(cfg, out)?.0)
    }

    /// Runs the experiment and evaluates its pass/fail thresholds.
    pub fn run_checked(self, cfg: &ExperimentConfig, out: &Path) -> Result<(Manifest, Vec<Check>)> {
        fn split<T>(manifest: Option<Manifest>, report: &T, checks: fn(&T) -> Vec<Check>) -> (Manifest, Vec<Check>) {
            (manifest.expect("runners always attach their manifest"), checks(report))
        }
        Ok(match self {
            Experiment::Characterize => {
                let r = run_characterize(cfg, out)?;
                split(r.manifest.clone(), &r, CharacterizeReport::checks)
            }
            Experiment::Calibrate => {
                let r = run_calibrate(cfg, out)?;
                split(r.manifest.clone(), &r, CalibrateReport::checks)
            }
            Experiment::Bpc => {
                let r = run_bpc_demo(cfg, out)?;
                split(r.manifest.clone(), &r, BpcDemoReport::checks)
            }
            Experiment::Lower => {
                let r = run_lower(cfg, out)?;
                split(r.manifest.clone(), &r, LowerReport::checks)
            }
            Experiment::Train => {
                let r = run_train(cfg, out)?;
                split(r.manifest.clone(), &r, TrainReport::checks)
            }
            Experiment::Reconstruct => {
                let r = run_reconstruction(cfg, out)?;
                split(r.manifest.clone(), &r, ReconstructionReport::checks)
            }
            Experiment::Sweep => {
                let r = run_error_sweep(cfg, out)?;
                split(r.manifest.clone(), &r, SweepReport::checks)
            }
            Experiment::Ablate => {
                let r = run_domain_ablation(cfg, out)?;
                split(r.manifest.clone(), &r, AblationReport::checks)
            }
            Experiment::LayerAccuracy => {
                let r = run_layer_accuracy(cfg, out)?;
                split(r.manifest.clone(), &r, LayerAccuracyReport::checks)
            }
        })
    }
}

impl std::str::FromStr for Experiment {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment '{s}'")))
    }
}

/// Outcome of replaying a manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct Replay {
    pub original: Manifest,
    pub rerun: Manifest,
}

impl Replay {
    pub fn identical(&self) -> bool {
        self.original.csv_digest() == self.rerun.csv_digest()
    }
}

/// Reruns the experiment recorded in `manifest` into `out`.
pub fn rerun_manifest(manifest: &Path, out: &Path) -> Result<Replay> {
    let original = read_manifest(manifest)?;
    let exp: Experiment = original.experiment.parse()?;
    let cfg: ExperimentConfig = serde_json::from_value(original.config.clone())
        .map_err(|e| Error::Config(format!("{}: {e}", manifest.display())))?;
    let rerun = exp.run(&cfg, out)?;
    Ok(Replay { original, rerun })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerReport {
    pub fc_steps: usize,
    pub conv_steps: usize,
    /// Largest deviation of the ideal-chip run from the dense result.
    pub max_abs_error: f64,
    #[serde(skip)]
    pub manifest: Option<Manifest>,
}

/// Lowers the first FC and first conv layer of a freshly initialized network
/// for one validation input and executes both schedules on an ideal chip.
pub fn run_lower(cfg: &ExperimentConfig, out: &Path) -> Result<LowerReport> {
    cfg.validate()?;
    let mut dir = OutputDir::create(out)?;
    let process = cfg.dataset.process;
    let data = build_dataset(&cfg.dataset_for(process), cfg.exec)?;
    let net = Network::init(cfg.network_spec(process), cfg.train.seed)?;
    let ex = &data.examples[data.val[0]];
    let trace = net.forward(&ex.input, Backend::Exact, DomainMode::Cbd, &ErrorInjection::none(), 0)?;
    let ideal = ChipState::ideal(&cfg.chip.clone().noise_free(), cfg.seed)?;
    let m = ideal.active;
    let mut schedules: Vec<(&str, Schedule, Vec<f64>)> = Vec::new();
    let n = net.spec.image_size;
    for (l, spec) in net.spec.layers.iter().enumerate() {
        let input = &trace.inputs[l];
        let exact = net.layer_linear(l, input, Backend::Exact, 0)?;
        match *spec {
            LayerSpec::FullyConnected { inputs, outputs, .. } if !schedules.iter().any(|s| s.0 == "fc") => {
                let a = Matrix::from_vec(inputs, outputs, net.params[l].weights.clone())?;
                schedules.push(("fc", decompose_mvm(input, &a, m)?, exact));
            }
            LayerSpec::Conv2D { in_channels, out_channels, kernel_size, .. } if !schedules.iter().any(|s| s.0 == "conv") => {
                let map = FeatureMap::from_vec(in_channels, n, n, input.clone())?;
                let k = Kernel::from_vec(out_channels, in_channels, kernel_size, net.params[l].weights.clone())?;
                schedules.push(("conv", lower_conv(&map, &k, m)?, exact));
            }
            _ => {}
        }
    }
    let mut max_err = 0.0f64;
    let mut steps = Table::new(&["layer", "steps", "accumulators"]);
    for (k, (name, s, exact)) in schedules.iter().enumerate() {
        dir.write(&format!("{name}.ocds"), &s.to_bytes())?;
        let mut csv = Vec::new();
        s.write_csv(&mut csv)?;
        dir.write(&format!("{name}_schedule.csv"), &csv)?;
        let run = execute_schedule(s, &ideal, cfg.seed, cfg.exec)?;
        max_err = run.iter().zip(exact).fold(max_err, |e, (a, b)| e.max((a - b).abs()));
        steps.push(vec![k as f64, s.step_count() as f64, s.accumulator_count as f64]);
    }
    dir.table("steps.csv", &steps)?;
    let count = |n: &str| schedules.iter().find(|s| s.0 == n).map_or(0, |s| s.1.step_count());
    let report = LowerReport { fc_steps: count("fc"), conv_steps: count("conv"), max_abs_error: max_err, manifest: None };
    let manifest = finish(dir, "lower", cfg, &report)?;
    Ok(LowerReport { manifest: Some(manifest), ..report })
}
