use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{finish, BackendChoice, ExperimentConfig};
use crate::calibration::full_calibrate;
use crate::datagen::{build_dataset, Dataset, Process};
use crate::io::{mosaic, pgm_bytes, svg_plot, Manifest, OutputDir, PlotStyle, Series, Table};
use crate::lowering::count_mvm_steps;
use crate::network::{checkpoint, train, Backend, DomainMode, ErrorInjection, LayerSpec, Network, TrainLog};
use crate::optics::ChipState;
use crate::rng::{self, purpose};
use crate::stats::{linear_fit, mean, normalized_residual_std, std, LinearFit};
use crate::{Error, Exec, Result};

/// Loss log as a table.
pub fn log_table(log: &TrainLog) -> Table {
    let mut t = Table::new(&["epoch", "train_loss", "val_loss", "lr"]);
    for e in &log.epochs {
        t.push(vec![e.epoch as f64, e.train_loss, e.val_loss, e.learning_rate]);
    }
    t
}

pub(crate) fn loss_plot(t: &Table, title: &str) -> Result<String> {
    let s = [
        Series { x: "epoch", y: "train_loss", style: PlotStyle::Line },
        Series { x: "epoch", y: "val_loss", style: PlotStyle::Line },
    ];
    svg_plot(t, &s, title, "epoch", "loss")
}

/// Trains a network for `process` in `mode`, or loads the configured checkpoint.
pub(crate) fn obtain_network(
    cfg: &ExperimentConfig,
    process: Process,
    data: &Dataset,
    dir: &mut OutputDir,
) -> Result<(Network, Option<TrainLog>)> {
    if let Some(path) = cfg.checkpoints.get(process.name()) {
        let net = checkpoint::load(path)?;
        if net.spec != cfg.network_spec(process) {
            return Err(Error::Config(format!("checkpoint {} does not match the configured network", path.display())));
        }
        return Ok((net, None));
    }
    let mut net = Network::init(cfg.network_spec(process), cfg.train.seed)?;
    let log = train(&mut net, &data.train_examples(), &data.val_examples(), &cfg.train, cfg.mode, cfg.exec)?;
    let name = format!("{}_{}", process.name(), cfg.mode.name());
    dir.write(&format!("{name}.ocdw"), &checkpoint::to_bytes(&net))?;
    let t = log_table(&log);
    dir.table(&format!("{name}_loss.csv"), &t)?;
    dir.write(&format!("{name}_loss.svg"), loss_plot(&t, &format!("{} training ({})", process.name(), cfg.mode.name()))?.as_bytes())?;
    Ok((net, Some(log)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub process: Process,
    pub mode: DomainMode,
    pub final_train_loss: f64,
    pub final_val_loss: f64,
    /// Train loss fell at every one of the first ten epochs.
    pub decreasing_first_ten: bool,
    pub init_checksum: String,
    pub final_checksum: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub runs: Vec<TrainSummary>,
    #[serde(skip)]
    pub manifest: Option<Manifest>,
}

/// Trains one network per configured process; checkpoints and loss logs
/// go to the output directory.
pub fn run_train(cfg: &ExperimentConfig, out: &Path) -> Result<TrainReport> {
    cfg.validate()?;
    let mut dir = OutputDir::create(out)?;
    let mut runs = Vec::new();
    for &process in &cfg.processes {
        let data = build_dataset(&cfg.dataset_for(process), cfg.exec)?;
        let mut trained = cfg.clone();
        trained.checkpoints.remove(process.name());
        let (net, log) = obtain_network(&trained, process, &data, &mut dir)?;
        let log = log.expect("training ran");
        let first: Vec<f64> = log.epochs.iter().take(10).map(|e| e.train_loss).collect();
        runs.push(TrainSummary {
            process,
            mode: cfg.mode,
            final_train_loss: log.epochs.last().map_or(f64::NAN, |e| e.train_loss),
            final_val_loss: log.final_val_loss().unwrap_or(f64::NAN),
            decreasing_first_ten: first.len() == 10 && first.windows(2).all(|w| w[1] < w[0]),
            init_checksum: log.init_checksum.clone(),
            final_checksum: net.checksum(),
        });
    }
    let report = TrainReport { runs, manifest: None };
    let manifest = finish(dir, "train", cfg, &report)?;
    Ok(TrainReport { manifest: Some(manifest), ..report })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerAccuracyReport {
    pub fc_normalized_std: f64,
    pub conv_normalized_std: f64,
    /// Equivalent temporal-multiplexing steps per example.
    pub fc_steps: u64,
    pub conv_steps: u64,
    #[serde(skip)]
    pub manifest: Option<Manifest>,
}

/// First FC and first conv layer of a trained network, executed on a fully
/// calibrated chip and compared with the exact linear outputs.
pub fn run_layer_accuracy(cfg: &ExperimentConfig, out: &Path) -> Result<LayerAccuracyReport> {
    cfg.validate()?;
    let mut dir = OutputDir::create(out)?;
    let process = cfg.dataset.process;
    let data = build_dataset(&cfg.dataset_for(process), cfg.exec)?;
    let (net, _) = obtain_network(cfg, process, &data, &mut dir)?;
    let mut chip = ChipState::new(&cfg.chip, &cfg.deviation, cfg.seed)?;
    let calibration = full_calibrate(&mut chip, &cfg.bpc, cfg.seed)?;
    dir.json("calibration.json", &calibration)?;
    let report = layer_accuracy(cfg, &net, &data, &chip, &mut dir)?;
    let manifest = finish(dir, "layer-accuracy", cfg, &report)?;
    Ok(LayerAccuracyReport { manifest: Some(manifest), ..report })
}

/// Measured-vs-exact comparison of the first FC and first conv layer on `chip`.
pub fn layer_accuracy(cfg: &ExperimentConfig, net: &Network, data: &Dataset, chip: &ChipState, dir: &mut OutputDir) -> Result<LayerAccuracyReport> {
    let fc = net.spec.layers.iter().position(|l| l.is_fc()).ok_or_else(|| Error::Config("network has no FC layer".into()))?;
    let conv = net
        .spec
        .layers
        .iter()
        .position(|l| matches!(l, LayerSpec::Conv2D { .. }))
        .ok_or_else(|| Error::Config("network has no conv layer".into()))?;
    let examples: Vec<_> = data.val.iter().take(cfg.layer_samples.max(1)).map(|&i| &data.examples[i]).collect();
    let jobs = cfg.exec.try_map(examples.len(), |i| {
        let ex = examples[i];
        let trace = net.forward(&ex.input, Backend::Exact, DomainMode::Cbd, &ErrorInjection::none(), i as u64)?;
        let seed = rng::derive_seed(cfg.seed, purpose::TRIAL, i as u64);
        let backend = Backend::Chip { chip, seed, exec: Exec::Sequential };
        let mut res = Vec::new();
        for layer in [fc, conv] {
            let input = &trace.inputs[layer];
            res.push((net.layer_linear(layer, input, Backend::Exact, 0)?, net.layer_linear(layer, input, backend, i as u64)?));
        }
        Ok::<_, Error>(res)
    })?;
    let mut stds = Vec::new();
    for (k, name) in ["fc", "conv"].iter().enumerate() {
        let mut t = Table::new(&["example", "expected", "measured"]);
        let (mut e_all, mut m_all) = (Vec::new(), Vec::new());
        for (i, job) in jobs.iter().enumerate() {
            let (e, m) = &job[k];
            for (a, b) in e.iter().zip(m) {
                t.push(vec![i as f64, *a, *b]);
            }
            e_all.extend_from_slice(e);
            m_all.extend_from_slice(m);
        }
        let s = normalized_residual_std(&m_all, &e_all);
        stds.push(s);
        dir.table(&format!("layer_{name}.csv"), &t)?;
        let plot = [Series { x: "expected", y: "measured", style: PlotStyle::Points }];
        dir.write(
            &format!("layer_{name}.svg"),
            svg_plot(&t, &plot, &format!("{name} layer on chip, normalized std {s:.5}"), "expected", "measured")?.as_bytes(),
        )?;
    }
    let m = chip.active;
    let steps = |l: usize| match net.spec.layers[l] {
        LayerSpec::FullyConnected { inputs, outputs, .. } => count_mvm_steps(inputs, outputs, m),
        LayerSpec::Conv2D { in_channels, out_channels, kernel_size, .. }
        | LayerSpec::Deconv2D { in_channels, out_channels, kernel_size, .. } => {
            let px = net.spec.image_size * net.spec.image_size;
            count_mvm_steps(in_channels * kernel_size * kernel_size, px, m) * out_channels as u64
        }
    };
    Ok(LayerAccuracyReport { fc_normalized_std: stds[0], conv_normalized_std: stds[1], fc_steps: steps(fc), conv_steps: steps(conv), manifest: None })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessReconstruction {
    pub process: Process,
    pub exact_error_std: f64,
    pub injected_error_std: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionReport {
    pub processes: Vec<ProcessReconstruction>,
    #[serde(skip)]
    pub manifest: Option<Manifest>,
}

fn error_std(recon: &[f64], truth: &[f64]) -> f64 {
    std(&recon.iter().zip(truth).map(|(a, b)| a - b).collect::<Vec<_>>())
}

/// Exact and error-injected reconstructions of the validation phantoms.
pub fn run_reconstruction(cfg: &ExperimentConfig, out: &Path) -> Result<ReconstructionReport> {
    cfg.validate()?;
    let mut dir = OutputDir::create(out)?;
    let mut processes = Vec::new();
    for &process in &cfg.processes {
        let data = build_dataset(&cfg.dataset_for(process), cfg.exec)?;
        let (net, _) = obtain_network(cfg, process, &data, &mut dir)?;
        let injection = ErrorInjection::by_kind(&net.spec, cfg.injection.fc_std, cfg.injection.conv_std, rng::derive_seed(cfg.seed, purpose::INJECTION, 0));
        let chip = match cfg.backend {
            BackendChoice::Exact => None,
            BackendChoice::Chip => {
                let mut chip = ChipState::new(&cfg.chip, &cfg.deviation, cfg.seed)?;
                full_calibrate(&mut chip, &cfg.bpc, cfg.seed)?;
                Some(chip)
            }
        };
        let val = &data.val;
        let recons = cfg.exec.try_map(val.len(), |k| {
            let ex = &data.examples[val[k]];
            let exact = net.infer(&ex.input, cfg.mode)?;
            let trace = match &chip {
                None => net.forward(&ex.input, Backend::Exact, cfg.mode, &injection, k as u64)?,
                Some(chip) => {
                    let backend = Backend::Chip { chip, seed: cfg.seed, exec: Exec::Sequential };
                    net.forward(&ex.input, backend, cfg.mode, &ErrorInjection::none(), k as u64)?
                }
            };
            let injected = trace.outputs.last().cloned().unwrap_or_default();
            Ok::<_, Error>((exact, injected))
        })?;
        let mut t = Table::new(&["image", "exact_error_std", "injected_error_std"]);
        for (k, (e, j)) in recons.iter().enumerate() {
            let truth = &data.examples[val[k]].truth;
            t.push(vec![k as f64, error_std(e, truth), error_std(j, truth)]);
        }
        let exact = mean(&t.column("exact_error_std").unwrap_or_default());
        let injected = mean(&t.column("injected_error_std").unwrap_or_default());
        dir.table(&format!("{}_errors.csv", process.name()), &t)?;

        let n = data.config.size;
        let shown = recons.len().min(4);
        let mut tiles: Vec<Vec<f64>> = Vec::new();
        for (k, (e, j)) in recons.iter().take(shown).enumerate() {
            let truth = &data.examples[val[k]].truth;
            let amp = |r: &[f64]| r.iter().zip(truth).map(|(a, b)| 10.0 * (a - b)).collect::<Vec<_>>();
            tiles.extend([truth.clone(), e.clone(), j.clone(), amp(e), amp(j)]);
        }
        let refs: Vec<&[f64]> = tiles.iter().map(Vec::as_slice).collect();
        let (w, h, pix) = mosaic(&refs, n, 5);
        dir.write(&format!("{}_grid.pgm", process.name()), &pgm_bytes(w, h, &pix, -1.0, 1.0)?)?;
        processes.push(ProcessReconstruction { process, exact_error_std: exact, injected_error_std: injected, ratio: injected / exact });
    }
    let report = ReconstructionReport { processes, manifest: None };
    let manifest = finish(dir, "reconstruct", cfg, &report)?;
    Ok(ReconstructionReport { manifest: Some(manifest), ..report })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub sigma: f64,
    pub mean_error_std: f64,
    pub spread: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub process: Process,
    pub exact_error_std: f64,
    pub points: Vec<SweepPoint>,
    pub fit: LinearFit,
    pub monotone: bool,
    #[serde(skip)]
    pub manifest: Option<Manifest>,
}

/// Reconstruction error against the injected per-layer error level. Trial
/// `t` uses validation image `t mod n` and the same noise stream at every
/// sigma.
pub fn run_error_sweep(cfg: &ExperimentConfig, out: &Path) -> Result<SweepReport> {
    cfg.validate()?;
    let mut dir = OutputDir::create(out)?;
    let process = cfg.dataset.process;
    let data = build_dataset(&cfg.dataset_for(process), cfg.exec)?;
    let (net, _) = obtain_network(cfg, process, &data, &mut dir)?;
    let trials = cfg.sweep.trials_per_point.max(1);
    let val = &data.val;
    let exact_errors = cfg.exec.try_map(val.len(), |k| {
        let ex = &data.examples[val[k]];
        Ok::<_, Error>(error_std(&net.infer(&ex.input, cfg.mode)?, &ex.truth))
    })?;
    let mut t = Table::new(&["sigma", "mean_error_std", "spread"]);
    let mut points = Vec::new();
    for &sigma in &cfg.sweep.sigmas {
        let errs = cfg.exec.try_map(trials, |trial| {
            let ex = &data.examples[val[trial % val.len()]];
            let seed = rng::derive_seed(cfg.seed, purpose::INJECTION, trial as u64);
            let recon = net.infer_with_injection(&ex.input, cfg.mode, sigma, seed, trial as u64)?;
            Ok::<_, Error>(error_std(&recon, &ex.truth))
        })?;
        let p = SweepPoint { sigma, mean_error_std: mean(&errs), spread: std(&errs) };
        t.push(vec![p.sigma, p.mean_error_std, p.spread]);
        points.push(p);
    }
    dir.table("sweep.csv", &t)?;
    let fit_pts: Vec<&SweepPoint> = points.iter().filter(|p| p.sigma >= cfg.sweep.fit_from).collect();
    let fit = linear_fit(
        &fit_pts.iter().map(|p| p.sigma).collect::<Vec<_>>(),
        &fit_pts.iter().map(|p| p.mean_error_std).collect::<Vec<_>>(),
    );
    let mut with_fit = t.clone();
    with_fit.header.push("fit".into());
    with_fit.rows.iter_mut().for_each(|r| {
        let f = fit.slope * r[0] + fit.intercept;
        r.push(f)
    });
    let plot = [
        Series { x: "sigma", y: "mean_error_std", style: PlotStyle::Points },
        Series { x: "sigma", y: "fit", style: PlotStyle::Line },
    ];
    dir.write("sweep.svg", svg_plot(&with_fit, &plot, &format!("Error sweep, R² = {:.4}", fit.r_squared), "injected sigma", "image error std")?.as_bytes())?;
    let mut sorted = points.clone();
    sorted.sort_by(|a, b| a.sigma.total_cmp(&b.sigma));
    let report = SweepReport {
        process,
        exact_error_std: mean(&(0..trials).map(|t| exact_errors[t % val.len()]).collect::<Vec<_>>()),
        monotone: sorted.windows(2).all(|w| w[1].mean_error_std >= w[0].mean_error_std),
        points,
        fit,
        manifest: None,
    };
    let manifest = finish(dir, "sweep", cfg, &report)?;
    Ok(SweepReport { manifest: Some(manifest), ..report })
}
