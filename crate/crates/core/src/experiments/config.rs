use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::calibration::BpcConfig;
use crate::datagen::{DatasetConfig, Process};
use crate::network::{DomainMode, NetworkSpec, TrainConfig};
use crate::optics::{ChipConfig, DeviationProfile};
use crate::{Error, Exec, Result};

/// Reconstruction network widths; the input width follows from the dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkShape {
    pub hidden: usize,
    pub channels: usize,
}

impl Default for NetworkShape {
    fn default() -> Self {
        Self { hidden: 512, channels: 8 }
    }
}

/// Per-layer-kind error levels, relative to each layer's output range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InjectionLevels {
    pub fc_std: f64,
    pub conv_std: f64,
}

impl Default for InjectionLevels {
    fn default() -> Self {
        Self { fc_std: 0.0076, conv_std: 0.0104 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub sigmas: Vec<f64>,
    pub trials_per_point: usize,
    /// Lower end of the region used for the linear fit.
    pub fit_from: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { sigmas: (0..=10).map(|i| i as f64 * 0.01).collect(), trials_per_point: 50, fit_from: 0.01 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BpcDemoConfig {
    pub chips: usize,
    pub weight_sets: Vec<Vec<f64>>,
}

impl Default for BpcDemoConfig {
    fn default() -> Self {
        Self { chips: 50, weight_sets: vec![vec![1.0, 1.0, 1.0], vec![0.2, 1.0, 0.8]] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblationConfig {
    pub seeds: usize,
    pub modes: Vec<DomainMode>,
}

impl Default for AblationConfig {
    fn default() -> Self {
        Self { seeds: 5, modes: DomainMode::ALL.to_vec() }
    }
}

/// Where the perturbed reconstructions run: the exact network with
/// per-layer error injection, or every layer through a calibrated chip.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendChoice {
    #[default]
    Exact,
    Chip,
}

impl std::str::FromStr for BackendChoice {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(BackendChoice::Exact),
            "chip" => Ok(BackendChoice::Chip),
            _ => Err(Error::Config(format!("unknown backend '{s}'"))),
        }
    }
}

/// Everything an experiment needs; stored verbatim in every manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub chip: ChipConfig,
    pub deviation: DeviationProfile,
    pub bpc: BpcConfig,
    pub bpc_demo: BpcDemoConfig,
    pub dataset: DatasetConfig,
    pub processes: Vec<Process>,
    pub network: NetworkShape,
    pub train: TrainConfig,
    pub mode: DomainMode,
    pub backend: BackendChoice,
    pub injection: InjectionLevels,
    pub sweep: SweepConfig,
    pub ablation: AblationConfig,
    /// Validation examples pushed through the chip per layer kind.
    pub layer_samples: usize,
    /// Trained weights per process name; missing entries are trained on demand.
    pub checkpoints: BTreeMap<String, PathBuf>,
    pub exec: Exec,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            chip: ChipConfig { photocurrent_noise_std: 0.2, ..ChipConfig::default() },
            deviation: DeviationProfile::coarse(),
            bpc: BpcConfig::default(),
            bpc_demo: BpcDemoConfig::default(),
            dataset: DatasetConfig::default(),
            processes: Process::ALL.to_vec(),
            network: NetworkShape::default(),
            train: TrainConfig::default(),
            mode: DomainMode::Cbd,
            backend: BackendChoice::Exact,
            injection: InjectionLevels::default(),
            sweep: SweepConfig::default(),
            ablation: AblationConfig::default(),
            layer_samples: 8,
            checkpoints: BTreeMap::new(),
            exec: Exec::Parallel,
        }
    }
}

impl ExperimentConfig {
    /// 32×32 images, FC widths 2048→512→1024, 8 channels, 600/90 examples, 200 epochs.
    pub fn toy() -> Self {
        Self::default()
    }

    /// 16×16 images, 128 hidden units, 4 channels, 200/30 examples and 60
    /// epochs: the full experiment set fits in tens of minutes on one core.
    pub fn compact() -> Self {
        let epochs = 60;
        Self {
            dataset: DatasetConfig { size: 16, count: 230, radon_angles: 30, ..DatasetConfig::default() },
            network: NetworkShape { hidden: 128, channels: 4 },
            train: TrainConfig { epochs, decay_epoch: epochs * 85 / 100, ..TrainConfig::default() },
            ..Self::default()
        }
    }

    /// Overrides the master seed and the seeds derived from it.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.dataset.seed = seed;
        self.train.seed = seed;
        self
    }

    pub fn dataset_for(&self, process: Process) -> DatasetConfig {
        DatasetConfig { process, ..self.dataset.clone() }
    }

    pub fn network_spec(&self, process: Process) -> NetworkSpec {
        let d = self.dataset_for(process);
        NetworkSpec::automap(d.input_len(), d.size, self.network.hidden, self.network.channels)
    }

    pub fn validate(&self) -> Result<()> {
        self.chip.validate()?;
        self.deviation.validate()?;
        self.train.validate()?;
        for p in &self.processes {
            self.network_spec(*p).validate()?;
        }
        if self.sweep.sigmas.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(Error::Config("sweep sigmas must be finite and non-negative".into()));
        }
        if self.bpc.batch_size == 0 || self.bpc.max_iters == 0 {
            return Err(Error::Config("bpc batch_size and max_iters must be positive".into()));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(format!("line {}: {e}", e.line())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate_and_round_trip() {
        for cfg in [ExperimentConfig::toy(), ExperimentConfig::compact()] {
            cfg.validate().unwrap();
            let text = serde_json::to_string(&cfg).unwrap();
            assert_eq!(ExperimentConfig::from_json(&text).unwrap(), cfg);
        }
        let spec = ExperimentConfig::toy().network_spec(Process::Mf);
        assert_eq!(spec.input_len(), 2048);
        assert_eq!(spec.layers[1], crate::network::LayerSpec::FullyConnected {
            inputs: 512,
            outputs: 1024,
            activation: crate::network::Activation::Tanh
        });
    }

    #[test]
    fn config_errors_carry_the_line() {
        let err = ExperimentConfig::from_json("{\n\"seed\": 1,\n\"bogus\": 2\n}").unwrap_err();
        assert!(matches!(&err, Error::Config(m) if m.contains("line 3")), "{err}");
        let err = ExperimentConfig::from_json(r#"{"chip": {"active_branches": 20}}"#).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn partial_configs_fill_defaults() {
        let cfg = ExperimentConfig::from_json(r#"{"seed": 4}"#).unwrap();
        assert_eq!(cfg.seed, 4);
        assert_eq!(cfg.chip.photocurrent_noise_std, 0.2);
    }
}
