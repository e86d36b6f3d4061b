use std::path::Path;

use serde::{Deserialize, Serialize};

use super::networks::{log_table, loss_plot};
use super::{finish, ExperimentConfig};
use crate::datagen::{build_dataset, Process};
use crate::io::{pgm_bytes, Manifest, OutputDir, Table};
use crate::network::{checkpoint, train, DomainMode, Network};
use crate::{Error, Exec, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRun {
    pub process: Process,
    pub seed: u64,
    pub mode: DomainMode,
    pub final_val_loss: f64,
    pub init_checksum: String,
    /// Relative path of the trained weights.
    pub checkpoint: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedOutcome {
    pub process: Process,
    pub seed: u64,
    pub losses: Vec<(DomainMode, f64)>,
    /// CBD below CID and NCBD, InOn worst and more than twice CBD.
    pub ordering_holds: bool,
    pub cbd_strictly_lowest: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub runs: Vec<AblationRun>,
    pub seeds: Vec<SeedOutcome>,
    #[serde(skip)]
    pub manifest: Option<Manifest>,
}

impl AblationReport {
    /// Seeds whose ordering holds, per process.
    pub fn passing_seeds(&self, process: Process) -> usize {
        self.seeds.iter().filter(|s| s.process == process && s.ordering_holds).count()
    }
}

fn outcome(process: Process, seed: u64, losses: Vec<(DomainMode, f64)>) -> SeedOutcome {
    let get = |m: DomainMode| losses.iter().find(|(k, _)| *k == m).map(|(_, l)| *l);
    let ordering_holds = match (get(DomainMode::Cbd), get(DomainMode::Cid), get(DomainMode::Ncbd), get(DomainMode::Inon)) {
        (Some(cbd), Some(cid), Some(ncbd), Some(inon)) => {
            cbd < cid && cbd < ncbd && inon > cid && inon > ncbd && inon > 2.0 * cbd
        }
        _ => false,
    };
    let cbd_strictly_lowest = get(DomainMode::Cbd)
        .is_some_and(|cbd| losses.iter().all(|(m, l)| *m == DomainMode::Cbd || cbd < *l));
    SeedOutcome { process, seed, losses, ordering_holds, cbd_strictly_lowest }
}

/// Trains every configured domain mode from the same initialization and
/// data for each process and seed.
pub fn run_domain_ablation(cfg: &ExperimentConfig, out: &Path) -> Result<AblationReport> {
    cfg.validate()?;
    if cfg.ablation.modes.is_empty() || cfg.ablation.seeds == 0 {
        return Err(Error::Config("ablation needs at least one mode and one seed".into()));
    }
    let mut dir = OutputDir::create(out)?;
    let mut runs = Vec::new();
    let mut seeds = Vec::new();
    let mut summary = Table::new(&["process", "seed", "mode", "final_val_loss"]);
    for (pi, &process) in cfg.processes.iter().enumerate() {
        for s in 0..cfg.ablation.seeds as u64 {
            let mut dcfg = cfg.dataset_for(process);
            dcfg.seed = dcfg.seed.wrapping_add(s);
            let data = build_dataset(&dcfg, cfg.exec)?;
            let (tr, va) = (data.train_examples(), data.val_examples());
            let tcfg = crate::network::TrainConfig { seed: cfg.train.seed.wrapping_add(s), ..cfg.train.clone() };
            let spec = cfg.network_spec(process);
            let trained = cfg.exec.try_map(cfg.ablation.modes.len(), |k| {
                let mode = cfg.ablation.modes[k];
                let mut net = Network::init(spec.clone(), tcfg.seed)?;
                let log = train(&mut net, &tr, &va, &tcfg, mode, Exec::Sequential)?;
                let recon = net.infer(&va[0].input, mode)?;
                Ok::<_, Error>((mode, net, log, recon))
            })?;
            let mut losses = Vec::new();
            for (mode, net, log, recon) in trained {
                let stem = format!("{}/seed{s}/{}", process.name(), mode.name());
                let t = log_table(&log);
                dir.table(&format!("{stem}_loss.csv"), &t)?;
                dir.write(&format!("{stem}_loss.svg"), loss_plot(&t, &format!("{} seed {s} {}", process.name(), mode.name()))?.as_bytes())?;
                dir.write(&format!("{stem}.ocdw"), &checkpoint::to_bytes(&net))?;
                let n = dcfg.size;
                dir.write(&format!("{stem}_recon.pgm"), &pgm_bytes(n, n, &recon, -1.0, 1.0)?)?;
                let loss = log.final_val_loss().unwrap_or(f64::NAN);
                summary.push(vec![pi as f64, s as f64, mode_index(mode), loss]);
                losses.push((mode, loss));
                runs.push(AblationRun {
                    process,
                    seed: s,
                    mode,
                    final_val_loss: loss,
                    init_checksum: log.init_checksum,
                    checkpoint: format!("{stem}.ocdw"),
                });
            }
            seeds.push(outcome(process, s, losses));
        }
    }
    dir.table("ablation.csv", &summary)?;
    let report = AblationReport { runs, seeds, manifest: None };
    let manifest = finish(dir, "ablate", cfg, &report)?;
    Ok(AblationReport { manifest: Some(manifest), ..report })
}

fn mode_index(mode: DomainMode) -> f64 {
    DomainMode::ALL.iter().position(|m| *m == mode).unwrap_or(0) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ordering_rule() {
        let l = |c, i, n, o| vec![(DomainMode::Cbd, c), (DomainMode::Cid, i), (DomainMode::Ncbd, n), (DomainMode::Inon, o)];
        assert!(outcome(Process::Mf, 0, l(0.01, 0.03, 0.012, 5.0)).ordering_holds);
        assert!(!outcome(Process::Mf, 0, l(0.01, 0.03, 0.009, 5.0)).ordering_holds);
        assert!(!outcome(Process::Mf, 0, l(0.01, 0.03, 0.012, 0.019)).ordering_holds);
        assert!(!outcome(Process::Mf, 0, l(0.01, 0.03, 0.012, 0.025)).ordering_holds);
        assert!(!outcome(Process::Mf, 0, vec![(DomainMode::Cbd, 0.1)]).ordering_holds);
    }
}
