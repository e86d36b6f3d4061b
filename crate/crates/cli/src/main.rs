//! `ocdc`: runs the chip, calibration and reconstruction experiments and
//! writes CSV/SVG/PGM outputs plus a hashed `manifest.json` per run.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ocdc::datagen::{build_dataset, example_pgm, save_dataset, Process};
use ocdc::experiments::{rerun_manifest, BackendChoice, Check, Experiment, ExperimentConfig};
use ocdc::io::Manifest;
use ocdc::lowering::Schedule;
use ocdc::network::DomainMode;
use ocdc::{Error, Exec};

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_CHECK: u8 = 3;

#[derive(Parser)]
#[command(name = "ocdc", version, about = "Optical coherent dot-product chip experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Splitter evenness, modulator transmission fits and phase alignment curves.
    Characterize(RunArgs),
    /// Full calibration of one deviated chip.
    Calibrate(RunArgs),
    /// In-situ backpropagation control on many deviated chips.
    Bpc(RunArgs),
    /// Lowers one FC and one conv layer to dot-product schedules.
    Lower {
        #[command(flatten)]
        run: RunArgs,
        /// Print a stored `.ocds` schedule as CSV and exit.
        #[arg(long, value_name = "FILE")]
        dump_schedule: Option<PathBuf>,
    },
    /// Trains one reconstruction network per process.
    Train(RunArgs),
    /// Exact versus perturbed reconstructions of the validation images.
    Reconstruct(RunArgs),
    /// Reconstruction error against the injected error level.
    Sweep(RunArgs),
    /// Trains every domain mode on every process over several seeds.
    Ablate(RunArgs),
    /// First FC and conv layer executed on a calibrated chip.
    LayerAccuracy(RunArgs),
    /// Builds and stores a dataset.
    Dataset {
        #[command(flatten)]
        run: RunArgs,
        /// Also write example INDEX as a PGM image.
        #[arg(long, value_name = "INDEX")]
        export_example: Option<usize>,
    },
    /// Reruns a manifest and compares the CSV outputs.
    Replay {
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Toy,
    Compact,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config JSON, or a manifest from an earlier run.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Starting point when no config file is given.
    #[arg(long, value_enum, default_value = "toy")]
    preset: Preset,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default `runs/<experiment>`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// exact or chip
    #[arg(long)]
    backend: Option<String>,
    /// cbd, cid, ncbd or inon
    #[arg(long)]
    mode: Option<String>,
    /// Comma-separated processes: mf, vpds, radon.
    #[arg(long)]
    process: Option<String>,
    /// Use stored weights for a process, as PROCESS=PATH.
    #[arg(long, value_name = "PROCESS=PATH")]
    checkpoint: Vec<String>,
    /// Run every loop on the calling thread.
    #[arg(long)]
    sequential: bool,
    /// Exit with status 3 when any acceptance threshold fails.
    #[arg(long)]
    check: bool,
}

enum Failure {
    Config(String),
    Run(String),
    Check,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(m) => Failure::Config(m),
            other => Failure::Run(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Run(e.to_string())
    }
}

fn load_config(path: &Path) -> Result<ExperimentConfig, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    if let Ok(m) = serde_json::from_str::<Manifest>(&text) {
        return serde_json::from_value(m.config).map_err(|e| Failure::Config(format!("{}: {e}", path.display())));
    }
    Ok(ExperimentConfig::load(path)?)
}

fn manifest_experiment(path: &Path) -> Option<String> {
    let text = std::fs::read_to_string(path).ok()?;
    serde_json::from_str::<Manifest>(&text).ok().map(|m| m.experiment)
}

fn resolve(args: &RunArgs) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match (&args.config, args.preset) {
        (Some(path), _) => load_config(path)?,
        (None, Preset::Toy) => ExperimentConfig::toy(),
        (None, Preset::Compact) => ExperimentConfig::compact(),
    };
    if let Some(seed) = args.seed {
        cfg = cfg.with_seed(seed);
    }
    if let Some(b) = &args.backend {
        cfg.backend = b.parse::<BackendChoice>()?;
    }
    if let Some(m) = &args.mode {
        cfg.mode = m.parse::<DomainMode>()?;
    }
    if let Some(p) = &args.process {
        let list = p.split(',').map(|s| s.trim().parse::<Process>()).collect::<Result<Vec<_>, _>>()?;
        cfg.dataset.process = list[0];
        cfg.processes = list;
    }
    for spec in &args.checkpoint {
        let (process, path) = spec
            .split_once('=')
            .ok_or_else(|| Failure::Config(format!("--checkpoint expects PROCESS=PATH, got '{spec}'")))?;
        let process: Process = process.parse()?;
        cfg.checkpoints.insert(process.name().to_string(), PathBuf::from(path));
    }
    if args.sequential {
        cfg.exec = Exec::Sequential;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(args: &RunArgs, name: &str) -> PathBuf {
    args.out.clone().unwrap_or_else(|| Path::new("runs").join(name))
}

fn report(checks: &[Check]) -> bool {
    for c in checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    checks.iter().all(|c| c.passed)
}

fn run_experiment(exp: Experiment, args: &RunArgs) -> Result<(), Failure> {
    let cfg = resolve(args)?;
    if let Some(recorded) = args.config.as_deref().and_then(manifest_experiment) {
        if recorded != exp.name() {
            return Err(Failure::Config(format!("manifest records '{recorded}', not '{}'", exp.name())));
        }
    }
    let out = out_dir(args, exp.name());
    let (manifest, checks) = exp.run_checked(&cfg, &out)?;
    println!("{}: {} outputs in {}", exp.name(), manifest.outputs.len(), out.display());
    let passed = report(&checks);
    if args.check && !passed {
        return Err(Failure::Check);
    }
    Ok(())
}

fn dump_schedule(path: &Path) -> Result<(), Failure> {
    let schedule = Schedule::from_bytes(&std::fs::read(path)?)?;
    schedule.write_csv(std::io::stdout().lock())?;
    Ok(())
}

fn run_dataset(args: &RunArgs, export: Option<usize>) -> Result<(), Failure> {
    let cfg = resolve(args)?;
    let out = out_dir(args, "dataset");
    let data = build_dataset(&cfg.dataset, cfg.exec)?;
    save_dataset(&data, &out)?;
    println!("{} examples ({} train, {} validation) in {}", data.examples.len(), data.train.len(), data.val.len(), out.display());
    if let Some(i) = export {
        let ex = data
            .examples
            .get(i)
            .ok_or_else(|| Failure::Config(format!("example {i} out of range (dataset has {})", data.examples.len())))?;
        let path = out.join(format!("example_{i}.pgm"));
        std::fs::write(&path, example_pgm(ex)?)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn replay(manifest: &Path, out: &Path) -> Result<(), Failure> {
    let r = rerun_manifest(manifest, out)?;
    println!("original {}\nrerun    {}", r.original.csv_digest(), r.rerun.csv_digest());
    if r.identical() {
        println!("PASS replay: CSV outputs are bit-identical");
        Ok(())
    } else {
        println!("FAIL replay: CSV outputs differ");
        Err(Failure::Check)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Characterize(a) => run_experiment(Experiment::Characterize, a),
        Command::Calibrate(a) => run_experiment(Experiment::Calibrate, a),
        Command::Bpc(a) => run_experiment(Experiment::Bpc, a),
        Command::Lower { dump_schedule: Some(path), .. } => dump_schedule(path),
        Command::Lower { run, .. } => run_experiment(Experiment::Lower, run),
        Command::Train(a) => run_experiment(Experiment::Train, a),
        Command::Reconstruct(a) => run_experiment(Experiment::Reconstruct, a),
        Command::Sweep(a) => run_experiment(Experiment::Sweep, a),
        Command::Ablate(a) => run_experiment(Experiment::Ablate, a),
        Command::LayerAccuracy(a) => run_experiment(Experiment::LayerAccuracy, a),
        Command::Dataset { run, export_example } => run_dataset(run, *export_example),
        Command::Replay { manifest, out } => replay(manifest, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("config error: {m}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Run(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_FAILURE)
        }
        Err(Failure::Check) => ExitCode::from(EXIT_CHECK),
    }
}
