//! Command-line experiments: layer-wise training, evaluation, conditioning,
//! XOR-MNIST, the linear baseline and hyperparameter sweeps.

pub mod config;
pub mod experiments;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};

use config::RunConfig;
use experiments::GridAxis;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid `{key}`: {reason}")]
    Config { key: String, reason: String },
    #[error("{0}")]
    Io(String),
    #[error("internal error: {0}")]
    Internal(String),
    #[error(transparent)]
    Core(#[from] biolcnet::Error),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl CliError {
    /// 1 validation, 2 I/O or data, 3 internal.
    pub fn exit_code(&self) -> i32 {
        use biolcnet::Error as E;
        match self {
            CliError::Config { .. } => 1,
            CliError::Io(_) => 2,
            CliError::Internal(_) => 3,
            CliError::Core(e) => match e {
                E::InvalidParameter { .. }
                | E::DimensionMismatch { .. }
                | E::PixelOutOfRange { .. }
                | E::ProbabilityTooLarge(_)
                | E::PlasticityMode { .. } => 1,
                E::Idx(_) | E::Checkpoint(_) | E::Dataset(_) | E::Io(_) => 2,
            },
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "biolcnet", version, about = "Spiking network experiments on MNIST")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone, Default)]
pub struct Common {
    /// Configuration file of `key = value` lines.
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    /// Override a key, e.g. `--set k=13`. Repeatable.
    #[arg(long = "set", short = 's', value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Reward-prediction-error rate, or `static`.
    #[arg(long)]
    pub eta_rpe: Option<String>,
    /// MNIST directory (falls back to BIOLCNET_DATA_DIR).
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    /// Parent directory for run directories.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train the LC layer with STDP and save `lc.blcn`.
    TrainLc(Common),
    /// Train the decoder of an LC checkpoint with R-STDP.
    TrainDecoder {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        lc: PathBuf,
    },
    /// Evaluate a trained network on the test split.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        network: PathBuf,
    },
    /// Reward-swap conditioning on a single stimulus class.
    Conditioning(Common),
    /// Train and evaluate on XOR-MNIST.
    Xor(Common),
    /// Linear classifier on LC spike counts.
    Svm {
        #[command(flatten)]
        common: Common,
        /// Reuse this network (LC or fully trained) instead of training one.
        #[arg(long)]
        network: Option<PathBuf>,
    },
    /// Grid search over config keys and seeds.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Axis `key=v1,v2`; repeatable.
        #[arg(long = "grid", value_name = "KEY=V1,V2")]
        grid: Vec<GridAxis>,
        /// Seeds per grid point (seeds 0..n offset by --seed).
        #[arg(long, default_value_t = 10)]
        seeds: u64,
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
}

/// Resolves file, flags and overrides into a validated config.
pub fn resolve_config(common: &Common) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &common.config {
        let text =
            fs::read_to_string(path).map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
        cfg.apply_text(&text)?;
    }
    for kv in &common.overrides {
        let (k, v) = kv.split_once('=').ok_or_else(|| CliError::Config {
            key: kv.clone(),
            reason: "overrides look like key=value".into(),
        })?;
        cfg.set(k.trim(), v)?;
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(e) = &common.eta_rpe {
        cfg.set("eta_rpe", e)?;
    }
    if let Some(d) = &common.data_dir {
        cfg.data_dir = Some(d.clone());
    }
    if let Some(d) = &common.out_dir {
        cfg.out_dir = d.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Creates `<out_dir>/<command>-<unix seconds>-<seed>` and writes the
/// resolved config into it. An existing directory is an error.
pub fn create_run_dir(cfg: &RunConfig, command: &str) -> Result<PathBuf, CliError> {
    let secs = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_err(|e| CliError::Internal(e.to_string()))?
        .as_secs();
    let dir = cfg.out_dir.join(format!("{command}-{secs}-{}", cfg.seed));
    fs::create_dir_all(&cfg.out_dir)?;
    fs::create_dir(&dir).map_err(|e| {
        if e.kind() == std::io::ErrorKind::AlreadyExists {
            CliError::Io(format!("run directory {} already exists", dir.display()))
        } else {
            e.into()
        }
    })?;
    fs::write(dir.join("config.txt"), cfg.to_text())?;
    Ok(dir)
}

fn append_summary(out_dir: &Path, line: &str) -> Result<(), CliError> {
    use std::io::Write;
    let path = out_dir.join("summary.csv");
    let fresh = !path.exists();
    let mut f = fs::OpenOptions::new().create(true).append(true).open(&path)?;
    if fresh {
        writeln!(f, "run_dir,accuracy")?;
    }
    writeln!(f, "{line}")?;
    Ok(())
}

/// Runs one command and returns its one-line summary.
pub fn run(cli: Cli) -> Result<String, CliError> {
    use experiments as ex;
    match cli.command {
        Command::TrainLc(common) => {
            let cfg = resolve_config(&common)?;
            let dir = create_run_dir(&cfg, "train-lc")?;
            let train = ex::load_split(&cfg, true)?;
            let (_, report) = ex::stage_lc(&cfg, &train, cfg.n_classes(), cfg.n_out, &dir)?;
            Ok(format!(
                "train-lc: {} samples, last window change {:.4}, saved {}",
                cfg.n_lc_samples,
                report.window_change_norms.last().copied().unwrap_or(0.0),
                dir.join("lc.blcn").display()
            ))
        }
        Command::TrainDecoder { common, lc } => {
            let cfg = resolve_config(&common)?;
            let mut net = ex::load_network(&lc)?;
            let dir = create_run_dir(&cfg, "train-decoder")?;
            let train = ex::load_split(&cfg, true)?;
            let report = ex::stage_decoder(&cfg, &mut net, &train, &dir)?;
            Ok(format!(
                "train-decoder: {} samples, training accuracy {:.4}, saved {}",
                report.records.len(),
                report.accuracy(),
                dir.join("network.blcn").display()
            ))
        }
        Command::Eval { common, network } => {
            let cfg = resolve_config(&common)?;
            let mut net = ex::load_network(&network)?;
            let dir = create_run_dir(&cfg, "eval")?;
            let test = ex::limit(ex::load_split(&cfg, false)?, cfg.n_test_samples);
            let acc = ex::stage_eval(&cfg, &mut net, &test)?;
            fs::write(
                dir.join("result.csv"),
                format!("accuracy,n_test\n{acc},{}\n", test.len()),
            )?;
            append_summary(&cfg.out_dir, &format!("{},{acc}", dir.display()))?;
            Ok(format!("eval: accuracy {acc:.4} on {} samples", test.len()))
        }
        Command::Conditioning(common) => {
            let cfg = resolve_config(&common)?;
            let dir = create_run_dir(&cfg, "conditioning")?;
            let s = ex::run_conditioning(&cfg, &dir)?;
            let w = 50.min(cfg.swap_at);
            Ok(format!(
                "conditioning: reward rate {:.3} before swap, {:.3} at end, outputs in {}",
                s.reward_rate(cfg.swap_at - w, cfg.swap_at),
                s.reward_rate(s.rewarded.len().saturating_sub(50), s.rewarded.len()),
                dir.display()
            ))
        }
        Command::Xor(common) => {
            let cfg = resolve_config(&common)?;
            let dir = create_run_dir(&cfg, "xor")?;
            let s = ex::run_xor(&cfg, &dir)?;
            Ok(format!(
                "xor: test accuracy {:.4}, outputs in {}",
                s.test_accuracy,
                dir.display()
            ))
        }
        Command::Svm { common, network } => {
            let cfg = resolve_config(&common)?;
            let net = network.as_deref().map(ex::load_network).transpose()?;
            let dir = create_run_dir(&cfg, "svm")?;
            let s = ex::run_svm(&cfg, net, network.is_some(), &dir)?;
            Ok(format!(
                "svm: train {:.4}, test {:.4}{}",
                s.train_accuracy,
                s.test_accuracy,
                s.decoder_accuracy
                    .map_or(String::new(), |a| format!(", spiking decoder {a:.4}"))
            ))
        }
        Command::Sweep {
            common,
            grid,
            seeds,
            workers,
        } => {
            let cfg = resolve_config(&common)?;
            let dir = create_run_dir(&cfg, "sweep")?;
            let seed_list: Vec<u64> = (0..seeds).map(|i| cfg.seed + i).collect();
            let rows = ex::run_sweep(&cfg, &grid, &seed_list, workers, &dir)?;
            let best = rows
                .iter()
                .max_by(|a, b| a.mean.total_cmp(&b.mean))
                .ok_or_else(|| CliError::Internal("empty grid".into()))?;
            Ok(format!(
                "sweep: {} grid points, best {:?} at {:.4} ± {:.4}, summary in {}",
                rows.len(),
                best.values,
                best.mean,
                best.std,
                dir.join("summary.csv").display()
            ))
        }
    }
}
