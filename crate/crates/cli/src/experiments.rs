//! End-to-end experiment pipelines. Each writes its artifacts into a given
//! directory and returns a summary; the command layer only handles argument
//! parsing and run-directory creation.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use biolcnet::data::{build_xor_mnist, center_crop, filter_classes, load_mnist};
use biolcnet::engine::{
    decoder_map, evaluate, export_monitors, filter_grid, sample_order, sample_rng, train_decoder, train_decoder_with,
    train_lc, write_pgm, ArrayStore, DecoderTrainReport, LcTrainReport, MonitorOptions, Stream,
};
use biolcnet::readout::{self, LinearModel, LinearParams};
use biolcnet::{checkpoint_load, checkpoint_save, Dataset, Network, TrainingStage};
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::CliError;

/// Environment variable naming the MNIST directory.
pub const DATA_ENV: &str = "BIOLCNET_DATA_DIR";

/// Dataset directory: config value, then `BIOLCNET_DATA_DIR`, then
/// `data/mnist`.
pub fn data_dir(cfg: &RunConfig) -> PathBuf {
    cfg.data_dir
        .clone()
        .or_else(|| std::env::var_os(DATA_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("data/mnist"))
}

/// Raw 28×28 MNIST split.
pub fn load_raw(cfg: &RunConfig, train: bool) -> Result<Dataset, CliError> {
    let dir = data_dir(cfg);
    if !dir.is_dir() {
        return Err(CliError::Io(format!(
            "dataset directory {} not found (set data_dir or {DATA_ENV})",
            dir.display()
        )));
    }
    Ok(load_mnist(&dir, train)?)
}

/// MNIST split restricted to the configured classes and cropped to `h_in`.
pub fn load_split(cfg: &RunConfig, train: bool) -> Result<Dataset, CliError> {
    let raw = load_raw(cfg, train)?;
    let subset = if cfg.classes.is_empty() {
        raw
    } else {
        filter_classes(&raw, &cfg.classes, true)?
    };
    Ok(center_crop(&subset, cfg.h_in)?)
}

/// Test split limited to `n_test_samples` (0 keeps everything).
pub fn limit(data: Dataset, n: usize) -> Dataset {
    if n == 0 {
        data
    } else {
        data.take(n)
    }
}

fn heatmap(dir: &Path, name: &str, net: &Network<f32>) -> Result<(), CliError> {
    let p = &net.lc.plasticity;
    write_pgm(
        &dir.join(name),
        &filter_grid(&net.lc.connection, p.w_min, p.w_max, true),
    )?;
    Ok(())
}

fn decoder_heatmap(dir: &Path, name: &str, net: &Network<f32>) -> Result<(), CliError> {
    let p = &net.decoder.plasticity;
    write_pgm(&dir.join(name), &decoder_map(&net.decoder.connection, p.w_min, p.w_max))?;
    Ok(())
}

/// Builds a fresh network for `data` and trains its LC layer. Writes
/// `lc.blcn`, `lc_filters.pgm` and `lc_training.csv`.
pub fn stage_lc(
    cfg: &RunConfig,
    data: &Dataset,
    n_classes: usize,
    n_out: usize,
    dir: &Path,
) -> Result<(Network<f32>, LcTrainReport), CliError> {
    let net_cfg = cfg.network_config(n_classes, n_out, data.height(), data.width());
    let mut net = Network::new(&net_cfg, &mut sample_rng(cfg.seed, Stream::Init, 0))?;
    net.set_stage(TrainingStage::Lc);
    let report = train_lc(&mut net, data, cfg.n_lc_samples, &cfg.schedule(), cfg.seed)?;
    net.set_stage(TrainingStage::Frozen);
    checkpoint_save(&net, &dir.join("lc.blcn"))?;
    heatmap(dir, "lc_filters.pgm", &net)?;
    let mut csv = String::from("window,change_norm\n");
    for (i, n) in report.window_change_norms.iter().enumerate() {
        let _ = writeln!(csv, "{i},{n}");
    }
    fs::write(dir.join("lc_training.csv"), csv)?;
    Ok((net, report))
}

/// Trains the decoder of a network whose LC layer is already trained.
/// Writes `metrics.csv`, `rates.csv`, `network.blcn` and
/// `decoder_weights.pgm`.
pub fn stage_decoder(
    cfg: &RunConfig,
    net: &mut Network<f32>,
    data: &Dataset,
    dir: &Path,
) -> Result<DecoderTrainReport, CliError> {
    net.set_stage(TrainingStage::Decoder);
    let mut reward = cfg.reward_state();
    let report = train_decoder(net, data, cfg.n_decoder_samples, &cfg.schedule(), &mut reward, cfg.seed)?;
    net.set_stage(TrainingStage::Frozen);
    export_monitors(
        &report.records,
        dir,
        &MonitorOptions {
            window: cfg.monitor_window,
        },
    )?;
    checkpoint_save(net, &dir.join("network.blcn"))?;
    decoder_heatmap(dir, "decoder_weights.pgm", net)?;
    Ok(report)
}

pub fn stage_eval(cfg: &RunConfig, net: &mut Network<f32>, test: &Dataset) -> Result<f64, CliError> {
    net.set_stage(TrainingStage::Frozen);
    Ok(evaluate(net, test, &cfg.schedule(), cfg.seed)?.accuracy)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationSummary {
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub n_test: usize,
}

/// LC training, decoder training and evaluation on the configured MNIST
/// subset. Also writes `result.csv`.
pub fn run_classification(cfg: &RunConfig, dir: &Path) -> Result<ClassificationSummary, CliError> {
    let train = load_split(cfg, true)?;
    let test = limit(load_split(cfg, false)?, cfg.n_test_samples);
    classify(cfg, &train, &test, cfg.n_classes(), dir)
}

fn classify(
    cfg: &RunConfig,
    train: &Dataset,
    test: &Dataset,
    n_classes: usize,
    dir: &Path,
) -> Result<ClassificationSummary, CliError> {
    let (mut net, _) = stage_lc(cfg, train, n_classes, cfg.n_out, dir)?;
    let report = stage_decoder(cfg, &mut net, train, dir)?;
    let acc = stage_eval(cfg, &mut net, test)?;
    let summary = ClassificationSummary {
        train_accuracy: report.accuracy(),
        test_accuracy: acc,
        n_test: test.len(),
    };
    fs::write(
        dir.join("result.csv"),
        format!(
            "train_accuracy,test_accuracy,n_test\n{},{},{}\n",
            summary.train_accuracy, summary.test_accuracy, summary.n_test
        ),
    )?;
    Ok(summary)
}

/// Iterations after which decoder heatmaps are written during conditioning.
pub const CONDITIONING_SNAPSHOTS: [usize; 4] = [200, 300, 400, 600];

#[derive(Debug, Clone, PartialEq)]
pub struct ConditioningSummary {
    /// `true` where the decision earned a reward.
    pub rewarded: Vec<bool>,
}

impl ConditioningSummary {
    /// Reward rate over iterations `[from, to)`.
    pub fn reward_rate(&self, from: usize, to: usize) -> f64 {
        let slice = &self.rewarded[from.min(self.rewarded.len())..to.min(self.rewarded.len())];
        slice.iter().filter(|&&r| r).count() as f64 / slice.len().max(1) as f64
    }
}

/// Two-group conditioning: every stimulus comes from one digit class, the
/// rewarded group is `first_reward_class` until `swap_at` and the other
/// group afterwards.
pub fn run_conditioning(cfg: &RunConfig, dir: &Path) -> Result<ConditioningSummary, CliError> {
    let raw = load_raw(cfg, true)?;
    let stim = center_crop(&filter_classes(&raw, &[cfg.stimulus_class], true)?, cfg.h_in)?;
    let (mut net, _) = stage_lc(cfg, &stim, 2, 2 * cfg.conditioning_groups, dir)?;
    net.set_stage(TrainingStage::Decoder);
    decoder_heatmap(dir, "decoder_weights_0000.pgm", &net)?;
    let first = cfg.first_reward_class;
    let swap_at = cfg.swap_at;
    let mut reward = cfg.conditioning_reward_state();
    let mut io_error = None;
    let report = train_decoder_with(
        &mut net,
        &stim,
        cfg.conditioning_iterations,
        &cfg.schedule(),
        &mut reward,
        cfg.seed,
        |it, _| if it < swap_at { first } else { 1 - first },
        &mut |rec, net| {
            if CONDITIONING_SNAPSHOTS.contains(&(rec.iteration + 1)) && io_error.is_none() {
                let name = format!("decoder_weights_{:04}.pgm", rec.iteration + 1);
                io_error = decoder_heatmap(dir, &name, net).err();
            }
        },
    )?;
    if let Some(e) = io_error {
        return Err(e);
    }
    net.set_stage(TrainingStage::Frozen);
    export_monitors(
        &report.records,
        dir,
        &MonitorOptions {
            window: cfg.monitor_window,
        },
    )?;
    checkpoint_save(&net, &dir.join("network.blcn"))?;
    Ok(ConditioningSummary {
        rewarded: report.records.iter().map(|r| r.reward > 0.0).collect(),
    })
}

/// XOR-MNIST train/test sets composed from the 0 and 1 digits.
pub fn xor_datasets(cfg: &RunConfig) -> Result<(Dataset, Dataset), CliError> {
    let train = build_xor_mnist(
        &load_raw(cfg, true)?,
        cfg.xor_train,
        &mut sample_rng(cfg.seed, Stream::Data, 0),
    )?;
    let test = build_xor_mnist(
        &load_raw(cfg, false)?,
        cfg.xor_test,
        &mut sample_rng(cfg.seed, Stream::Data, 1),
    )?;
    Ok((train, test))
}

pub fn run_xor(cfg: &RunConfig, dir: &Path) -> Result<ClassificationSummary, CliError> {
    let (train, test) = xor_datasets(cfg)?;
    classify(cfg, &train, &test, 2, dir)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvmSummary {
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    /// Spiking-decoder test accuracy of the same network, when it has one.
    pub decoder_accuracy: Option<f64>,
}

/// Linear classifier on LC spike counts. Uses `network` if given (its
/// decoder is also evaluated when `with_decoder` is set), otherwise trains
/// a fresh LC layer. Writes `svm.blcn` and `svm.csv`.
pub fn run_svm(
    cfg: &RunConfig,
    network: Option<Network<f32>>,
    with_decoder: bool,
    dir: &Path,
) -> Result<SvmSummary, CliError> {
    let train_all = load_split(cfg, true)?;
    let test = limit(load_split(cfg, false)?, cfg.n_test_samples);
    let mut net = match network {
        Some(n) => n,
        None => stage_lc(cfg, &train_all, cfg.n_classes(), cfg.n_out, dir)?.0,
    };
    net.set_stage(TrainingStage::Frozen);
    let n = cfg.n_decoder_samples.min(train_all.len());
    let picks = sample_order(train_all.len(), n, cfg.seed, Stream::Readout);
    let schedule = cfg.schedule();

    let train_counts: Vec<Vec<u32>> = picks
        .par_iter()
        .enumerate()
        .map(|(i, &idx)| {
            let mut rng = sample_rng(cfg.seed, Stream::Features, i as u64);
            readout::extract_features(&net, &train_all.image_scalar::<f32>(idx), &schedule, &mut rng)
        })
        .collect::<biolcnet::Result<_>>()?;
    let train_labels: Vec<usize> = picks.iter().map(|&i| train_all.label(i)).collect();
    let test_counts = readout::extract_dataset_features(&net, &test, &schedule, cfg.seed, Stream::Eval)?;
    let test_labels: Vec<usize> = (0..test.len()).map(|i| test.label(i)).collect();

    let params = LinearParams {
        lambda: cfg.svm_lambda,
        epochs: cfg.svm_epochs,
        seed: cfg.seed,
    };
    let train_x = readout::counts_to_f64(&train_counts);
    let test_x = readout::counts_to_f64(&test_counts);
    let (model, _) = readout::train_linear(&train_x, &train_labels, &params)?;
    let train_accuracy = readout::accuracy(&model, &train_x, &train_labels)?;
    let test_accuracy = readout::accuracy(&model, &test_x, &test_labels)?;
    let decoder_accuracy = if with_decoder {
        Some(evaluate(&net, &test, &schedule, cfg.seed)?.accuracy)
    } else {
        None
    };
    save_svm(&model, &dir.join("svm.blcn"))?;
    let mut csv = String::from("train_accuracy,test_accuracy,decoder_accuracy\n");
    let _ = writeln!(
        csv,
        "{},{},{}",
        train_accuracy,
        test_accuracy,
        decoder_accuracy.map_or(String::new(), |a| a.to_string())
    );
    fs::write(dir.join("svm.csv"), csv)?;
    Ok(SvmSummary {
        train_accuracy,
        test_accuracy,
        decoder_accuracy,
    })
}

pub fn save_svm(model: &LinearModel, path: &Path) -> Result<(), CliError> {
    let mut store = ArrayStore::new();
    model.to_store(&mut store);
    store.save(path)?;
    Ok(())
}

pub fn load_network(path: &Path) -> Result<Network<f32>, CliError> {
    if !path.exists() {
        return Err(CliError::Io(format!("checkpoint {} not found", path.display())));
    }
    Ok(checkpoint_load(path)?)
}

/// One grid axis: a config key and the values it takes.
#[derive(Debug, Clone, PartialEq)]
pub struct GridAxis {
    pub key: String,
    pub values: Vec<String>,
}

impl std::str::FromStr for GridAxis {
    type Err = CliError;

    /// `key=v1,v2,...`; a `;` separator is accepted for values that
    /// themselves contain commas.
    fn from_str(s: &str) -> Result<Self, CliError> {
        let (key, vals) = s.split_once('=').ok_or_else(|| CliError::Config {
            key: s.to_string(),
            reason: "grid axes look like key=v1,v2".into(),
        })?;
        let sep = if vals.contains(';') { ';' } else { ',' };
        let values: Vec<String> = vals.split(sep).map(|v| v.trim().to_string()).collect();
        Ok(Self {
            key: key.trim().to_string(),
            values,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRun {
    pub values: Vec<String>,
    pub seed: u64,
    pub accuracy: f64,
    pub dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub values: Vec<String>,
    pub n: usize,
    pub mean: f64,
    pub std: f64,
}

/// Mean and sample standard deviation (`n - 1`; zero for a single value).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// Runs the classification pipeline for every grid point and seed, on at
/// most `workers` threads. Each run owns its config, network and directory.
/// Writes `runs.csv` and `summary.csv` into `dir`.
pub fn run_sweep(
    base: &RunConfig,
    grid: &[GridAxis],
    seeds: &[u64],
    workers: usize,
    dir: &Path,
) -> Result<Vec<SweepRow>, CliError> {
    let mut points: Vec<Vec<String>> = vec![Vec::new()];
    for axis in grid {
        points = points
            .into_iter()
            .flat_map(|p| {
                axis.values.iter().map(move |v| {
                    let mut q = p.clone();
                    q.push(v.clone());
                    q
                })
            })
            .collect();
    }
    let mut jobs = Vec::new();
    for (pi, point) in points.iter().enumerate() {
        let mut cfg = base.clone();
        for (axis, v) in grid.iter().zip(point) {
            cfg.set(&axis.key, v)?;
        }
        for &seed in seeds {
            let mut c = cfg.clone();
            c.seed = seed;
            c.validate()?;
            jobs.push((pi, c, dir.join(format!("run-{pi:03}-seed{seed}"))));
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| CliError::Internal(e.to_string()))?;
    let results: Vec<SweepRun> = pool.install(|| {
        jobs.par_iter()
            .map(|(pi, cfg, run_dir)| {
                fs::create_dir_all(run_dir)?;
                fs::write(run_dir.join("config.txt"), cfg.to_text())?;
                let s = run_classification(cfg, run_dir)?;
                Ok(SweepRun {
                    values: points[*pi].clone(),
                    seed: cfg.seed,
                    accuracy: s.test_accuracy,
                    dir: run_dir.clone(),
                })
            })
            .collect::<Result<_, CliError>>()
    })?;

    let keys: Vec<&str> = grid.iter().map(|a| a.key.as_str()).collect();
    let mut runs_csv = keys.iter().map(|k| format!("{k},")).collect::<String>();
    runs_csv.push_str("seed,accuracy,run_dir\n");
    for r in &results {
        for v in &r.values {
            let _ = write!(runs_csv, "{v},");
        }
        let _ = writeln!(runs_csv, "{},{},{}", r.seed, r.accuracy, r.dir.display());
    }
    fs::write(dir.join("runs.csv"), runs_csv)?;

    let mut rows = Vec::new();
    let mut summary = keys.iter().map(|k| format!("{k},")).collect::<String>();
    summary.push_str("n_runs,mean_accuracy,std_accuracy\n");
    for point in &points {
        let accs: Vec<f64> = results
            .iter()
            .filter(|r| &r.values == point)
            .map(|r| r.accuracy)
            .collect();
        let (mean, std) = mean_std(&accs);
        for v in point {
            let _ = write!(summary, "{v},");
        }
        let _ = writeln!(summary, "{},{},{}", accs.len(), mean, std);
        rows.push(SweepRow {
            values: point.clone(),
            n: accs.len(),
            mean,
            std,
        });
    }
    fs::write(dir.join("summary.csv"), summary)?;
    Ok(rows)
}
