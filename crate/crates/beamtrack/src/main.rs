//! Command-line front end. All computation lives in the library; this binary
//! parses arguments, wires files together, and prints summaries.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use beamtrack::data::{
    profile_num_beams, read_jsonl_with, sliding_window, split_by_sequence, write_jsonl,
    DataSample, DataSequence, IndexBase, Modality, SplitSpec, DEFAULT_WINDOW,
};
use beamtrack::eval::{
    evaluate_model, merge_reports, run_experiment_with_progress, write_overhead_csv,
    write_report_csv, ExperimentConfig,
};
use beamtrack::physics::{default_codebook, ArrayGeometry, SignalConfig};
use beamtrack::scene::{generate_dataset, CameraModel, SceneConfig};
use beamtrack::tracker::{
    train, AnyTracker, BaselineTracker, SequenceTracker, TrainConfig, VisionTracker,
};

#[derive(Parser)]
#[command(name = "beamtrack", version, about = "Vision-aided mmWave beam tracking toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic drive-by dataset (scene config JSON -> JSONL)
    Gen(GenArgs),
    /// Train a tracker on a dataset (-> checkpoint + train report JSON)
    Train(TrainArgs),
    /// Evaluate a checkpoint on a dataset (-> eval report JSON + CSV)
    Eval(EvalArgs),
    /// Emit the beam-training overhead table (-> CSV)
    Overhead(OverheadArgs),
    /// Merge evaluation report JSON files into one combined CSV
    Report(ReportArgs),
    /// Full pipeline: generate, train, evaluate, optionally sweep codebook sizes
    Experiment(ExperimentArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum CliModel {
    Vision,
    Baseline,
}

impl From<CliModel> for Modality {
    fn from(m: CliModel) -> Self {
        match m {
            CliModel::Vision => Modality::Vision,
            CliModel::Baseline => Modality::Baseline,
        }
    }
}

#[derive(Args)]
struct GenArgs {
    /// Scene configuration JSON; defaults describe a 100-pass drive-by
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
    /// Override the scene rng_seed
    #[arg(long)]
    seed: Option<u64>,
    /// Number of codebook beams (multiple of the 8 array columns)
    #[arg(long, default_value_t = 64)]
    codebook_size: usize,
    /// Relative std of multiplicative noise on swept powers
    #[arg(long, default_value_t = 0.0)]
    power_noise_std: f64,
    /// Write dataset.jsonl.gz instead of dataset.jsonl
    #[arg(long)]
    gzip: bool,
}

#[derive(Args)]
struct TrainArgs {
    /// Dataset JSONL path
    dataset: PathBuf,
    /// Training configuration JSON (train/split/window)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Which tracker variant to train
    #[arg(long, value_enum)]
    model: CliModel,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
    /// Override initialization, shuffle, and split seeds at once
    #[arg(long)]
    seed: Option<u64>,
    /// Codebook size; required for labels-only datasets, inferred otherwise
    #[arg(long)]
    codebook_size: Option<usize>,
    /// Treat stored beam indices as 1-based (measurement-export convention)
    #[arg(long)]
    one_based: bool,
}

#[derive(Args)]
struct EvalArgs {
    /// Checkpoint path (model kind is read from the file)
    checkpoint: PathBuf,
    /// Dataset JSONL path
    dataset: PathBuf,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
    /// Observation window length fed to the encoder
    #[arg(long, default_value_t = 8)]
    observation_window: usize,
    /// Prediction horizon
    #[arg(long, default_value_t = 5)]
    horizon: usize,
    /// Largest k reported
    #[arg(long, default_value_t = 5)]
    max_k: usize,
    /// Treat stored beam indices as 1-based (measurement-export convention)
    #[arg(long)]
    one_based: bool,
}

#[derive(Args)]
struct OverheadArgs {
    /// Observation window length i
    #[arg(long, default_value_t = 8)]
    observation_window: usize,
    #[arg(long, default_value_t = 64)]
    codebook_size: usize,
    #[arg(long, default_value_t = 5)]
    max_k: usize,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// Evaluation report JSON files to merge
    #[arg(required = true)]
    reports: Vec<PathBuf>,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Experiment configuration JSON; defaults run vision + baseline at 64 beams
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
    /// Override every seed in the config at once
    #[arg(long)]
    seed: Option<u64>,
}

/// Training-file schema: optimizer/schedule, split fractions, and the
/// sliding-window length.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct TrainFileConfig {
    train: TrainConfig,
    split: SplitSpec,
    window: Option<usize>,
}

fn main() {
    if let Err(err) = run() {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}

fn run() -> Result<()> {
    match Cli::parse().command {
        Command::Gen(args) => cmd_gen(args),
        Command::Train(args) => cmd_train(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Overhead(args) => cmd_overhead(args),
        Command::Report(args) => cmd_report(args),
        Command::Experiment(args) => cmd_experiment(args),
    }
}

fn read_config<T: serde::de::DeserializeOwned + Default>(path: &Option<PathBuf>) -> Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = fs::read_to_string(p)
                .with_context(|| format!("reading config {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", p.display()))
        }
    }
}

fn load_dataset(path: &Path, one_based: bool) -> Result<Vec<DataSequence>> {
    let base = if one_based {
        IndexBase::One
    } else {
        IndexBase::Zero
    };
    let seqs = read_jsonl_with(path, base)
        .with_context(|| format!("reading dataset {}", path.display()))?;
    if seqs.is_empty() {
        bail!("dataset {} contains no sequences", path.display());
    }
    Ok(seqs)
}

fn cmd_gen(args: GenArgs) -> Result<()> {
    let mut scene: SceneConfig = read_config(&args.config)?;
    if let Some(seed) = args.seed {
        scene.rng_seed = seed;
    }
    let signal = SignalConfig {
        power_measurement_noise_std: args.power_noise_std,
        ..Default::default()
    };
    let geometry = ArrayGeometry::square_upa_64();
    let codebook = default_codebook(&geometry, args.codebook_size)?;
    let camera = CameraModel::default();

    let sequences = generate_dataset(&scene, &camera, &geometry, &codebook, &signal)?;
    fs::create_dir_all(&args.out)?;
    let name = if args.gzip {
        "dataset.jsonl.gz"
    } else {
        "dataset.jsonl"
    };
    let path = args.out.join(name);
    write_jsonl(&path, &sequences)?;

    let steps: usize = sequences.iter().map(|s| s.steps.len()).sum();
    let windows: usize = sequences
        .iter()
        .map(|s| sliding_window(s, DEFAULT_WINDOW, 1).len())
        .sum();
    println!(
        "wrote {} sequences ({steps} steps, {windows} windows of {DEFAULT_WINDOW}) to {}",
        sequences.len(),
        path.display()
    );
    Ok(())
}

fn windowed(seqs: &[DataSequence], ids: &[String], window: usize) -> Vec<DataSample> {
    seqs.iter()
        .filter(|s| ids.contains(&s.sequence_id))
        .flat_map(|s| sliding_window(s, window, 1))
        .collect()
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let mut cfg: TrainFileConfig = read_config(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.train.optimizer.seed = seed;
        cfg.train.shuffle_seed = seed;
        cfg.split.seed = seed;
    }
    let window = cfg.window.unwrap_or(DEFAULT_WINDOW);
    if window < cfg.train.observation_len + cfg.train.horizon {
        bail!(
            "window {window} is shorter than observation {} + horizon {}",
            cfg.train.observation_len,
            cfg.train.horizon
        );
    }

    let sequences = load_dataset(&args.dataset, args.one_based)?;
    let num_beams = match (profile_num_beams(&sequences), args.codebook_size) {
        (_, Some(n)) => n,
        (Some(n), None) => n,
        (None, None) => bail!(
            "labels-only dataset: pass --codebook-size to size the classifier"
        ),
    };

    let sets = split_by_sequence(&sequences, &cfg.split)?;
    let train_samples = windowed(&sequences, &sets.train, window);
    let val_samples = windowed(&sequences, &sets.val, window);
    if train_samples.is_empty() {
        bail!("training split produced no windows of length {window}");
    }
    println!(
        "split: {} train / {} val / {} test sequences; {} train windows, {} val windows",
        sets.train.len(),
        sets.val.len(),
        sets.test.len(),
        train_samples.len(),
        val_samples.len()
    );

    let modality: Modality = args.model.into();
    let i = cfg.train.observation_len;
    let xi = cfg.train.horizon;
    let to_inputs = |samples: &[DataSample]| -> Result<Vec<_>> {
        samples
            .iter()
            .map(|s| Ok(beamtrack::data::make_model_input(s, i, xi, modality)?))
            .collect()
    };
    let train_inputs = to_inputs(&train_samples)?;
    let val_inputs = to_inputs(&val_samples)?;

    fs::create_dir_all(&args.out)?;
    let (report, ckpt_path) = match modality {
        Modality::Vision => {
            let mut model = VisionTracker::with_defaults(num_beams, cfg.train.optimizer.seed);
            let report = train(&mut model, &train_inputs, &val_inputs, &cfg.train)?;
            let path = args.out.join("vision.ckpt");
            model.save(&path)?;
            (report, path)
        }
        Modality::Baseline => {
            let mut model = BaselineTracker::with_defaults(num_beams, cfg.train.optimizer.seed);
            let report = train(&mut model, &train_inputs, &val_inputs, &cfg.train)?;
            let path = args.out.join("baseline.ckpt");
            model.save(&path)?;
            (report, path)
        }
    };

    let report_path = args.out.join(format!("{modality}_train_report.json"));
    fs::write(&report_path, serde_json::to_string_pretty(&report)?)?;
    let last_train = report.train_loss.last().copied().unwrap_or(f64::NAN);
    match report.best_epoch {
        Some(best) => println!(
            "trained {} epochs (final train loss {last_train:.4}); best epoch {} with val loss {:.4}, val top-1 {:.4}",
            report.train_loss.len(),
            best + 1,
            report.val_loss[best],
            report.val_top1[best],
        ),
        None => println!(
            "trained {} epochs (final train loss {last_train:.4}); no validation split",
            report.train_loss.len()
        ),
    }
    println!("checkpoint: {}", ckpt_path.display());
    println!("train report: {}", report_path.display());
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let model = AnyTracker::load(&args.checkpoint)
        .with_context(|| format!("loading checkpoint {}", args.checkpoint.display()))?;
    let sequences = load_dataset(&args.dataset, args.one_based)?;
    let window = args.observation_window + args.horizon;
    let samples: Vec<DataSample> = sequences
        .iter()
        .flat_map(|s| sliding_window(s, window, 1))
        .collect();
    if samples.is_empty() {
        bail!("dataset produced no windows of length {window}");
    }

    let max_k = args.max_k.min(model.num_beams());
    let report = evaluate_model(
        &model,
        &samples,
        args.observation_window,
        args.horizon,
        max_k,
    )?;

    fs::create_dir_all(&args.out)?;
    let json_path = args.out.join("eval_report.json");
    fs::write(&json_path, serde_json::to_string_pretty(&report)?)?;
    let csv_path = args.out.join("eval_report.csv");
    write_report_csv(&csv_path, std::slice::from_ref(&report))?;

    println!(
        "evaluated {} {}-beam model on {} windows",
        report.model,
        report.codebook_size,
        samples.len()
    );
    for k in 1..=max_k {
        let entry = report.entry(1, k).expect("entry exists");
        match entry.normalized_receive_power {
            Some(nrp) => println!(
                "  future beam 1, top-{k}: accuracy {:.4}, normalized receive power {:.4}",
                entry.top_k_accuracy, nrp
            ),
            None => println!(
                "  future beam 1, top-{k}: accuracy {:.4}, normalized receive power unavailable (labels-only dataset)",
                entry.top_k_accuracy
            ),
        }
    }
    if report.labels_only {
        println!("normalized receive power unavailable: labels-only dataset");
    }
    println!("eval report: {} and {}", json_path.display(), csv_path.display());
    Ok(())
}

fn cmd_overhead(args: OverheadArgs) -> Result<()> {
    fs::create_dir_all(&args.out)?;
    let path = args.out.join("overhead.csv");
    write_overhead_csv(
        &path,
        args.observation_window,
        args.codebook_size,
        args.max_k,
    )?;
    print!("{}", fs::read_to_string(&path)?);
    println!("overhead table: {}", path.display());
    Ok(())
}

fn cmd_report(args: ReportArgs) -> Result<()> {
    fs::create_dir_all(&args.out)?;
    let csv_path = args.out.join("combined.csv");
    let reports = merge_reports(&args.reports, &csv_path)?;
    println!(
        "merged {} reports from {} files into {}",
        reports.len(),
        args.reports.len(),
        csv_path.display()
    );
    Ok(())
}

fn cmd_experiment(args: ExperimentArgs) -> Result<()> {
    let mut cfg: ExperimentConfig = read_config(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.scene.rng_seed = seed;
        cfg.split.seed = seed;
        cfg.train.optimizer.seed = seed;
        cfg.train.shuffle_seed = seed;
    }
    let summary = run_experiment_with_progress(&cfg, &args.out, |stage| {
        println!("[experiment] {stage}");
    })?;
    for report in &summary.reports {
        let top1 = report.entry(1, 1).expect("entry exists");
        println!(
            "{} @ {} beams: future-beam-1 top-1 accuracy {:.4}{}",
            report.model,
            report.codebook_size,
            top1.top_k_accuracy,
            top1.normalized_receive_power
                .map(|v| format!(", NRP {v:.4}"))
                .unwrap_or_default()
        );
    }
    println!("combined report: {}", summary.combined_csv.display());
    Ok(())
}
