//! End-to-end experiment runs: generate scenes, train both trackers, report
//! metrics per horizon step and per k, and sweep codebook sizes.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{
    make_model_input, sliding_window, split_by_sequence, DataSample, DataSequence, Modality,
    ModelInput, SplitSpec,
};
use crate::physics::{build_codebook, AngleSector, ArrayGeometry, SignalConfig};
use crate::scene::{generate_dataset, CameraModel, SceneConfig};
use crate::tracker::{
    train, BaselineTracker, SequenceTracker, TrainConfig, TrainReport, VisionTracker,
};

use super::{evaluate_model, overhead_report, write_report_csv, EvalError, EvalReport, OverheadInputs};

/// Which held-out split metrics are computed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalSplit {
    Val,
    Test,
}

/// Complete description of one experiment; every random choice is seeded
/// here, so reports are reproducible from the config alone.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scene: SceneConfig,
    pub signal: SignalConfig,
    pub array: ArrayGeometry,
    pub camera: CameraModel,
    /// One full run per size, e.g. `[16, 32, 64]`.
    pub codebook_sizes: Vec<usize>,
    pub sector_half_angle_deg: f64,
    /// Sliding-window length cut from each sequence.
    pub window: usize,
    pub split: SplitSpec,
    pub train: TrainConfig,
    pub models: Vec<Modality>,
    pub eval_split: EvalSplit,
    pub max_k: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scene: SceneConfig::default(),
            signal: SignalConfig::default(),
            array: ArrayGeometry::square_upa_64(),
            camera: CameraModel::default(),
            codebook_sizes: vec![64],
            sector_half_angle_deg: 60.0,
            window: crate::data::DEFAULT_WINDOW,
            split: SplitSpec::default(),
            train: TrainConfig::default(),
            models: vec![Modality::Vision, Modality::Baseline],
            eval_split: EvalSplit::Val,
            max_k: 5,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), EvalError> {
        if self.codebook_sizes.is_empty() {
            return Err(EvalError::ShapeMismatch(
                "codebook_sizes must not be empty".into(),
            ));
        }
        if self.models.is_empty() {
            return Err(EvalError::ShapeMismatch("models must not be empty".into()));
        }
        if self.window < self.train.observation_len + self.train.horizon {
            return Err(EvalError::ShapeMismatch(format!(
                "window {} shorter than observation {} + horizon {}",
                self.window, self.train.observation_len, self.train.horizon
            )));
        }
        if self.max_k == 0 {
            return Err(EvalError::KOutOfRange { k: 0, max: 1 });
        }
        Ok(())
    }
}

/// Files written for one codebook size.
#[derive(Debug, Clone, Serialize)]
pub struct RunArtifacts {
    pub codebook_size: usize,
    pub dataset: PathBuf,
    pub checkpoints: Vec<(String, PathBuf)>,
    pub train_reports: Vec<(String, PathBuf)>,
    pub eval_reports: Vec<(String, PathBuf)>,
    pub overhead_csv: PathBuf,
}

/// Everything an experiment produced.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentSummary {
    pub reports: Vec<EvalReport>,
    pub train_reports: Vec<(String, usize, TrainReport)>,
    pub runs: Vec<RunArtifacts>,
    pub combined_csv: PathBuf,
    pub combined_json: PathBuf,
}

pub fn run_experiment(
    cfg: &ExperimentConfig,
    out_dir: &Path,
) -> Result<ExperimentSummary, EvalError> {
    run_experiment_with_progress(cfg, out_dir, |_| {})
}

pub fn run_experiment_with_progress(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    mut progress: impl FnMut(&str),
) -> Result<ExperimentSummary, EvalError> {
    cfg.validate()?;
    fs::create_dir_all(out_dir)?;
    let sector = AngleSector::new(
        -cfg.sector_half_angle_deg.to_radians(),
        cfg.sector_half_angle_deg.to_radians(),
    )?;

    let mut reports = Vec::new();
    let mut train_reports = Vec::new();
    let mut runs = Vec::new();
    for &size in &cfg.codebook_sizes {
        let run_dir = out_dir.join(format!("codebook-{size:03}"));
        fs::create_dir_all(&run_dir)?;
        progress(&format!("generating scenes for {size}-beam codebook"));

        if size == 0 || size % cfg.array.elements_horizontal != 0 {
            return Err(EvalError::Physics(
                crate::physics::PhysicsError::InvalidCodebook(format!(
                    "codebook size {size} is not a multiple of {} columns",
                    cfg.array.elements_horizontal
                )),
            ));
        }
        let codebook = build_codebook(
            &cfg.array,
            size,
            size / cfg.array.elements_horizontal,
            sector,
        )?;
        let sequences =
            generate_dataset(&cfg.scene, &cfg.camera, &cfg.array, &codebook, &cfg.signal)?;
        let dataset_path = run_dir.join("dataset.jsonl");
        crate::data::write_jsonl(&dataset_path, &sequences)?;

        let sets = split_by_sequence(&sequences, &cfg.split)?;
        let train_samples = windowed(&sequences, &sets.train, cfg.window);
        let val_samples = windowed(&sequences, &sets.val, cfg.window);
        let eval_samples = match cfg.eval_split {
            EvalSplit::Val => val_samples.clone(),
            EvalSplit::Test => windowed(&sequences, &sets.test, cfg.window),
        };
        if eval_samples.is_empty() {
            return Err(EvalError::EmptyEvaluationSet);
        }

        let mut artifacts = RunArtifacts {
            codebook_size: size,
            dataset: dataset_path,
            checkpoints: Vec::new(),
            train_reports: Vec::new(),
            eval_reports: Vec::new(),
            overhead_csv: run_dir.join("overhead.csv"),
        };

        for &modality in &cfg.models {
            progress(&format!("training {modality} model, {size}-beam codebook"));
            let (train_report, eval_report) = match modality {
                Modality::Vision => {
                    let mut model =
                        VisionTracker::with_defaults(size, cfg.train.optimizer.seed);
                    fit_and_eval(
                        &mut model,
                        &train_samples,
                        &val_samples,
                        &eval_samples,
                        cfg,
                        &run_dir,
                        &mut artifacts,
                    )?
                }
                Modality::Baseline => {
                    let mut model =
                        BaselineTracker::with_defaults(size, cfg.train.optimizer.seed);
                    fit_and_eval(
                        &mut model,
                        &train_samples,
                        &val_samples,
                        &eval_samples,
                        cfg,
                        &run_dir,
                        &mut artifacts,
                    )?
                }
            };
            train_reports.push((modality.to_string(), size, train_report));
            reports.push(eval_report);
        }

        write_overhead_csv(
            &artifacts.overhead_csv,
            cfg.train.observation_len,
            size,
            cfg.max_k,
        )?;
        runs.push(artifacts);
    }

    let combined_csv = out_dir.join("report.csv");
    write_report_csv(&combined_csv, &reports)?;
    let combined_json = out_dir.join("report.json");
    fs::write(&combined_json, serde_json::to_string_pretty(&reports)?)?;

    Ok(ExperimentSummary {
        reports,
        train_reports,
        runs,
        combined_csv,
        combined_json,
    })
}

fn windowed(sequences: &[DataSequence], ids: &[String], window: usize) -> Vec<DataSample> {
    sequences
        .iter()
        .filter(|s| ids.contains(&s.sequence_id))
        .flat_map(|s| sliding_window(s, window, 1))
        .collect()
}

/// Build model inputs for one modality from windowed samples.
pub(crate) fn prepare_inputs(
    samples: &[DataSample],
    observation_len: usize,
    horizon: usize,
    modality: Modality,
) -> Result<Vec<ModelInput>, EvalError> {
    samples
        .iter()
        .map(|s| Ok(make_model_input(s, observation_len, horizon, modality)?))
        .collect()
}

fn fit_and_eval<M: SequenceTracker>(
    model: &mut M,
    train_samples: &[DataSample],
    val_samples: &[DataSample],
    eval_samples: &[DataSample],
    cfg: &ExperimentConfig,
    run_dir: &Path,
    artifacts: &mut RunArtifacts,
) -> Result<(TrainReport, EvalReport), EvalError> {
    let i = cfg.train.observation_len;
    let xi = cfg.train.horizon;
    let modality = model.modality();
    let train_inputs = prepare_inputs(train_samples, i, xi, modality)?;
    let val_inputs = prepare_inputs(val_samples, i, xi, modality)?;
    let train_report = train(model, &train_inputs, &val_inputs, &cfg.train)?;

    let kind = model.kind().to_string();
    let ckpt_path = run_dir.join(format!("{kind}.ckpt"));
    model.save(&ckpt_path)?;
    artifacts.checkpoints.push((kind.clone(), ckpt_path));

    let train_report_path = run_dir.join(format!("{kind}_train_report.json"));
    fs::write(
        &train_report_path,
        serde_json::to_string_pretty(&train_report)?,
    )?;
    artifacts
        .train_reports
        .push((kind.clone(), train_report_path));

    let eval_report = evaluate_model(model, eval_samples, i, xi, cfg.max_k)?;
    let eval_report_path = run_dir.join(format!("{kind}_eval_report.json"));
    fs::write(
        &eval_report_path,
        serde_json::to_string_pretty(&eval_report)?,
    )?;
    artifacts.eval_reports.push((kind, eval_report_path));

    Ok((train_report, eval_report))
}

/// Overhead table: one row per k with the fixed columns
/// `observation_window,codebook_size,k,vision_measurements,baseline_measurements,ratio`.
pub fn write_overhead_csv(
    path: &Path,
    observation_window: usize,
    codebook_size: usize,
    max_k: usize,
) -> Result<(), EvalError> {
    use std::io::Write;
    let mut w = std::io::BufWriter::new(fs::File::create(path)?);
    writeln!(
        w,
        "observation_window,codebook_size,k,vision_measurements,baseline_measurements,ratio"
    )?;
    for k in 1..=max_k {
        let report = overhead_report(&OverheadInputs {
            observation_window,
            codebook_size,
            k,
        })?;
        writeln!(
            w,
            "{},{},{},{},{},{}",
            report.observation_window,
            report.codebook_size,
            report.k,
            report.vision_measurements,
            report.baseline_measurements,
            report.ratio
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Merge previously written evaluation-report JSON files into one CSV.
pub fn merge_reports(
    report_paths: &[PathBuf],
    out_csv: &Path,
) -> Result<Vec<EvalReport>, EvalError> {
    let mut reports = Vec::new();
    for path in report_paths {
        let text = fs::read_to_string(path)?;
        // Accept both a single report and an array of reports.
        match serde_json::from_str::<Vec<EvalReport>>(&text) {
            Ok(mut batch) => reports.append(&mut batch),
            Err(_) => reports.push(serde_json::from_str::<EvalReport>(&text)?),
        }
    }
    write_report_csv(out_csv, &reports)?;
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_config_keys_are_rejected_by_name() {
        let err = serde_json::from_str::<ExperimentConfig>(r#"{"foo": 1}"#).unwrap_err();
        assert!(err.to_string().contains("foo"), "{err}");
    }

    #[test]
    fn default_config_validates() {
        ExperimentConfig::default().validate().unwrap();
    }

    #[test]
    fn window_must_cover_observation_plus_horizon() {
        let cfg = ExperimentConfig {
            window: 12,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn tiny_experiment_round_trips_and_merges() {
        // Fast end-to-end: few sequences, one epoch, one small codebook.
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig {
            scene: SceneConfig {
                num_sequences: 8,
                speed_range: [10.0, 14.0],
                ..Default::default()
            },
            codebook_sizes: vec![16],
            split: SplitSpec {
                train_fraction: 0.5,
                val_fraction: 0.5,
                test_fraction: 0.0,
                seed: 1,
            },
            train: TrainConfig {
                epochs: 1,
                batch_size: 16,
                ..Default::default()
            },
            max_k: 3,
            ..Default::default()
        };
        let summary = run_experiment(&cfg, dir.path()).unwrap();
        assert_eq!(summary.reports.len(), 2); // vision + baseline
        assert!(summary.combined_csv.exists());
        assert!(summary.combined_json.exists());
        let csv = fs::read_to_string(&summary.combined_csv).unwrap();
        assert!(csv.starts_with("horizon,k,metric,value,model,codebook_size"));
        assert!(csv.contains(",vision,16"));
        assert!(csv.contains(",baseline,16"));

        // Merging the per-run report files reproduces the combined CSV rows.
        let report_files: Vec<PathBuf> = summary.runs[0]
            .eval_reports
            .iter()
            .map(|(_, p)| p.clone())
            .collect();
        let merged_csv = dir.path().join("merged.csv");
        let merged = merge_reports(&report_files, &merged_csv).unwrap();
        assert_eq!(merged.len(), 2);
        assert!(merged_csv.exists());

        // Deterministic: rerunning the identical config reproduces reports.
        let dir2 = tempfile::tempdir().unwrap();
        let summary2 = run_experiment(&cfg, dir2.path()).unwrap();
        assert_eq!(summary.reports, summary2.reports);
    }
}
