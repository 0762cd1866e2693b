//! Metrics, overhead accounting, the nearest-neighbor oracle, and experiment
//! orchestration.
//!
//! Two metrics drive every report:
//!
//! - top-k accuracy: the fraction of evaluated steps whose top-k predicted
//!   beams include the optimal beam;
//! - normalized receive power: the best receive power among the top-k
//!   predicted beams divided by the optimal beam's receive power, averaged
//!   over evaluated steps.

mod experiment;
mod knn;
mod overhead;

pub use experiment::{
    merge_reports, run_experiment, run_experiment_with_progress, write_overhead_csv, EvalSplit,
    ExperimentConfig, ExperimentSummary, RunArtifacts,
};
pub use knn::KnnOracle;
pub use overhead::{overhead_report, training_overhead, OverheadInputs, OverheadReport};

use serde::{Deserialize, Serialize};

use crate::data::{make_model_input, DataSample, Modality, Observation};
use crate::physics::BeamPowerProfile;
use crate::tracker::{predict_topk, SequenceTracker, TrackerError};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("receive-power evaluation unavailable: labels-only dataset")]
    LabelsOnly,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("top-k parameter {k} out of range [1, {max}]")]
    KOutOfRange { k: usize, max: usize },
    #[error("horizon step {step} out of range [0, {horizon})")]
    HorizonOutOfRange { step: usize, horizon: usize },
    #[error("empty evaluation set")]
    EmptyEvaluationSet,
    #[error("nearest-neighbor oracle needs a non-empty training set")]
    EmptyOracleTrainingSet,
    #[error(transparent)]
    Tracker(#[from] TrackerError),
    #[error(transparent)]
    Data(#[from] crate::data::DataError),
    #[error(transparent)]
    Scene(#[from] crate::scene::SceneError),
    #[error(transparent)]
    Physics(#[from] crate::physics::PhysicsError),
    #[error("report io: {0}")]
    Io(#[from] std::io::Error),
    #[error("report serialization: {0}")]
    Json(#[from] serde_json::Error),
}

/// Per-sample observation windows, per-step optima, and (when available)
/// per-step power profiles for the prediction horizon.
#[derive(Debug, Clone)]
pub struct EvaluationSet {
    pub observations: Vec<Observation>,
    pub optima: Vec<Vec<usize>>,
    /// `None` marks a labels-only dataset.
    pub profiles: Option<Vec<Vec<BeamPowerProfile>>>,
}

impl EvaluationSet {
    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }
}

/// Slice windows into observations/targets/profiles for one modality.
pub fn build_evaluation_set(
    samples: &[DataSample],
    observation_len: usize,
    horizon: usize,
    modality: Modality,
) -> Result<EvaluationSet, EvalError> {
    if samples.is_empty() {
        return Err(EvalError::EmptyEvaluationSet);
    }
    let mut observations = Vec::with_capacity(samples.len());
    let mut optima = Vec::with_capacity(samples.len());
    let mut profiles: Option<Vec<Vec<BeamPowerProfile>>> = Some(Vec::with_capacity(samples.len()));
    for sample in samples {
        let input = make_model_input(sample, observation_len, horizon, modality)?;
        observations.push(input.observation);
        optima.push(input.targets);
        if let Some(acc) = profiles.as_mut() {
            let step_profiles: Option<Vec<BeamPowerProfile>> = sample.steps
                [observation_len..observation_len + horizon]
                .iter()
                .map(|s| s.profile.clone())
                .collect();
            match step_profiles {
                Some(p) => acc.push(p),
                None => profiles = None,
            }
        }
    }
    Ok(EvaluationSet {
        observations,
        optima,
        profiles,
    })
}

/// Fraction of samples whose top-k set at `horizon_step` (0-based) contains
/// the optimal beam. `predictions[s][j]` must hold at least `k` indices in
/// descending score order.
pub fn topk_accuracy(
    predictions: &[Vec<Vec<usize>>],
    optima: &[Vec<usize>],
    k: usize,
    horizon_step: usize,
) -> Result<f64, EvalError> {
    check_prediction_shape(predictions, optima)?;
    let horizon = optima[0].len();
    if horizon_step >= horizon {
        return Err(EvalError::HorizonOutOfRange {
            step: horizon_step,
            horizon,
        });
    }
    let mut hits = 0usize;
    for (pred, opt) in predictions.iter().zip(optima) {
        let list = &pred[horizon_step];
        if k == 0 || k > list.len() {
            return Err(EvalError::KOutOfRange { k, max: list.len() });
        }
        if list[..k].contains(&opt[horizon_step]) {
            hits += 1;
        }
    }
    Ok(hits as f64 / predictions.len() as f64)
}

/// Normalized receive power plus the number of steps excluded for a zero
/// optimal power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NrpOutcome {
    pub value: Option<f64>,
    pub excluded_zero_power: usize,
}

/// Mean over evaluated steps of `max(profile[top-k]) / profile[optimum]`.
/// `horizon_step = None` averages over every step of the horizon.
pub fn normalized_receive_power(
    predictions: &[Vec<Vec<usize>>],
    profiles: &[Vec<BeamPowerProfile>],
    optima: &[Vec<usize>],
    k: usize,
    horizon_step: Option<usize>,
) -> Result<NrpOutcome, EvalError> {
    check_prediction_shape(predictions, optima)?;
    if profiles.len() != predictions.len() {
        return Err(EvalError::ShapeMismatch(format!(
            "{} profile rows for {} samples",
            profiles.len(),
            predictions.len()
        )));
    }
    let horizon = optima[0].len();
    if let Some(step) = horizon_step {
        if step >= horizon {
            return Err(EvalError::HorizonOutOfRange { step, horizon });
        }
    }
    let mut total = 0.0;
    let mut counted = 0usize;
    let mut excluded = 0usize;
    for ((pred, profs), opt) in predictions.iter().zip(profiles).zip(optima) {
        for j in 0..horizon {
            if horizon_step.is_some_and(|s| s != j) {
                continue;
            }
            let list = &pred[j];
            if k == 0 || k > list.len() {
                return Err(EvalError::KOutOfRange { k, max: list.len() });
            }
            let profile = &profs[j];
            let optimal_power = profile.powers[opt[j]];
            if optimal_power <= 0.0 {
                excluded += 1;
                continue;
            }
            let best = list[..k]
                .iter()
                .map(|&b| profile.powers[b])
                .fold(f64::NEG_INFINITY, f64::max);
            total += best / optimal_power;
            counted += 1;
        }
    }
    Ok(NrpOutcome {
        value: (counted > 0).then(|| total / counted as f64),
        excluded_zero_power: excluded,
    })
}

fn check_prediction_shape(
    predictions: &[Vec<Vec<usize>>],
    optima: &[Vec<usize>],
) -> Result<(), EvalError> {
    if predictions.is_empty() || predictions.len() != optima.len() {
        return Err(EvalError::ShapeMismatch(format!(
            "{} prediction rows for {} optima rows",
            predictions.len(),
            optima.len()
        )));
    }
    let horizon = optima[0].len();
    if horizon == 0 {
        return Err(EvalError::EmptyEvaluationSet);
    }
    for (pred, opt) in predictions.iter().zip(optima) {
        if pred.len() != horizon || opt.len() != horizon {
            return Err(EvalError::ShapeMismatch(format!(
                "inconsistent horizon: {} and {} vs {}",
                pred.len(),
                opt.len(),
                horizon
            )));
        }
    }
    Ok(())
}

// ── model evaluation reports ────────────────────────────────────────────

/// One (horizon step, k) cell of a report. `horizon_step` is 1-based;
/// step 0 aggregates over the whole horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalEntry {
    pub horizon_step: usize,
    pub k: usize,
    pub top_k_accuracy: f64,
    pub normalized_receive_power: Option<f64>,
    pub sample_count: usize,
}

/// Full evaluation of one model on one dataset split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: String,
    pub codebook_size: usize,
    pub horizon: usize,
    pub max_k: usize,
    pub labels_only: bool,
    pub zero_power_excluded: usize,
    pub entries: Vec<EvalEntry>,
}

impl EvalReport {
    /// Entry for a given horizon step (1-based, 0 = aggregate) and k.
    pub fn entry(&self, horizon_step: usize, k: usize) -> Option<&EvalEntry> {
        self.entries
            .iter()
            .find(|e| e.horizon_step == horizon_step && e.k == k)
    }
}

/// Evaluate a tracker on windowed samples: per horizon step and per
/// `k = 1..=max_k`, plus aggregate rows at `horizon_step = 0`.
pub fn evaluate_model<M: SequenceTracker>(
    model: &M,
    samples: &[DataSample],
    observation_len: usize,
    horizon: usize,
    max_k: usize,
) -> Result<EvalReport, EvalError> {
    if max_k == 0 || max_k > model.num_beams() {
        return Err(EvalError::KOutOfRange {
            k: max_k,
            max: model.num_beams(),
        });
    }
    let set = build_evaluation_set(samples, observation_len, horizon, model.modality())?;
    let predictions: Vec<Vec<Vec<usize>>> = set
        .observations
        .iter()
        .map(|obs| {
            let scores = model.forward(obs, horizon)?;
            Ok(predict_topk(&scores, max_k)?)
        })
        .collect::<Result<_, EvalError>>()?;

    let mut entries = Vec::new();
    let mut zero_power_excluded = 0usize;
    for k in 1..=max_k {
        for step in 0..horizon {
            let accuracy = topk_accuracy(&predictions, &set.optima, k, step)?;
            let nrp = match &set.profiles {
                Some(profiles) => {
                    let outcome =
                        normalized_receive_power(&predictions, profiles, &set.optima, k, Some(step))?;
                    if k == 1 && step == 0 {
                        zero_power_excluded = outcome.excluded_zero_power;
                    }
                    outcome.value
                }
                None => None,
            };
            entries.push(EvalEntry {
                horizon_step: step + 1,
                k,
                top_k_accuracy: accuracy,
                normalized_receive_power: nrp,
                sample_count: set.len(),
            });
        }
        // Aggregate over the whole horizon.
        let mut hits = 0usize;
        for step in 0..horizon {
            hits += (topk_accuracy(&predictions, &set.optima, k, step)? * set.len() as f64).round()
                as usize;
        }
        let aggregate_accuracy = hits as f64 / (set.len() * horizon) as f64;
        let aggregate_nrp = match &set.profiles {
            Some(profiles) => {
                normalized_receive_power(&predictions, profiles, &set.optima, k, None)?.value
            }
            None => None,
        };
        entries.push(EvalEntry {
            horizon_step: 0,
            k,
            top_k_accuracy: aggregate_accuracy,
            normalized_receive_power: aggregate_nrp,
            sample_count: set.len() * horizon,
        });
    }

    Ok(EvalReport {
        model: model.kind().to_string(),
        codebook_size: model.num_beams(),
        horizon,
        max_k,
        labels_only: set.profiles.is_none(),
        zero_power_excluded,
        entries,
    })
}

/// Append report rows to a CSV with the fixed column order
/// `horizon,k,metric,value,model,codebook_size` (horizon 0 = aggregate).
pub fn write_report_csv(path: &std::path::Path, reports: &[EvalReport]) -> Result<(), EvalError> {
    use std::io::Write;
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "horizon,k,metric,value,model,codebook_size")?;
    for report in reports {
        for entry in &report.entries {
            writeln!(
                w,
                "{},{},top_k_accuracy,{},{},{}",
                entry.horizon_step, entry.k, entry.top_k_accuracy, report.model, report.codebook_size
            )?;
            if let Some(nrp) = entry.normalized_receive_power {
                writeln!(
                    w,
                    "{},{},normalized_receive_power,{},{},{}",
                    entry.horizon_step, entry.k, nrp, report.model, report.codebook_size
                )?;
            }
        }
    }
    w.flush()?;
    Ok(())
}
