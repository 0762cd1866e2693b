//! Shuffled-minibatch training with best-validation model selection.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::ModelInput;
use crate::nn::{Adam, OptimizerConfig};
use crate::scene::mix_seed;

use super::{predict_topk, SequenceTracker, TrackerError};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerConfig,
    /// Observation window length fed to the encoder.
    pub observation_len: usize,
    /// Prediction horizon unrolled by the decoder.
    pub horizon: usize,
    pub shuffle_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            batch_size: 32,
            optimizer: OptimizerConfig::default(),
            observation_len: crate::data::DEFAULT_OBSERVATION,
            horizon: crate::data::DEFAULT_HORIZON,
            shuffle_seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrackerError> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(TrackerError::InvalidConfig(
                "epochs and batch_size must be at least 1".into(),
            ));
        }
        if self.observation_len == 0 || self.horizon == 0 {
            return Err(TrackerError::InvalidConfig(
                "observation_len and horizon must be at least 1".into(),
            ));
        }
        self.optimizer.validate()?;
        Ok(())
    }
}

/// Epoch-indexed training history. The model returned by [`train`] carries
/// the parameters of `best_epoch` (lowest validation loss), or the final
/// epoch when no validation samples were provided.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub val_top1: Vec<f64>,
    pub best_epoch: Option<usize>,
}

/// Minibatch gradient descent on the cross-entropy over the decoder outputs.
/// Deterministic given the seeds in the config.
pub fn train<M: SequenceTracker>(
    model: &mut M,
    train_inputs: &[ModelInput],
    val_inputs: &[ModelInput],
    cfg: &TrainConfig,
) -> Result<TrainReport, TrackerError> {
    cfg.validate()?;
    if train_inputs.is_empty() {
        return Err(TrackerError::EmptyTrainingSet);
    }
    for input in train_inputs.iter().chain(val_inputs) {
        if input.observation.len() != cfg.observation_len || input.targets.len() != cfg.horizon {
            return Err(TrackerError::InvalidConfig(format!(
                "input shape ({}, {}) does not match config ({}, {})",
                input.observation.len(),
                input.targets.len(),
                cfg.observation_len,
                cfg.horizon
            )));
        }
    }

    let shapes: Vec<Vec<usize>> = model
        .parameters_mut()
        .iter()
        .map(|p| p.value.shape().to_vec())
        .collect();
    let mut adam = Adam::new(cfg.optimizer.clone(), &shapes)?;

    let mut report = TrainReport {
        train_loss: Vec::with_capacity(cfg.epochs),
        val_loss: Vec::with_capacity(cfg.epochs),
        val_top1: Vec::with_capacity(cfg.epochs),
        best_epoch: None,
    };
    let mut best: Option<(f64, Vec<crate::nn::Tensor>)> = None;

    let mut order: Vec<usize> = (0..train_inputs.len()).collect();
    for epoch in 0..cfg.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.shuffle_seed, epoch as u64));
        order.shuffle(&mut rng);

        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            model.zero_grad();
            let mut batch_loss = 0.0;
            for &idx in batch {
                let input = &train_inputs[idx];
                batch_loss += model.accumulate_gradients(&input.observation, &input.targets)?;
            }
            let scale = 1.0 / batch.len() as f64;
            for p in model.parameters_mut() {
                p.scale_grad(scale);
            }
            adam.step(&mut model.parameters_mut())?;
            epoch_loss += batch_loss;
        }
        report.train_loss.push(epoch_loss / train_inputs.len() as f64);

        if !val_inputs.is_empty() {
            let (val_loss, val_top1) = evaluate_split(model, val_inputs)?;
            report.val_loss.push(val_loss);
            report.val_top1.push(val_top1);
            if best.as_ref().is_none_or(|(b, _)| val_loss < *b) {
                best = Some((val_loss, model.snapshot()));
                report.best_epoch = Some(epoch);
            }
        }
    }

    if let Some((_, snapshot)) = best {
        model.restore(&snapshot);
    }
    Ok(report)
}

/// Mean loss and top-1 accuracy (over all horizon steps) on a sample set.
pub fn evaluate_split<M: SequenceTracker>(
    model: &M,
    inputs: &[ModelInput],
) -> Result<(f64, f64), TrackerError> {
    let mut total_loss = 0.0;
    let mut correct = 0usize;
    let mut total = 0usize;
    for input in inputs {
        let scores = model.forward(&input.observation, input.targets.len())?;
        total_loss += super::check_loss(&scores.scores, &input.targets);
        let top1 = predict_topk(&scores, 1)?;
        for (pred, &target) in top1.iter().zip(&input.targets) {
            if pred[0] == target {
                correct += 1;
            }
            total += 1;
        }
    }
    Ok((
        total_loss / inputs.len() as f64,
        correct as f64 / total as f64,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Observation;
    use crate::tracker::VisionTracker;

    fn synthetic_inputs(count: usize, num_beams: usize) -> Vec<ModelInput> {
        // A smooth, learnable map: the box drifts right and the target beam
        // follows its position.
        (0..count)
            .map(|s| {
                let offset = s as f64 / count as f64 * 0.5;
                let bboxes: Vec<[f64; 4]> = (0..3)
                    .map(|k| {
                        let x = offset + k as f64 * 0.04;
                        [x, 0.5, 0.1, 0.12]
                    })
                    .collect();
                let targets: Vec<usize> = (3..5)
                    .map(|k| {
                        let x = offset + k as f64 * 0.04;
                        ((x * num_beams as f64) as usize).min(num_beams - 1)
                    })
                    .collect();
                ModelInput {
                    observation: Observation::Bboxes(bboxes),
                    targets,
                }
            })
            .collect()
    }

    fn tiny_config(epochs: usize) -> TrainConfig {
        TrainConfig {
            epochs,
            batch_size: 8,
            observation_len: 3,
            horizon: 2,
            ..Default::default()
        }
    }

    #[test]
    fn loss_decreases_on_learnable_problem() {
        let inputs = synthetic_inputs(32, 16);
        let mut model = VisionTracker::new(16, 8, 8, 1);
        let report = train(&mut model, &inputs, &[], &tiny_config(2)).unwrap();
        assert_eq!(report.train_loss.len(), 2);
        assert!(
            report.train_loss[1] < report.train_loss[0],
            "no descent: {:?}",
            report.train_loss
        );
    }

    #[test]
    fn training_is_deterministic() {
        let inputs = synthetic_inputs(24, 16);
        let run = || {
            let mut model = VisionTracker::new(16, 8, 8, 2);
            train(&mut model, &inputs[..16], &inputs[16..], &tiny_config(3)).unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn memorizes_a_single_repeated_sample() {
        let inputs = vec![synthetic_inputs(8, 16).swap_remove(3)];
        let mut model = VisionTracker::new(16, 8, 8, 3);
        let cfg = TrainConfig {
            epochs: 500,
            batch_size: 1,
            observation_len: 3,
            horizon: 2,
            optimizer: OptimizerConfig {
                learning_rate: 1e-2,
                ..Default::default()
            },
            ..Default::default()
        };
        let report = train(&mut model, &inputs, &[], &cfg).unwrap();
        let final_loss = *report.train_loss.last().unwrap();
        assert!(final_loss < 0.01, "failed to memorize: {final_loss}");
    }

    #[test]
    fn best_validation_state_is_restored() {
        let inputs = synthetic_inputs(32, 16);
        let (train_set, val_set) = inputs.split_at(24);
        let mut model = VisionTracker::new(16, 8, 8, 4);
        let report = train(&mut model, train_set, val_set, &tiny_config(5)).unwrap();
        let best_epoch = report.best_epoch.unwrap();
        let best_loss = report.val_loss[best_epoch];
        assert!(report
            .val_loss
            .iter()
            .all(|&l| l >= best_loss - 1e-15));
        // The restored model reproduces the best epoch's validation loss.
        let (val_loss, _) = evaluate_split(&model, val_set).unwrap();
        assert!((val_loss - best_loss).abs() < 1e-12);
    }

    #[test]
    fn empty_training_set_rejected() {
        let mut model = VisionTracker::new(16, 8, 8, 5);
        assert!(matches!(
            train(&mut model, &[], &[], &tiny_config(1)),
            Err(TrackerError::EmptyTrainingSet)
        ));
    }

    #[test]
    fn shape_mismatch_with_config_rejected() {
        let inputs = synthetic_inputs(4, 16);
        let mut model = VisionTracker::new(16, 8, 8, 5);
        let mut cfg = tiny_config(1);
        cfg.horizon = 3; // inputs carry 2 targets
        assert!(matches!(
            train(&mut model, &inputs, &[], &cfg),
            Err(TrackerError::InvalidConfig(_))
        ));
    }
}
