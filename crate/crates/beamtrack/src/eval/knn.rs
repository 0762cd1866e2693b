//! Nearest-neighbor beam predictor over concatenated bounding-box windows.
//!
//! A deliberately simple, non-neural reference: the query's nearest training
//! observations under Euclidean distance vote for the future beams. Used as
//! an independent ground check for the learned trackers.

use crate::data::{ModelInput, Observation};

use super::EvalError;

#[derive(Debug, Clone)]
pub struct KnnOracle {
    features: Vec<Vec<f64>>,
    targets: Vec<Vec<usize>>,
}

fn flatten_observation(observation: &Observation) -> Result<Vec<f64>, EvalError> {
    match observation {
        Observation::Bboxes(boxes) => Ok(boxes.iter().flatten().copied().collect()),
        Observation::BeamIndices(_) => Err(EvalError::ShapeMismatch(
            "nearest-neighbor oracle expects bounding-box observations".into(),
        )),
    }
}

impl KnnOracle {
    /// Memorize the training observations and their target beams.
    pub fn fit(train_inputs: &[ModelInput]) -> Result<Self, EvalError> {
        if train_inputs.is_empty() {
            return Err(EvalError::EmptyOracleTrainingSet);
        }
        let mut features = Vec::with_capacity(train_inputs.len());
        let mut targets = Vec::with_capacity(train_inputs.len());
        let dim = flatten_observation(&train_inputs[0].observation)?.len();
        let horizon = train_inputs[0].targets.len();
        for input in train_inputs {
            let f = flatten_observation(&input.observation)?;
            if f.len() != dim || input.targets.len() != horizon {
                return Err(EvalError::ShapeMismatch(
                    "inconsistent oracle training shapes".into(),
                ));
            }
            features.push(f);
            targets.push(input.targets.clone());
        }
        Ok(Self { features, targets })
    }

    pub fn horizon(&self) -> usize {
        self.targets[0].len()
    }

    /// Predict one beam per horizon step by majority vote over the
    /// `k_neighbors` nearest training samples. Distance ties break to the
    /// earlier training sample; vote ties break to the nearer neighbor's
    /// candidate.
    pub fn predict(
        &self,
        observation: &Observation,
        k_neighbors: usize,
    ) -> Result<Vec<usize>, EvalError> {
        if k_neighbors == 0 {
            return Err(EvalError::KOutOfRange {
                k: 0,
                max: self.features.len(),
            });
        }
        let query = flatten_observation(observation)?;
        if query.len() != self.features[0].len() {
            return Err(EvalError::ShapeMismatch(format!(
                "query dimension {} does not match training dimension {}",
                query.len(),
                self.features[0].len()
            )));
        }
        let mut order: Vec<(f64, usize)> = self
            .features
            .iter()
            .enumerate()
            .map(|(i, f)| {
                let d2: f64 = f
                    .iter()
                    .zip(&query)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                (d2, i)
            })
            .collect();
        order.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        let neighbors: Vec<usize> = order
            .iter()
            .take(k_neighbors.min(order.len()))
            .map(|&(_, i)| i)
            .collect();

        let horizon = self.horizon();
        let mut prediction = Vec::with_capacity(horizon);
        for j in 0..horizon {
            let candidates: Vec<usize> = neighbors.iter().map(|&n| self.targets[n][j]).collect();
            // Strictly-greater replacement keeps the nearest neighbor's
            // candidate on vote ties.
            let mut best_beam = candidates[0];
            let mut best_count = 0usize;
            for &beam in &candidates {
                let count = candidates.iter().filter(|&&b| b == beam).count();
                if count > best_count {
                    best_count = count;
                    best_beam = beam;
                }
            }
            prediction.push(best_beam);
        }
        Ok(prediction)
    }

    /// Top-1 accuracy at one horizon step (0-based) over an evaluation set.
    pub fn accuracy(
        &self,
        inputs: &[ModelInput],
        k_neighbors: usize,
        horizon_step: usize,
    ) -> Result<f64, EvalError> {
        if inputs.is_empty() {
            return Err(EvalError::EmptyEvaluationSet);
        }
        let mut hits = 0usize;
        for input in inputs {
            let pred = self.predict(&input.observation, k_neighbors)?;
            if horizon_step >= pred.len() {
                return Err(EvalError::HorizonOutOfRange {
                    step: horizon_step,
                    horizon: pred.len(),
                });
            }
            if pred[horizon_step] == input.targets[horizon_step] {
                hits += 1;
            }
        }
        Ok(hits as f64 / inputs.len() as f64)
    }
}
