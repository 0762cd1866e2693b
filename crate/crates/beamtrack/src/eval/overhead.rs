//! Beam-training overhead accounting over an observation-plus-prediction
//! window.
//!
//! The baseline tracker needs the previous optimal beams, which costs a full
//! codebook sweep at each of the `i` observation steps. The vision tracker
//! observes with the camera and sweeps nothing. At the predicted future step,
//! both approaches sweep the top-k candidates when `k >= 2`; a top-1
//! prediction is used directly with no sweeping.

use serde::{Deserialize, Serialize};

use crate::data::Modality;

use super::EvalError;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OverheadInputs {
    /// Observation window length `i`.
    pub observation_window: usize,
    /// Codebook size `|F|`.
    pub codebook_size: usize,
    /// Number of predicted beams swept at the future step.
    pub k: usize,
}

impl OverheadInputs {
    pub fn validate(&self) -> Result<(), EvalError> {
        if self.observation_window == 0 || self.codebook_size == 0 || self.k == 0 {
            return Err(EvalError::ShapeMismatch(
                "overhead inputs must be positive".into(),
            ));
        }
        if self.k > self.codebook_size {
            return Err(EvalError::KOutOfRange {
                k: self.k,
                max: self.codebook_size,
            });
        }
        Ok(())
    }
}

/// Beam measurements consumed by one approach over the `(i+1)`-step window.
pub fn training_overhead(inputs: &OverheadInputs, approach: Modality) -> Result<u64, EvalError> {
    inputs.validate()?;
    let future = if inputs.k == 1 { 0 } else { inputs.k as u64 };
    Ok(match approach {
        Modality::Vision => future,
        Modality::Baseline => {
            (inputs.observation_window * inputs.codebook_size) as u64 + future
        }
    })
}

/// Both approaches plus their ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverheadReport {
    pub observation_window: usize,
    pub codebook_size: usize,
    pub k: usize,
    pub vision_measurements: u64,
    pub baseline_measurements: u64,
    pub ratio: f64,
}

pub fn overhead_report(inputs: &OverheadInputs) -> Result<OverheadReport, EvalError> {
    let vision = training_overhead(inputs, Modality::Vision)?;
    let baseline = training_overhead(inputs, Modality::Baseline)?;
    Ok(OverheadReport {
        observation_window: inputs.observation_window,
        codebook_size: inputs.codebook_size,
        k: inputs.k,
        vision_measurements: vision,
        baseline_measurements: baseline,
        ratio: vision as f64 / baseline as f64,
    })
}
