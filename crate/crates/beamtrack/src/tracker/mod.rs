//! Encoder-decoder beam trackers.
//!
//! Both variants share the same skeleton: an embedding front end, a GRU
//! encoder that digests the observation window, a GRU decoder unrolled over
//! the prediction horizon on zero-vector inputs, and a linear classifier with
//! softmax over the codebook. The vision variant embeds bounding boxes with a
//! linear layer; the baseline variant embeds previous optimal beam indices
//! with a look-up table.

mod train;

pub use train::{train, TrainConfig, TrainReport};

use std::path::Path;

use crate::data::{Modality, Observation};
use crate::nn::{
    load_checkpoint, save_checkpoint, softmax, softmax_cross_entropy_grad, CheckpointError,
    Embedding, GruCell, GruStepCache, Initializer, Linear, NnError, Parameter, Tensor,
};

/// Default embedding width for both variants.
pub const DEFAULT_EMBED_DIM: usize = 64;
/// Default GRU hidden state size.
pub const DEFAULT_HIDDEN_DIM: usize = 64;

#[derive(Debug, thiserror::Error)]
pub enum TrackerError {
    #[error("model expects {expected} observations, got {found}")]
    ModalityMismatch {
        expected: Modality,
        found: &'static str,
    },
    #[error("beam index {index} out of range for codebook size {num_beams}")]
    BeamIndexOutOfRange { index: usize, num_beams: usize },
    #[error("top-k parameter {k} out of range [1, {num_beams}]")]
    KOutOfRange { k: usize, num_beams: usize },
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
}

/// Per-horizon-step probability rows over the codebook.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSequence {
    pub scores: Vec<Vec<f64>>,
}

impl ScoreSequence {
    pub fn horizon(&self) -> usize {
        self.scores.len()
    }

    pub fn num_beams(&self) -> usize {
        self.scores.first().map_or(0, Vec::len)
    }
}

/// Per step, the `k` highest-scoring beam indices in descending score order;
/// score ties break to the lower index.
pub fn predict_topk(scores: &ScoreSequence, k: usize) -> Result<Vec<Vec<usize>>, TrackerError> {
    let num_beams = scores.num_beams();
    if k == 0 || k > num_beams {
        return Err(TrackerError::KOutOfRange { k, num_beams });
    }
    Ok(scores
        .scores
        .iter()
        .map(|row| {
            let mut order: Vec<usize> = (0..row.len()).collect();
            order.sort_by(|&a, &b| {
                row[b]
                    .partial_cmp(&row[a])
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(a.cmp(&b))
            });
            order.truncate(k);
            order
        })
        .collect())
}

// ── shared encoder-decoder core ─────────────────────────────────────────

#[derive(Debug, Clone)]
struct EncoderDecoderCore {
    encoder: GruCell,
    decoder: GruCell,
    classifier: Linear,
}

struct CoreCache {
    embedded: Vec<Vec<f64>>,
    encoder_caches: Vec<GruStepCache>,
    decoder_caches: Vec<GruStepCache>,
    decoder_states: Vec<Vec<f64>>,
    probs: Vec<Vec<f64>>,
}

impl EncoderDecoderCore {
    fn new(embed_dim: usize, hidden_dim: usize, num_beams: usize, init: &mut Initializer) -> Self {
        Self {
            encoder: GruCell::new(embed_dim, hidden_dim, init),
            decoder: GruCell::new(embed_dim, hidden_dim, init),
            classifier: Linear::new(hidden_dim, num_beams, init),
        }
    }

    fn num_beams(&self) -> usize {
        self.classifier.out_dim()
    }

    fn hidden_dim(&self) -> usize {
        self.encoder.hidden_dim()
    }

    fn embed_dim(&self) -> usize {
        self.encoder.input_dim()
    }

    /// Encoder over the embedded observations, decoder over `horizon` zero
    /// inputs, classifier + softmax per decoder state.
    fn forward(&self, embedded: Vec<Vec<f64>>, horizon: usize) -> Result<CoreCache, TrackerError> {
        let mut h = vec![0.0; self.hidden_dim()];
        let mut encoder_caches = Vec::with_capacity(embedded.len());
        for e in &embedded {
            let (h_new, cache) = self.encoder.forward(e, &h)?;
            h = h_new;
            encoder_caches.push(cache);
        }
        let zero_input = vec![0.0; self.embed_dim()];
        let mut decoder_caches = Vec::with_capacity(horizon);
        let mut decoder_states = Vec::with_capacity(horizon);
        let mut probs = Vec::with_capacity(horizon);
        for _ in 0..horizon {
            let (h_new, cache) = self.decoder.forward(&zero_input, &h)?;
            h = h_new;
            let logits = self.classifier.forward(&h)?;
            probs.push(softmax(&logits));
            decoder_states.push(h.clone());
            decoder_caches.push(cache);
        }
        Ok(CoreCache {
            embedded,
            encoder_caches,
            decoder_caches,
            decoder_states,
            probs,
        })
    }

    /// Backward from the fused softmax/cross-entropy gradient; returns the
    /// gradients with respect to the embedded observation vectors.
    fn backward(&mut self, cache: &CoreCache, targets: &[usize]) -> Vec<Vec<f64>> {
        let hidden = self.hidden_dim();
        let horizon = cache.decoder_caches.len();
        let mut zero_dx = vec![0.0; self.embed_dim()];
        let mut dh_chain = vec![0.0; hidden];
        for j in (0..horizon).rev() {
            let dlogits = softmax_cross_entropy_grad(&cache.probs[j], targets[j], horizon);
            let mut dh = dh_chain;
            self.classifier
                .backward(&cache.decoder_states[j], &dlogits, &mut dh);
            let mut dh_prev = vec![0.0; hidden];
            self.decoder
                .backward(&cache.decoder_caches[j], &dh, &mut zero_dx, &mut dh_prev);
            dh_chain = dh_prev;
        }
        let mut d_embedded = Vec::with_capacity(cache.embedded.len());
        for t in (0..cache.encoder_caches.len()).rev() {
            let mut dx = vec![0.0; self.embed_dim()];
            let mut dh_prev = vec![0.0; hidden];
            self.encoder
                .backward(&cache.encoder_caches[t], &dh_chain, &mut dx, &mut dh_prev);
            d_embedded.push(dx);
            dh_chain = dh_prev;
        }
        d_embedded.reverse();
        d_embedded
    }

    fn parameters_mut(&mut self) -> Vec<&mut Parameter> {
        let mut params = self.encoder.parameters_mut();
        params.extend(self.decoder.parameters_mut());
        params.extend(self.classifier.parameters_mut());
        params
    }

    fn manifest_names() -> Vec<String> {
        let gru = |prefix: &str| {
            [
                "input_update",
                "recurrent_update",
                "bias_update",
                "input_reset",
                "recurrent_reset",
                "bias_reset",
                "input_candidate",
                "recurrent_candidate",
                "bias_candidate",
            ]
            .iter()
            .map(|n| format!("{prefix}.{n}"))
            .collect::<Vec<_>>()
        };
        let mut names = gru("encoder");
        names.extend(gru("decoder"));
        names.push("classifier.weight".into());
        names.push("classifier.bias".into());
        names
    }
}

// ── common model behavior ───────────────────────────────────────────────

/// Behavior shared by both tracker variants: forward scoring, gradient
/// accumulation, parameter access, and checkpointing.
pub trait SequenceTracker {
    fn kind(&self) -> &'static str;
    fn modality(&self) -> Modality;
    fn num_beams(&self) -> usize;

    /// Probability rows for `horizon` future steps given an observation window.
    fn forward(&self, observation: &Observation, horizon: usize)
        -> Result<ScoreSequence, TrackerError>;

    /// Forward plus backward on one (observation, targets) pair, accumulating
    /// into the parameter gradients; returns the sample loss.
    fn accumulate_gradients(
        &mut self,
        observation: &Observation,
        targets: &[usize],
    ) -> Result<f64, TrackerError>;

    fn parameters_mut(&mut self) -> Vec<&mut Parameter>;
    fn parameter_names(&self) -> Vec<String>;

    fn zero_grad(&mut self) {
        for p in self.parameters_mut() {
            p.zero_grad();
        }
    }

    fn snapshot(&mut self) -> Vec<Tensor> {
        self.parameters_mut()
            .into_iter()
            .map(|p| p.value.clone())
            .collect()
    }

    fn restore(&mut self, snapshot: &[Tensor]) {
        for (p, t) in self.parameters_mut().into_iter().zip(snapshot) {
            p.value = t.clone();
        }
    }

    fn parameter_manifest(&mut self) -> Vec<(String, Vec<usize>)> {
        let names = self.parameter_names();
        names
            .into_iter()
            .zip(self.parameters_mut())
            .map(|(n, p)| (n, p.value.shape().to_vec()))
            .collect()
    }

    fn save(&mut self, path: &Path) -> Result<(), TrackerError> {
        let kind = self.kind();
        let names = self.parameter_names();
        let tensors: Vec<Tensor> = self.snapshot();
        let entries: Vec<(String, &Tensor)> = names.into_iter().zip(tensors.iter()).collect();
        save_checkpoint(path, kind, &entries)?;
        Ok(())
    }
}

fn check_loss(probs: &[Vec<f64>], targets: &[usize]) -> f64 {
    let horizon = probs.len() as f64;
    probs
        .iter()
        .zip(targets)
        .map(|(row, &t)| -row[t].max(crate::nn::LOG_EPSILON).ln())
        .sum::<f64>()
        / horizon
}

// ── vision variant ──────────────────────────────────────────────────────

/// Vision-aided tracker: bounding boxes in, future beam scores out.
#[derive(Debug, Clone)]
pub struct VisionTracker {
    bbox_embedding: Linear,
    core: EncoderDecoderCore,
}

impl VisionTracker {
    pub fn new(num_beams: usize, embed_dim: usize, hidden_dim: usize, seed: u64) -> Self {
        let mut init = Initializer::new(seed);
        Self {
            bbox_embedding: Linear::new(4, embed_dim, &mut init),
            core: EncoderDecoderCore::new(embed_dim, hidden_dim, num_beams, &mut init),
        }
    }

    pub fn with_defaults(num_beams: usize, seed: u64) -> Self {
        Self::new(num_beams, DEFAULT_EMBED_DIM, DEFAULT_HIDDEN_DIM, seed)
    }

    pub fn load(path: &Path) -> Result<Self, TrackerError> {
        let ckpt = load_checkpoint(path)?;
        let dims = |name: &str| -> Result<Vec<usize>, TrackerError> {
            ckpt.entries
                .iter()
                .find(|(n, _)| n == name)
                .map(|(_, t)| t.shape().to_vec())
                .ok_or_else(|| {
                    TrackerError::Checkpoint(CheckpointError::ManifestMismatch(format!(
                        "missing parameter '{name}'"
                    )))
                })
        };
        let embed_shape = dims("bbox_embedding.weight")?;
        let cls_shape = dims("classifier.weight")?;
        let mut model = Self::new(cls_shape[0], embed_shape[0], cls_shape[1], 0);
        let manifest = model.parameter_manifest();
        let tensors = ckpt.into_tensors("vision", &manifest)?;
        model.restore(&tensors);
        Ok(model)
    }

    fn embed(&self, bboxes: &[[f64; 4]]) -> Result<Vec<Vec<f64>>, TrackerError> {
        bboxes
            .iter()
            .map(|b| self.bbox_embedding.forward(b).map_err(TrackerError::from))
            .collect()
    }
}

impl SequenceTracker for VisionTracker {
    fn kind(&self) -> &'static str {
        "vision"
    }

    fn modality(&self) -> Modality {
        Modality::Vision
    }

    fn num_beams(&self) -> usize {
        self.core.num_beams()
    }

    fn forward(
        &self,
        observation: &Observation,
        horizon: usize,
    ) -> Result<ScoreSequence, TrackerError> {
        let Observation::Bboxes(bboxes) = observation else {
            return Err(TrackerError::ModalityMismatch {
                expected: Modality::Vision,
                found: "beam indices",
            });
        };
        let cache = self.core.forward(self.embed(bboxes)?, horizon)?;
        Ok(ScoreSequence { scores: cache.probs })
    }

    fn accumulate_gradients(
        &mut self,
        observation: &Observation,
        targets: &[usize],
    ) -> Result<f64, TrackerError> {
        let Observation::Bboxes(bboxes) = observation else {
            return Err(TrackerError::ModalityMismatch {
                expected: Modality::Vision,
                found: "beam indices",
            });
        };
        let cache = self.core.forward(self.embed(bboxes)?, targets.len())?;
        let loss = check_loss(&cache.probs, targets);
        let d_embedded = self.core.backward(&cache, targets);
        let mut unused = [0.0; 4];
        for (bbox, d) in bboxes.iter().zip(&d_embedded) {
            unused.fill(0.0);
            self.bbox_embedding.backward(bbox, d, &mut unused);
        }
        Ok(loss)
    }

    fn parameters_mut(&mut self) -> Vec<&mut Parameter> {
        let mut params = self.bbox_embedding.parameters_mut();
        params.extend(self.core.parameters_mut());
        params
    }

    fn parameter_names(&self) -> Vec<String> {
        let mut names = vec!["bbox_embedding.weight".into(), "bbox_embedding.bias".into()];
        names.extend(EncoderDecoderCore::manifest_names());
        names
    }
}

// ── baseline variant ────────────────────────────────────────────────────

/// Beam-sequence baseline: previous optimal beam indices in, future beam
/// scores out.
#[derive(Debug, Clone)]
pub struct BaselineTracker {
    beam_embedding: Embedding,
    core: EncoderDecoderCore,
}

impl BaselineTracker {
    pub fn new(num_beams: usize, embed_dim: usize, hidden_dim: usize, seed: u64) -> Self {
        let mut init = Initializer::new(seed);
        Self {
            beam_embedding: Embedding::new(num_beams, embed_dim, &mut init),
            core: EncoderDecoderCore::new(embed_dim, hidden_dim, num_beams, &mut init),
        }
    }

    pub fn with_defaults(num_beams: usize, seed: u64) -> Self {
        Self::new(num_beams, DEFAULT_EMBED_DIM, DEFAULT_HIDDEN_DIM, seed)
    }

    pub fn load(path: &Path) -> Result<Self, TrackerError> {
        let ckpt = load_checkpoint(path)?;
        let table_shape = ckpt
            .entries
            .iter()
            .find(|(n, _)| n == "beam_embedding.table")
            .map(|(_, t)| t.shape().to_vec())
            .ok_or_else(|| {
                TrackerError::Checkpoint(CheckpointError::ManifestMismatch(
                    "missing parameter 'beam_embedding.table'".into(),
                ))
            })?;
        let cls_shape = ckpt
            .entries
            .iter()
            .find(|(n, _)| n == "classifier.weight")
            .map(|(_, t)| t.shape().to_vec())
            .ok_or_else(|| {
                TrackerError::Checkpoint(CheckpointError::ManifestMismatch(
                    "missing parameter 'classifier.weight'".into(),
                ))
            })?;
        let mut model = Self::new(table_shape[0], table_shape[1], cls_shape[1], 0);
        let manifest = model.parameter_manifest();
        let tensors = ckpt.into_tensors("baseline", &manifest)?;
        model.restore(&tensors);
        Ok(model)
    }

    fn embed(&self, indices: &[usize]) -> Result<Vec<Vec<f64>>, TrackerError> {
        indices
            .iter()
            .map(|&i| {
                if i >= self.num_beams() {
                    return Err(TrackerError::BeamIndexOutOfRange {
                        index: i,
                        num_beams: self.num_beams(),
                    });
                }
                Ok(self.beam_embedding.lookup(i)?.to_vec())
            })
            .collect()
    }
}

impl SequenceTracker for BaselineTracker {
    fn kind(&self) -> &'static str {
        "baseline"
    }

    fn modality(&self) -> Modality {
        Modality::Baseline
    }

    fn num_beams(&self) -> usize {
        self.core.num_beams()
    }

    fn forward(
        &self,
        observation: &Observation,
        horizon: usize,
    ) -> Result<ScoreSequence, TrackerError> {
        let Observation::BeamIndices(indices) = observation else {
            return Err(TrackerError::ModalityMismatch {
                expected: Modality::Baseline,
                found: "bounding boxes",
            });
        };
        let cache = self.core.forward(self.embed(indices)?, horizon)?;
        Ok(ScoreSequence { scores: cache.probs })
    }

    fn accumulate_gradients(
        &mut self,
        observation: &Observation,
        targets: &[usize],
    ) -> Result<f64, TrackerError> {
        let Observation::BeamIndices(indices) = observation else {
            return Err(TrackerError::ModalityMismatch {
                expected: Modality::Baseline,
                found: "bounding boxes",
            });
        };
        let cache = self.core.forward(self.embed(indices)?, targets.len())?;
        let loss = check_loss(&cache.probs, targets);
        let d_embedded = self.core.backward(&cache, targets);
        for (&index, d) in indices.iter().zip(&d_embedded) {
            self.beam_embedding.backward(index, d);
        }
        Ok(loss)
    }

    fn parameters_mut(&mut self) -> Vec<&mut Parameter> {
        let mut params = self.beam_embedding.parameters_mut();
        params.extend(self.core.parameters_mut());
        params
    }

    fn parameter_names(&self) -> Vec<String> {
        let mut names = vec!["beam_embedding.table".into()];
        names.extend(EncoderDecoderCore::manifest_names());
        names
    }
}

/// A checkpoint of either variant, loaded by kind.
pub enum AnyTracker {
    Vision(VisionTracker),
    Baseline(BaselineTracker),
}

impl AnyTracker {
    pub fn load(path: &Path) -> Result<Self, TrackerError> {
        let kind = load_checkpoint(path)?.model_kind;
        match kind.as_str() {
            "vision" => Ok(Self::Vision(VisionTracker::load(path)?)),
            "baseline" => Ok(Self::Baseline(BaselineTracker::load(path)?)),
            other => Err(TrackerError::Checkpoint(CheckpointError::ManifestMismatch(
                format!("unknown model kind '{other}'"),
            ))),
        }
    }

    pub fn as_tracker(&self) -> &dyn SequenceTracker {
        match self {
            Self::Vision(m) => m,
            Self::Baseline(m) => m,
        }
    }
}

impl SequenceTracker for AnyTracker {
    fn kind(&self) -> &'static str {
        self.as_tracker().kind()
    }

    fn modality(&self) -> Modality {
        self.as_tracker().modality()
    }

    fn num_beams(&self) -> usize {
        self.as_tracker().num_beams()
    }

    fn forward(
        &self,
        observation: &Observation,
        horizon: usize,
    ) -> Result<ScoreSequence, TrackerError> {
        self.as_tracker().forward(observation, horizon)
    }

    fn accumulate_gradients(
        &mut self,
        observation: &Observation,
        targets: &[usize],
    ) -> Result<f64, TrackerError> {
        match self {
            Self::Vision(m) => m.accumulate_gradients(observation, targets),
            Self::Baseline(m) => m.accumulate_gradients(observation, targets),
        }
    }

    fn parameters_mut(&mut self) -> Vec<&mut Parameter> {
        match self {
            Self::Vision(m) => m.parameters_mut(),
            Self::Baseline(m) => m.parameters_mut(),
        }
    }

    fn parameter_names(&self) -> Vec<String> {
        self.as_tracker().parameter_names()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::finite_difference_check;

    fn bbox_window(len: usize) -> Observation {
        Observation::Bboxes(
            (0..len)
                .map(|k| {
                    let t = k as f64 / len as f64;
                    [0.1 + 0.8 * t, 0.5, 0.08 + 0.02 * t, 0.1]
                })
                .collect(),
        )
    }

    fn index_window(len: usize, num_beams: usize) -> Observation {
        Observation::BeamIndices((0..len).map(|k| k % num_beams).collect())
    }

    #[test]
    fn score_rows_are_probability_vectors() {
        let model = VisionTracker::new(16, 8, 8, 3);
        let scores = model.forward(&bbox_window(8), 5).unwrap();
        assert_eq!(scores.horizon(), 5);
        assert_eq!(scores.num_beams(), 16);
        for row in &scores.scores {
            assert!(row.iter().all(|&p| p > 0.0));
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_weights_give_uniform_rows() {
        let mut model = VisionTracker::new(16, 8, 8, 3);
        for p in model.parameters_mut() {
            p.value.fill(0.0);
        }
        let scores = model.forward(&bbox_window(8), 3).unwrap();
        for row in &scores.scores {
            assert!(row.iter().all(|&p| (p - 1.0 / 16.0).abs() < 1e-12));
        }
        let mut baseline = BaselineTracker::new(16, 8, 8, 3);
        for p in baseline.parameters_mut() {
            p.value.fill(0.0);
        }
        let scores = baseline.forward(&index_window(8, 16), 3).unwrap();
        for row in &scores.scores {
            assert!(row.iter().all(|&p| (p - 1.0 / 16.0).abs() < 1e-12));
        }
    }

    #[test]
    fn modality_mismatch_is_an_error() {
        let vision = VisionTracker::new(8, 8, 8, 0);
        assert!(matches!(
            vision.forward(&index_window(4, 8), 2),
            Err(TrackerError::ModalityMismatch { .. })
        ));
        let baseline = BaselineTracker::new(8, 8, 8, 0);
        assert!(matches!(
            baseline.forward(&bbox_window(4), 2),
            Err(TrackerError::ModalityMismatch { .. })
        ));
    }

    #[test]
    fn baseline_rejects_out_of_range_index() {
        let baseline = BaselineTracker::new(8, 8, 8, 0);
        let obs = Observation::BeamIndices(vec![0, 3, 8]);
        assert!(matches!(
            baseline.forward(&obs, 2),
            Err(TrackerError::BeamIndexOutOfRange { index: 8, .. })
        ));
    }

    #[test]
    fn observation_order_changes_the_output() {
        let model = VisionTracker::with_defaults(64, 7);
        let forward_obs = bbox_window(8);
        let Observation::Bboxes(mut boxes) = forward_obs.clone() else {
            unreachable!()
        };
        boxes.swap(0, 7);
        let swapped = Observation::Bboxes(boxes);
        let a = model.forward(&forward_obs, 3).unwrap();
        let b = model.forward(&swapped, 3).unwrap();
        let max_diff: f64 = a
            .scores
            .iter()
            .flatten()
            .zip(b.scores.iter().flatten())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        assert!(max_diff > 1e-9, "sequence order had no effect");
    }

    // ── top-k selection ─────────────────────────────────────────────────

    #[test]
    fn topk_one_hot_and_tie_breaking() {
        let mut row = vec![0.0; 32];
        row[17] = 1.0;
        let scores = ScoreSequence { scores: vec![row] };
        assert_eq!(predict_topk(&scores, 1).unwrap(), vec![vec![17]]);

        let uniform = ScoreSequence {
            scores: vec![vec![1.0 / 8.0; 8]],
        };
        assert_eq!(predict_topk(&uniform, 3).unwrap(), vec![vec![0, 1, 2]]);

        let scores = ScoreSequence {
            scores: vec![vec![0.1, 0.4, 0.3, 0.2]],
        };
        assert_eq!(predict_topk(&scores, 2).unwrap(), vec![vec![1, 2]]);
    }

    #[test]
    fn topk_full_codebook_is_a_permutation() {
        let model = VisionTracker::new(16, 8, 8, 21);
        let scores = model.forward(&bbox_window(8), 2).unwrap();
        let topk = predict_topk(&scores, 16).unwrap();
        for step in topk {
            let mut sorted = step.clone();
            sorted.sort_unstable();
            assert_eq!(sorted, (0..16).collect::<Vec<_>>());
        }
    }

    #[test]
    fn topk_k_out_of_range() {
        let scores = ScoreSequence {
            scores: vec![vec![0.5, 0.5]],
        };
        assert!(predict_topk(&scores, 0).is_err());
        assert!(predict_topk(&scores, 3).is_err());
    }

    // ── gradients ───────────────────────────────────────────────────────

    #[test]
    fn vision_full_model_gradient_matches_finite_differences() {
        let mut model = VisionTracker::new(8, 8, 8, 5);
        let obs = bbox_window(3);
        let targets = vec![2, 6];
        model.zero_grad();
        model.accumulate_gradients(&obs, &targets).unwrap();
        let err = finite_difference_check(
            &mut model,
            |m| m.parameters_mut(),
            |m| {
                let scores = m.forward(&obs, 2).unwrap();
                check_loss(&scores.scores, &targets)
            },
            1e-4,
        );
        assert!(err < 1e-3, "relative error {err}");
    }

    #[test]
    fn baseline_full_model_gradient_matches_finite_differences() {
        let mut model = BaselineTracker::new(8, 8, 8, 6);
        let obs = Observation::BeamIndices(vec![1, 3, 3]);
        let targets = vec![4, 4];
        model.zero_grad();
        model.accumulate_gradients(&obs, &targets).unwrap();
        let err = finite_difference_check(
            &mut model,
            |m| m.parameters_mut(),
            |m| {
                let scores = m.forward(&obs, 2).unwrap();
                check_loss(&scores.scores, &targets)
            },
            1e-4,
        );
        assert!(err < 1e-3, "relative error {err}");
    }

    // ── checkpoints ─────────────────────────────────────────────────────

    #[test]
    fn checkpoint_round_trip_is_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vision.ckpt");
        let mut model = VisionTracker::new(16, 8, 8, 9);
        model.save(&path).unwrap();
        let loaded = VisionTracker::load(&path).unwrap();
        let obs = bbox_window(8);
        let a = model.forward(&obs, 5).unwrap();
        let b = loaded.forward(&obs, 5).unwrap();
        for (ra, rb) in a.scores.iter().zip(&b.scores) {
            let bits_a: Vec<u64> = ra.iter().map(|v| v.to_bits()).collect();
            let bits_b: Vec<u64> = rb.iter().map(|v| v.to_bits()).collect();
            assert_eq!(bits_a, bits_b);
        }
    }

    #[test]
    fn loading_vision_checkpoint_into_baseline_fails() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vision.ckpt");
        VisionTracker::new(16, 8, 8, 9).save(&path).unwrap();
        assert!(matches!(
            BaselineTracker::load(&path),
            Err(TrackerError::Checkpoint(_))
        ));
        // The kind-dispatching loader picks the right variant.
        match AnyTracker::load(&path).unwrap() {
            AnyTracker::Vision(_) => {}
            AnyTracker::Baseline(_) => panic!("wrong variant"),
        }
    }
}
