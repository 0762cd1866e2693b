//! Data model, sliding-window sampling, leakage-free splits, and JSONL I/O.
//!
//! The on-disk format is one JSON object per line:
//!
//! ```text
//! {"sequence_id": "seq-00000", "steps": [{"bbox": [x, y, w, h], "powers": [...], "beam": 0}, ...]}
//! ```
//!
//! `powers` may be omitted for ingested real-measurement records where only
//! the optimal beam is known; such datasets are "labels-only" and cannot be
//! used for receive-power evaluation. A `.gz` extension selects gzip
//! compression on both read and write. Beam indices are 0-based internally;
//! 1-based records (the usual convention of measurement exports) are shifted
//! on read when [`IndexBase::One`] is selected.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::physics::{optimal_beam_index, BeamPowerProfile};
use crate::scene::BoundingBox;

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("dataset io: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: parse error: {message}")]
    Parse { line: usize, message: String },
    #[error("sequence '{sequence_id}' step {step}: {message}")]
    Integrity {
        sequence_id: String,
        step: usize,
        message: String,
    },
    #[error("dataset invalid: {0}")]
    Invalid(String),
    #[error("serialize: {0}")]
    Serialize(#[from] serde_json::Error),
}

/// One aligned time step: what the camera saw, what the beam sweep measured,
/// and which beam won.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceStep {
    pub bbox: BoundingBox,
    /// `None` for labels-only records ingested from real measurements.
    pub profile: Option<BeamPowerProfile>,
    pub optimal_index: usize,
}

/// One full vehicle pass.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSequence {
    pub sequence_id: String,
    pub steps: Vec<SequenceStep>,
}

/// A fixed-length window cut from a single sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSample {
    pub source_sequence: String,
    pub steps: Vec<SequenceStep>,
}

/// Default sliding-window length.
pub const DEFAULT_WINDOW: usize = 13;
/// Default observation window fed to the encoder.
pub const DEFAULT_OBSERVATION: usize = 8;
/// Default prediction horizon produced by the decoder.
pub const DEFAULT_HORIZON: usize = 5;

/// Sequence-level split fractions. The fraction left after train/val is held
/// out as a test split.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub val_fraction: f64,
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_fraction: 0.7,
            val_fraction: 0.2,
            test_fraction: 0.1,
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<(), DataError> {
        let fractions = [self.train_fraction, self.val_fraction, self.test_fraction];
        if fractions.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return Err(DataError::Invalid(
                "split fractions must lie in [0, 1]".into(),
            ));
        }
        let sum: f64 = fractions.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(DataError::Invalid(format!(
                "split fractions must sum to 1, got {sum}"
            )));
        }
        Ok(())
    }
}

/// Sequence ids assigned to each split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitSets {
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
}

/// Input modality of a tracker model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Vision,
    Baseline,
}

impl std::fmt::Display for Modality {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Modality::Vision => write!(f, "vision"),
            Modality::Baseline => write!(f, "baseline"),
        }
    }
}

/// Observation window in the form a model consumes.
#[derive(Debug, Clone, PartialEq)]
pub enum Observation {
    Bboxes(Vec<[f64; 4]>),
    BeamIndices(Vec<usize>),
}

impl Observation {
    pub fn len(&self) -> usize {
        match self {
            Observation::Bboxes(v) => v.len(),
            Observation::BeamIndices(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Observation plus the future beam indices a model must predict.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelInput {
    pub observation: Observation,
    pub targets: Vec<usize>,
}

/// Cut `seq` into overlapping windows. Sequences shorter than the window
/// yield no samples.
pub fn sliding_window(seq: &DataSequence, window: usize, stride: usize) -> Vec<DataSample> {
    assert!(window >= 1, "window must be at least 1");
    assert!(stride >= 1, "stride must be at least 1");
    if seq.steps.len() < window {
        return Vec::new();
    }
    (0..=seq.steps.len() - window)
        .step_by(stride)
        .map(|start| DataSample {
            source_sequence: seq.sequence_id.clone(),
            steps: seq.steps[start..start + window].to_vec(),
        })
        .collect()
}

/// Partition sequences into train/val/test by id, so no window ever crosses
/// splits. Deterministic given the seed and invariant to input order; val and
/// test sizes are rounded, train takes the remainder.
pub fn split_by_sequence(seqs: &[DataSequence], spec: &SplitSpec) -> Result<SplitSets, DataError> {
    spec.validate()?;
    if seqs.is_empty() {
        return Err(DataError::Invalid("cannot split an empty dataset".into()));
    }
    let mut ids: Vec<String> = seqs.iter().map(|s| s.sequence_id.clone()).collect();
    ids.sort_unstable();
    if ids.windows(2).any(|w| w[0] == w[1]) {
        return Err(DataError::Invalid("duplicate sequence_id".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    ids.shuffle(&mut rng);

    let n = ids.len();
    let n_val = ((spec.val_fraction * n as f64).round() as usize).min(n);
    let n_test = ((spec.test_fraction * n as f64).round() as usize).min(n - n_val);
    let n_train = n - n_val - n_test;

    let train = ids[..n_train].to_vec();
    let val = ids[n_train..n_train + n_val].to_vec();
    let test = ids[n_train + n_val..].to_vec();
    Ok(SplitSets { train, val, test })
}

/// Select the sequences whose ids are in `ids`, preserving dataset order.
pub fn select_sequences<'a>(seqs: &'a [DataSequence], ids: &[String]) -> Vec<&'a DataSequence> {
    seqs.iter()
        .filter(|s| ids.contains(&s.sequence_id))
        .collect()
}

/// Build the encoder observation and decoder targets from one sample.
pub fn make_model_input(
    sample: &DataSample,
    observation_len: usize,
    horizon: usize,
    modality: Modality,
) -> Result<ModelInput, DataError> {
    if observation_len == 0 || horizon == 0 {
        return Err(DataError::Invalid(
            "observation window and horizon must be at least 1".into(),
        ));
    }
    if observation_len + horizon > sample.steps.len() {
        return Err(DataError::Invalid(format!(
            "observation {} + horizon {} exceeds window {}",
            observation_len,
            horizon,
            sample.steps.len()
        )));
    }
    let observation = match modality {
        Modality::Vision => Observation::Bboxes(
            sample.steps[..observation_len]
                .iter()
                .map(|s| s.bbox.as_array())
                .collect(),
        ),
        Modality::Baseline => Observation::BeamIndices(
            sample.steps[..observation_len]
                .iter()
                .map(|s| s.optimal_index)
                .collect(),
        ),
    };
    let targets = sample.steps[observation_len..observation_len + horizon]
        .iter()
        .map(|s| s.optimal_index)
        .collect();
    Ok(ModelInput {
        observation,
        targets,
    })
}

/// True when any step lacks a power profile, making receive-power metrics
/// unavailable.
pub fn is_labels_only(seqs: &[DataSequence]) -> bool {
    seqs.iter()
        .flat_map(|s| &s.steps)
        .any(|step| step.profile.is_none())
}

/// Codebook size of the dataset, from the first stored profile.
pub fn profile_num_beams(seqs: &[DataSequence]) -> Option<usize> {
    seqs.iter()
        .flat_map(|s| &s.steps)
        .find_map(|step| step.profile.as_ref().map(BeamPowerProfile::len))
}

/// Beam-index convention of a JSONL file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IndexBase {
    /// Internal convention; round-trips untouched.
    Zero,
    /// Convention of typical measurement exports; shifted down on read.
    One,
}

#[derive(Serialize, Deserialize)]
struct StepRecord {
    bbox: [f64; 4],
    #[serde(skip_serializing_if = "Option::is_none")]
    powers: Option<Vec<f64>>,
    beam: i64,
}

#[derive(Serialize, Deserialize)]
struct SequenceRecord {
    sequence_id: String,
    steps: Vec<StepRecord>,
}

/// Write sequences as JSONL (gzip when the path ends in `.gz`).
pub fn write_jsonl(path: &Path, seqs: &[DataSequence]) -> Result<(), DataError> {
    let file = File::create(path)?;
    let mut writer: Box<dyn Write> = if is_gz(path) {
        Box::new(BufWriter::new(flate2::write::GzEncoder::new(
            file,
            flate2::Compression::default(),
        )))
    } else {
        Box::new(BufWriter::new(file))
    };
    for seq in seqs {
        let record = SequenceRecord {
            sequence_id: seq.sequence_id.clone(),
            steps: seq
                .steps
                .iter()
                .map(|s| StepRecord {
                    bbox: s.bbox.as_array(),
                    powers: s.profile.as_ref().map(|p| p.powers.clone()),
                    beam: s.optimal_index as i64,
                })
                .collect(),
        };
        serde_json::to_writer(&mut writer, &record)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

/// Read a JSONL dataset using the internal 0-based beam convention.
pub fn read_jsonl(path: &Path) -> Result<Vec<DataSequence>, DataError> {
    read_jsonl_with(path, IndexBase::Zero)
}

/// Read a JSONL dataset, shifting 1-based beam indices when asked. Validates
/// every invariant: bbox ranges, non-negative powers, one codebook size for
/// the whole file, argmax consistency, unique sequence ids.
pub fn read_jsonl_with(path: &Path, base: IndexBase) -> Result<Vec<DataSequence>, DataError> {
    let file = File::open(path)?;
    let reader: Box<dyn BufRead> = if is_gz(path) {
        Box::new(BufReader::new(flate2::read::GzDecoder::new(file)))
    } else {
        Box::new(BufReader::new(file))
    };

    let mut seqs = Vec::new();
    let mut num_beams: Option<usize> = None;
    for (line_idx, line) in reader.lines().enumerate() {
        let line_no = line_idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: SequenceRecord =
            serde_json::from_str(&line).map_err(|e| DataError::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
        let seq = validate_record(record, base, &mut num_beams)?;
        if seqs
            .iter()
            .any(|s: &DataSequence| s.sequence_id == seq.sequence_id)
        {
            return Err(DataError::Invalid(format!(
                "duplicate sequence_id '{}'",
                seq.sequence_id
            )));
        }
        seqs.push(seq);
    }
    Ok(seqs)
}

fn validate_record(
    record: SequenceRecord,
    base: IndexBase,
    num_beams: &mut Option<usize>,
) -> Result<DataSequence, DataError> {
    let integrity = |step: usize, message: String| DataError::Integrity {
        sequence_id: record.sequence_id.clone(),
        step,
        message,
    };
    let mut steps = Vec::with_capacity(record.steps.len());
    for (i, step) in record.steps.iter().enumerate() {
        let bbox = BoundingBox::from_array(step.bbox);
        bbox.validate()
            .map_err(|e| integrity(i, e.to_string()))?;
        let raw = step.beam;
        let optimal_index = match base {
            IndexBase::Zero => usize::try_from(raw)
                .map_err(|_| integrity(i, format!("beam index {raw} is negative")))?,
            IndexBase::One => {
                if raw < 1 {
                    return Err(integrity(
                        i,
                        format!("beam index {raw} invalid for 1-based data"),
                    ));
                }
                (raw - 1) as usize
            }
        };
        let profile = match &step.powers {
            None => None,
            Some(powers) => {
                if powers.iter().any(|p| !p.is_finite() || *p < 0.0) {
                    return Err(integrity(i, "powers must be finite and non-negative".into()));
                }
                match num_beams {
                    None => *num_beams = Some(powers.len()),
                    Some(n) if *n != powers.len() => {
                        return Err(integrity(
                            i,
                            format!("profile length {} differs from {}", powers.len(), n),
                        ));
                    }
                    Some(_) => {}
                }
                let profile = BeamPowerProfile {
                    powers: powers.clone(),
                };
                let argmax = optimal_beam_index(&profile)
                    .map_err(|e| integrity(i, e.to_string()))?;
                if argmax != optimal_index {
                    return Err(integrity(
                        i,
                        format!("stored beam {optimal_index} but profile argmax is {argmax}"),
                    ));
                }
                Some(profile)
            }
        };
        steps.push(SequenceStep {
            bbox,
            profile,
            optimal_index,
        });
    }
    Ok(DataSequence {
        sequence_id: record.sequence_id,
        steps,
    })
}

fn is_gz(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "gz")
}
