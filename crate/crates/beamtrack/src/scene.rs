//! Synthetic drive-by scenes: a vehicle passes a roadside base station, a
//! co-located pinhole camera yields normalized bounding boxes, and the array
//! physics yields per-step beam power profiles.
//!
//! World frame: `x` along the road (direction of travel), `y` depth away from
//! the base station, `z` up. The camera is installed at the array position
//! and shares its yaw.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{DataSequence, SequenceStep};
use crate::physics::{
    beam_power_profile, optimal_beam_index, perturb_power_profile, upa_steering_vector,
    ArrayGeometry, Codebook, PhysicsError, SignalConfig,
};

#[derive(Debug, thiserror::Error)]
pub enum SceneError {
    #[error("invalid scene configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid camera model: {0}")]
    InvalidCamera(String),
    #[error("trajectory never enters the camera field of view")]
    NeverInView,
    #[error("vehicle leaves the camera field of view mid-sequence")]
    LeavesViewMidSequence,
    #[error(transparent)]
    Physics(#[from] PhysicsError),
}

/// Pinhole camera co-located with the base station array.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraModel {
    /// Focal length in pixels.
    pub focal_length: f64,
    pub image_width: f64,
    pub image_height: f64,
    /// World position in meters (also the array position).
    pub position: [f64; 3],
    /// Rotation about world z; 0 faces +y.
    pub yaw: f64,
    /// Tilt of the optical axis; positive looks up.
    pub pitch: f64,
}

impl Default for CameraModel {
    /// 90 degree horizontal field of view on a 16:9 frame, mounted 2 m up.
    fn default() -> Self {
        Self {
            focal_length: 640.0,
            image_width: 1280.0,
            image_height: 720.0,
            position: [0.0, 0.0, 2.0],
            yaw: 0.0,
            pitch: 0.0,
        }
    }
}

impl CameraModel {
    pub fn validate(&self) -> Result<(), SceneError> {
        if !(self.focal_length > 0.0) {
            return Err(SceneError::InvalidCamera(
                "focal_length must be positive".into(),
            ));
        }
        if !(self.image_width > 0.0) || !(self.image_height > 0.0) {
            return Err(SceneError::InvalidCamera(
                "image dimensions must be positive".into(),
            ));
        }
        Ok(())
    }

    fn right(&self) -> [f64; 3] {
        [self.yaw.cos(), -self.yaw.sin(), 0.0]
    }

    fn forward(&self) -> [f64; 3] {
        [
            self.yaw.sin() * self.pitch.cos(),
            self.yaw.cos() * self.pitch.cos(),
            self.pitch.sin(),
        ]
    }

    fn down(&self) -> [f64; 3] {
        cross(self.forward(), self.right())
    }
}

/// Normalized detection box: center, width, and height as fractions of the
/// image dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x_center: f64,
    pub y_center: f64,
    pub width: f64,
    pub height: f64,
}

impl BoundingBox {
    pub fn validate(&self) -> Result<(), SceneError> {
        let fields = [self.x_center, self.y_center, self.width, self.height];
        if fields.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return Err(SceneError::InvalidConfig(format!(
                "bounding box fields outside [0,1]: {self:?}"
            )));
        }
        if !(self.width > 0.0) || !(self.height > 0.0) {
            return Err(SceneError::InvalidConfig(format!(
                "bounding box must have positive extent: {self:?}"
            )));
        }
        Ok(())
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.x_center, self.y_center, self.width, self.height]
    }

    pub fn from_array(v: [f64; 4]) -> Self {
        Self {
            x_center: v[0],
            y_center: v[1],
            width: v[2],
            height: v[3],
        }
    }
}

/// Time-ordered vehicle positions.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub positions: Vec<[f64; 3]>,
    pub timestamps: Vec<f64>,
}

/// Scenario parameters for the synthetic drive-by generator.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    /// Vehicle box dimensions in meters: along-road, across-road, height.
    pub vehicle_extent: [f64; 3],
    /// Lateral offset of the vehicle path from the base station, meters.
    pub path_distance: f64,
    /// Uniform speed interval in m/s; one speed is drawn per sequence.
    pub speed_range: [f64; 2],
    /// Capture rate in Hz.
    pub frame_rate: f64,
    /// Std of additive noise on normalized bounding-box fields.
    pub bbox_noise_std: f64,
    pub num_sequences: usize,
    pub rng_seed: u64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            vehicle_extent: [4.5, 1.9, 1.6],
            path_distance: 10.0,
            speed_range: [8.0, 16.0],
            frame_rate: 12.0,
            bbox_noise_std: 0.0,
            num_sequences: 100,
            rng_seed: 0,
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<(), SceneError> {
        if self.vehicle_extent.iter().any(|&e| !(e > 0.0)) {
            return Err(SceneError::InvalidConfig(
                "vehicle_extent components must be positive".into(),
            ));
        }
        if !(self.path_distance > 0.0) {
            return Err(SceneError::InvalidConfig(
                "path_distance must be positive".into(),
            ));
        }
        let [lo, hi] = self.speed_range;
        if !(lo > 0.0) || !(hi >= lo) {
            return Err(SceneError::InvalidConfig(format!(
                "degenerate speed_range [{lo}, {hi}]"
            )));
        }
        if !(self.frame_rate > 0.0) {
            return Err(SceneError::InvalidConfig(
                "frame_rate must be positive".into(),
            ));
        }
        if self.bbox_noise_std < 0.0 {
            return Err(SceneError::InvalidConfig(
                "bbox_noise_std must be non-negative".into(),
            ));
        }
        if self.num_sequences == 0 {
            return Err(SceneError::InvalidConfig(
                "num_sequences must be at least 1".into(),
            ));
        }
        Ok(())
    }

    /// Path endpoints: the vehicle starts and ends well outside a 90 degree
    /// field of view so sequences are trimmed on both sides.
    fn path_half_span(&self) -> f64 {
        2.0 * self.path_distance + self.vehicle_extent[0]
    }
}

// Distinct stream salts for the per-sequence rngs.
const SPEED_SALT: u64 = 0x5eed_0001;
const BBOX_SALT: u64 = 0x5eed_0002;
const POWER_SALT: u64 = 0x5eed_0003;

/// SplitMix64-style seed mixer for deriving independent substreams.
pub(crate) fn mix_seed(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Straight constant-speed drive past the base station, sampled at the frame
/// rate. The speed is drawn uniformly from `speed_range` per sequence.
pub fn sample_trajectory(cfg: &SceneConfig, sequence_seed: u64) -> Result<Trajectory, SceneError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(mix_seed(cfg.rng_seed, sequence_seed), SPEED_SALT));
    let [lo, hi] = cfg.speed_range;
    let speed = rng.gen_range(lo..=hi);

    let half_span = cfg.path_half_span();
    let step = speed / cfg.frame_rate;
    let num_steps = (2.0 * half_span / step).floor() as usize + 1;
    let z = cfg.vehicle_extent[2] / 2.0;
    let mut positions = Vec::with_capacity(num_steps);
    let mut timestamps = Vec::with_capacity(num_steps);
    for k in 0..num_steps {
        positions.push([-half_span + k as f64 * step, cfg.path_distance, z]);
        timestamps.push(k as f64 / cfg.frame_rate);
    }
    Ok(Trajectory {
        positions,
        timestamps,
    })
}

const NEAR_PLANE: f64 = 1e-2;

/// Project the vehicle's eight box corners and return the normalized
/// axis-aligned hull clipped to the frame, or `None` when the vehicle is
/// behind the camera or fully outside the frame.
pub fn project_bbox(
    camera: &CameraModel,
    position: [f64; 3],
    extent: [f64; 3],
) -> Option<BoundingBox> {
    let right = camera.right();
    let down = camera.down();
    let forward = camera.forward();

    let mut u_min = f64::INFINITY;
    let mut u_max = f64::NEG_INFINITY;
    let mut v_min = f64::INFINITY;
    let mut v_max = f64::NEG_INFINITY;
    for dx in [-0.5, 0.5] {
        for dy in [-0.5, 0.5] {
            for dz in [-0.5, 0.5] {
                let corner = [
                    position[0] + dx * extent[0] - camera.position[0],
                    position[1] + dy * extent[1] - camera.position[1],
                    position[2] + dz * extent[2] - camera.position[2],
                ];
                let depth = dot3(corner, forward);
                if depth <= NEAR_PLANE {
                    return None;
                }
                let u = camera.focal_length * dot3(corner, right) / depth
                    + camera.image_width / 2.0;
                let v = camera.focal_length * dot3(corner, down) / depth
                    + camera.image_height / 2.0;
                u_min = u_min.min(u);
                u_max = u_max.max(u);
                v_min = v_min.min(v);
                v_max = v_max.max(v);
            }
        }
    }

    let x0 = (u_min / camera.image_width).max(0.0);
    let x1 = (u_max / camera.image_width).min(1.0);
    let y0 = (v_min / camera.image_height).max(0.0);
    let y1 = (v_max / camera.image_height).min(1.0);
    if x1 <= x0 || y1 <= y0 {
        return None;
    }
    Some(BoundingBox {
        x_center: (x0 + x1) / 2.0,
        y_center: (y0 + y1) / 2.0,
        width: x1 - x0,
        height: y1 - y0,
    })
}

/// Additive Gaussian jitter on all four fields, clipped back to valid ranges.
/// Deterministic given the seed.
pub fn apply_bbox_noise(b: &BoundingBox, std: f64, seed: u64) -> BoundingBox {
    if std == 0.0 {
        return *b;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, std).expect("finite non-negative std");
    let mut draw = || normal.sample(&mut rng);
    const MIN_EXTENT: f64 = 1e-6;
    BoundingBox {
        x_center: (b.x_center + draw()).clamp(0.0, 1.0),
        y_center: (b.y_center + draw()).clamp(0.0, 1.0),
        width: (b.width + draw()).clamp(MIN_EXTENT, 1.0),
        height: (b.height + draw()).clamp(MIN_EXTENT, 1.0),
    }
}

/// Azimuth/elevation of a world point in the array frame (yaw-aligned with
/// the camera, not pitched), plus the distance.
fn bearing(camera: &CameraModel, point: [f64; 3]) -> (f64, f64, f64) {
    let d = [
        point[0] - camera.position[0],
        point[1] - camera.position[1],
        point[2] - camera.position[2],
    ];
    let right = [camera.yaw.cos(), -camera.yaw.sin(), 0.0];
    let forward = [camera.yaw.sin(), camera.yaw.cos(), 0.0];
    let x = dot3(d, right);
    let y = dot3(d, forward);
    let horiz = (x * x + y * y).sqrt();
    let azimuth = x.atan2(y);
    let elevation = d[2].atan2(horiz);
    let distance = (horiz * horiz + d[2] * d[2]).sqrt();
    (azimuth, elevation, distance)
}

/// Generate one aligned sequence of (noisy bounding box, noisy beam power
/// profile, optimal beam index) steps. Out-of-view steps are trimmed from the
/// ends; the stored index is always the argmax of the stored profile.
pub fn synthesize_sequence(
    cfg: &SceneConfig,
    camera: &CameraModel,
    geometry: &ArrayGeometry,
    codebook: &Codebook,
    signal_cfg: &SignalConfig,
    sequence_seed: u64,
) -> Result<DataSequence, SceneError> {
    cfg.validate()?;
    camera.validate()?;
    signal_cfg.validate()?;
    let trajectory = sample_trajectory(cfg, sequence_seed)?;
    let seq_seed = mix_seed(cfg.rng_seed, sequence_seed);

    let mut steps: Vec<Option<SequenceStep>> = Vec::with_capacity(trajectory.positions.len());
    for (k, &position) in trajectory.positions.iter().enumerate() {
        let Some(bbox) = project_bbox(camera, position, cfg.vehicle_extent) else {
            steps.push(None);
            continue;
        };
        let (azimuth, elevation, distance) = bearing(camera, position);
        let gain = 1.0 / distance;
        let response = upa_steering_vector(geometry, azimuth, elevation)?;
        let channel = response.scale(num_complex::Complex64::new(gain, 0.0));
        let clean = beam_power_profile(&channel, codebook)?;
        let profile = perturb_power_profile(
            &clean,
            signal_cfg,
            mix_seed(mix_seed(seq_seed, POWER_SALT), k as u64),
        );
        let optimal_index = optimal_beam_index(&profile)?;
        let noisy_bbox = apply_bbox_noise(
            &bbox,
            cfg.bbox_noise_std,
            mix_seed(mix_seed(seq_seed, BBOX_SALT), k as u64),
        );
        steps.push(Some(SequenceStep {
            bbox: noisy_bbox,
            profile: Some(profile),
            optimal_index,
        }));
    }

    let first = steps.iter().position(Option::is_some);
    let last = steps.iter().rposition(Option::is_some);
    let (Some(first), Some(last)) = (first, last) else {
        return Err(SceneError::NeverInView);
    };
    let kept: Vec<SequenceStep> = steps[first..=last]
        .iter()
        .cloned()
        .map(|s| s.ok_or(SceneError::LeavesViewMidSequence))
        .collect::<Result<_, _>>()?;

    Ok(DataSequence {
        sequence_id: format!("seq-{sequence_seed:05}"),
        steps: kept,
    })
}

/// All sequences of a scenario, with sequence seeds `0..num_sequences`.
pub fn generate_dataset(
    cfg: &SceneConfig,
    camera: &CameraModel,
    geometry: &ArrayGeometry,
    codebook: &Codebook,
    signal_cfg: &SignalConfig,
) -> Result<Vec<DataSequence>, SceneError> {
    (0..cfg.num_sequences as u64)
        .map(|s| synthesize_sequence(cfg, camera, geometry, codebook, signal_cfg, s))
        .collect()
}

fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}
