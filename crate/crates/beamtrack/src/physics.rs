//! Array-response, codebook, channel, and receive-power numerics.
//!
//! A base station carries a uniform planar array and selects transmit beams
//! from a fixed codebook; the quantities here are the receive powers
//! `|h^H f|^2` swept over that codebook and the index of the strongest beam.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum PhysicsError {
    #[error("angle out of the front hemisphere: azimuth {azimuth}, elevation {elevation}")]
    OutOfHemisphere { azimuth: f64, elevation: f64 },
    #[error("invalid array geometry: {0}")]
    InvalidGeometry(String),
    #[error("invalid codebook configuration: {0}")]
    InvalidCodebook(String),
    #[error("dimension mismatch: {context} (left {left}, right {right})")]
    DimensionMismatch {
        context: &'static str,
        left: usize,
        right: usize,
    },
    #[error("empty beam power profile")]
    EmptyProfile,
    #[error("invalid signal configuration: {0}")]
    InvalidSignalConfig(String),
}

/// Rectangular antenna array: `elements_horizontal x elements_vertical`
/// elements spaced `element_spacing` wavelengths apart on both axes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrayGeometry {
    pub elements_horizontal: usize,
    pub elements_vertical: usize,
    pub element_spacing: f64,
}

impl ArrayGeometry {
    pub fn new(
        elements_horizontal: usize,
        elements_vertical: usize,
        element_spacing: f64,
    ) -> Result<Self, PhysicsError> {
        let geo = Self {
            elements_horizontal,
            elements_vertical,
            element_spacing,
        };
        geo.validate()?;
        Ok(geo)
    }

    /// 8x8 half-wavelength array.
    pub fn square_upa_64() -> Self {
        Self {
            elements_horizontal: 8,
            elements_vertical: 8,
            element_spacing: 0.5,
        }
    }

    pub fn validate(&self) -> Result<(), PhysicsError> {
        if self.elements_horizontal == 0 || self.elements_vertical == 0 {
            return Err(PhysicsError::InvalidGeometry(
                "element counts must be at least 1".into(),
            ));
        }
        if !(self.element_spacing > 0.0) || !self.element_spacing.is_finite() {
            return Err(PhysicsError::InvalidGeometry(format!(
                "element spacing must be positive, got {}",
                self.element_spacing
            )));
        }
        Ok(())
    }

    pub fn num_elements(&self) -> usize {
        self.elements_horizontal * self.elements_vertical
    }
}

/// Complex channel between the array and a single-antenna user.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelVector {
    pub coefficients: Vec<Complex64>,
}

impl ChannelVector {
    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.coefficients
            .iter()
            .map(|c| c.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        Self {
            coefficients: self.coefficients.iter().map(|c| c * factor).collect(),
        }
    }
}

/// Azimuth sector covered by a codebook, in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleSector {
    pub min: f64,
    pub max: f64,
}

impl AngleSector {
    pub fn new(min: f64, max: f64) -> Result<Self, PhysicsError> {
        if !(min < max) {
            return Err(PhysicsError::InvalidCodebook(format!(
                "empty sector [{min}, {max}]"
            )));
        }
        if min < -PI / 2.0 || max > PI / 2.0 {
            return Err(PhysicsError::InvalidCodebook(format!(
                "sector [{min}, {max}] exceeds the front hemisphere"
            )));
        }
        Ok(Self { min, max })
    }

    /// Default ±60 degree sector.
    pub fn default_sector() -> Self {
        let half = 60.0_f64.to_radians();
        Self {
            min: -half,
            max: half,
        }
    }
}

/// Fixed set of unit-norm transmit beams plus their steering angles.
#[derive(Debug, Clone)]
pub struct Codebook {
    beams: Vec<Vec<Complex64>>,
    steering_angles: Vec<f64>,
    geometry: ArrayGeometry,
}

impl Codebook {
    pub fn num_beams(&self) -> usize {
        self.beams.len()
    }

    pub fn beam(&self, index: usize) -> &[Complex64] {
        &self.beams[index]
    }

    pub fn steering_angles(&self) -> &[f64] {
        &self.steering_angles
    }

    pub fn geometry(&self) -> &ArrayGeometry {
        &self.geometry
    }

    /// Index of the beam whose steering angle is closest to boresight (0 rad).
    pub fn boresight_beam(&self) -> usize {
        self.steering_angles
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| a.abs().partial_cmp(&b.abs()).unwrap())
            .map(|(i, _)| i)
            .unwrap_or(0)
    }
}

/// Transmit power, receive noise power, and the relative standard deviation of
/// the multiplicative noise applied to swept power measurements.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalConfig {
    pub transmit_power: f64,
    pub noise_power: f64,
    pub power_measurement_noise_std: f64,
}

impl Default for SignalConfig {
    fn default() -> Self {
        Self {
            transmit_power: 1.0,
            noise_power: 0.0,
            power_measurement_noise_std: 0.0,
        }
    }
}

impl SignalConfig {
    pub fn validate(&self) -> Result<(), PhysicsError> {
        if !(self.transmit_power > 0.0) {
            return Err(PhysicsError::InvalidSignalConfig(
                "transmit_power must be positive".into(),
            ));
        }
        if self.noise_power < 0.0 {
            return Err(PhysicsError::InvalidSignalConfig(
                "noise_power must be non-negative".into(),
            ));
        }
        if self.power_measurement_noise_std < 0.0 {
            return Err(PhysicsError::InvalidSignalConfig(
                "power_measurement_noise_std must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Relative receive power of every beam in a codebook, linear scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamPowerProfile {
    pub powers: Vec<f64>,
}

impl BeamPowerProfile {
    pub fn len(&self) -> usize {
        self.powers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.powers.is_empty()
    }
}

/// Array response at the given direction. Element `(m_h, m_v)` has phase
/// `2*pi*spacing*(m_h*sin(az)*cos(el) + m_v*sin(el))`; the vector's Euclidean
/// norm is `sqrt(N)`.
pub fn upa_steering_vector(
    geometry: &ArrayGeometry,
    azimuth: f64,
    elevation: f64,
) -> Result<ChannelVector, PhysicsError> {
    geometry.validate()?;
    if azimuth.abs() >= PI / 2.0 || elevation.abs() >= PI / 2.0 {
        return Err(PhysicsError::OutOfHemisphere { azimuth, elevation });
    }
    let u = azimuth.sin() * elevation.cos();
    let v = elevation.sin();
    let scale = 2.0 * PI * geometry.element_spacing;
    let mut coefficients = Vec::with_capacity(geometry.num_elements());
    for m_v in 0..geometry.elements_vertical {
        for m_h in 0..geometry.elements_horizontal {
            let phase = scale * (m_h as f64 * u + m_v as f64 * v);
            coefficients.push(Complex64::from_polar(1.0, phase));
        }
    }
    Ok(ChannelVector { coefficients })
}

/// Build a horizontal-only codebook: `num_beams` matched-filter beams whose
/// steering angles uniformly sample `sin(azimuth)` over the sector (cell
/// centers, so angles stay strictly inside the hemisphere). Requires
/// `num_beams = oversampling * elements_horizontal`.
pub fn build_codebook(
    geometry: &ArrayGeometry,
    num_beams: usize,
    oversampling: usize,
    sector: AngleSector,
) -> Result<Codebook, PhysicsError> {
    geometry.validate()?;
    if num_beams == 0 {
        return Err(PhysicsError::InvalidCodebook(
            "codebook must contain at least one beam".into(),
        ));
    }
    if oversampling == 0 || num_beams != oversampling * geometry.elements_horizontal {
        return Err(PhysicsError::InvalidCodebook(format!(
            "num_beams ({num_beams}) must equal oversampling ({oversampling}) x \
             elements_horizontal ({})",
            geometry.elements_horizontal
        )));
    }
    let sin_lo = sector.min.sin();
    let sin_hi = sector.max.sin();
    let cell = (sin_hi - sin_lo) / num_beams as f64;
    let norm = (geometry.num_elements() as f64).sqrt();
    let mut beams = Vec::with_capacity(num_beams);
    let mut steering_angles = Vec::with_capacity(num_beams);
    for m in 0..num_beams {
        let s = sin_lo + (m as f64 + 0.5) * cell;
        let angle = s.asin();
        let response = upa_steering_vector(geometry, angle, 0.0)?;
        beams.push(
            response
                .coefficients
                .into_iter()
                .map(|c| c / norm)
                .collect(),
        );
        steering_angles.push(angle);
    }
    Ok(Codebook {
        beams,
        steering_angles,
        geometry: *geometry,
    })
}

/// Codebook over the default ±60 degree sector with oversampling derived from
/// `num_beams / elements_horizontal`.
pub fn default_codebook(geometry: &ArrayGeometry, num_beams: usize) -> Result<Codebook, PhysicsError> {
    if num_beams == 0 || num_beams % geometry.elements_horizontal != 0 {
        return Err(PhysicsError::InvalidCodebook(format!(
            "num_beams ({num_beams}) must be a positive multiple of elements_horizontal ({})",
            geometry.elements_horizontal
        )));
    }
    build_codebook(
        geometry,
        num_beams,
        num_beams / geometry.elements_horizontal,
        AngleSector::default_sector(),
    )
}

/// `|h^H f|^2`.
pub fn receive_power(h: &ChannelVector, beam: &[Complex64]) -> Result<f64, PhysicsError> {
    if h.len() != beam.len() {
        return Err(PhysicsError::DimensionMismatch {
            context: "receive_power",
            left: h.len(),
            right: beam.len(),
        });
    }
    let inner: Complex64 = h
        .coefficients
        .iter()
        .zip(beam)
        .map(|(hi, fi)| hi.conj() * fi)
        .sum();
    Ok(inner.norm_sqr())
}

/// Receive power of every beam in the codebook (a full sweep).
pub fn beam_power_profile(h: &ChannelVector, cb: &Codebook) -> Result<BeamPowerProfile, PhysicsError> {
    let powers = cb
        .beams
        .iter()
        .map(|beam| receive_power(h, beam))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(BeamPowerProfile { powers })
}

/// Index of the strongest beam; ties break to the lowest index.
pub fn optimal_beam_index(profile: &BeamPowerProfile) -> Result<usize, PhysicsError> {
    if profile.is_empty() {
        return Err(PhysicsError::EmptyProfile);
    }
    let mut best = 0;
    for (i, &p) in profile.powers.iter().enumerate().skip(1) {
        if p > profile.powers[best] {
            best = i;
        }
    }
    Ok(best)
}

/// Multiplicative measurement noise: each entry becomes
/// `p * max(0, 1 + eps)` with `eps ~ N(0, std)`. Deterministic given the seed.
pub fn perturb_power_profile(
    profile: &BeamPowerProfile,
    cfg: &SignalConfig,
    rng_seed: u64,
) -> BeamPowerProfile {
    let std = cfg.power_measurement_noise_std;
    if std == 0.0 {
        return profile.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let normal = Normal::new(0.0, std).expect("finite non-negative std");
    let powers = profile
        .powers
        .iter()
        .map(|&p| p * (1.0 + normal.sample(&mut rng)).max(0.0))
        .collect();
    BeamPowerProfile { powers }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOL: f64 = 1e-9;

    fn upa_8x8() -> ArrayGeometry {
        ArrayGeometry::square_upa_64()
    }

    fn matched_beam(h: &ChannelVector) -> Vec<Complex64> {
        let norm = h.norm();
        h.coefficients.iter().map(|c| c / norm).collect()
    }

    // ── steering vectors ────────────────────────────────────────────────

    #[test]
    fn boresight_steering_is_all_ones() {
        let sv = upa_steering_vector(&upa_8x8(), 0.0, 0.0).unwrap();
        assert_eq!(sv.len(), 64);
        for c in &sv.coefficients {
            assert!((c.re - 1.0).abs() < TOL && c.im.abs() < TOL);
        }
        assert!((sv.norm() - 8.0).abs() < TOL);
    }

    #[test]
    fn negated_azimuth_conjugates_the_steering_vector() {
        let geo = upa_8x8();
        let plus = upa_steering_vector(&geo, 0.42, 0.0).unwrap();
        let minus = upa_steering_vector(&geo, -0.42, 0.0).unwrap();
        for (p, m) in plus.coefficients.iter().zip(&minus.coefficients) {
            assert!((p.conj() - m).norm() < TOL);
        }
    }

    #[test]
    fn four_element_row_phases_at_30_degrees() {
        // sin(pi/6) = 0.5 gives phases [0, pi/2, pi, 3pi/2].
        let geo = ArrayGeometry::new(4, 1, 0.5).unwrap();
        let sv = upa_steering_vector(&geo, PI / 6.0, 0.0).unwrap();
        let expected = [0.0, PI / 2.0, PI, 1.5 * PI];
        for (c, &phase) in sv.coefficients.iter().zip(&expected) {
            let want = Complex64::from_polar(1.0, phase);
            assert!((c - want).norm() < TOL, "{c} vs phase {phase}");
        }
        assert!((sv.norm() - 2.0).abs() < TOL);
    }

    #[test]
    fn out_of_hemisphere_angles_rejected() {
        let geo = upa_8x8();
        assert!(matches!(
            upa_steering_vector(&geo, PI / 2.0, 0.0),
            Err(PhysicsError::OutOfHemisphere { .. })
        ));
        assert!(upa_steering_vector(&geo, 0.0, -PI / 2.0).is_err());
        assert!(upa_steering_vector(&geo, 1.6, 0.0).is_err());
    }

    // ── codebooks ───────────────────────────────────────────────────────

    #[test]
    fn default_64_beam_codebook_rows_are_unit_norm() {
        let cb = default_codebook(&upa_8x8(), 64).unwrap();
        assert_eq!(cb.num_beams(), 64);
        for m in 0..64 {
            let norm: f64 = cb.beam(m).iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < TOL, "beam {m}: {norm}");
        }
        let angles = cb.steering_angles();
        assert!(angles.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn critically_sampled_beams_are_orthogonal() {
        // 8 beams over the full sine-space grid of an 8-column array.
        let geo = upa_8x8();
        let sector = AngleSector {
            min: -PI / 2.0,
            max: PI / 2.0,
        };
        let cb = build_codebook(&geo, 8, 1, sector).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                let inner: Complex64 = cb
                    .beam(i)
                    .iter()
                    .zip(cb.beam(j))
                    .map(|(a, b)| a.conj() * b)
                    .sum();
                if i == j {
                    assert!((inner.norm() - 1.0).abs() < TOL);
                } else {
                    assert!(inner.norm() < TOL, "beams {i},{j}: {}", inner.norm());
                }
            }
        }
    }

    #[test]
    fn oversampled_adjacent_beams_overlap_heavily() {
        let cb = default_codebook(&upa_8x8(), 64).unwrap();
        for i in 0..63 {
            let inner: Complex64 = cb
                .beam(i)
                .iter()
                .zip(cb.beam(i + 1))
                .map(|(a, b)| a.conj() * b)
                .sum();
            assert!(inner.norm() > 0.9, "beams {i},{}: {}", i + 1, inner.norm());
        }
    }

    #[test]
    fn codebook_size_must_match_oversampling() {
        let geo = upa_8x8();
        assert!(build_codebook(&geo, 60, 8, AngleSector::default_sector()).is_err());
        assert!(build_codebook(&geo, 64, 7, AngleSector::default_sector()).is_err());
        assert!(default_codebook(&geo, 0).is_err());
    }

    #[test]
    fn empty_sector_rejected() {
        assert!(AngleSector::new(0.3, 0.3).is_err());
        assert!(AngleSector::new(0.5, -0.5).is_err());
        assert!(AngleSector::new(-2.0, 0.0).is_err());
    }

    // ── receive power ───────────────────────────────────────────────────

    #[test]
    fn aligned_beam_attains_full_array_gain() {
        let geo = upa_8x8();
        let h = upa_steering_vector(&geo, 0.31, 0.07).unwrap();
        let f = matched_beam(&h);
        let p = receive_power(&h, &f).unwrap();
        assert!((p - 64.0).abs() < 1e-9, "{p}");
    }

    #[test]
    fn orthogonal_channel_gets_zero_power() {
        let h = ChannelVector {
            coefficients: vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
        };
        let f = vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)];
        assert_eq!(receive_power(&h, &f).unwrap(), 0.0);
    }

    #[test]
    fn off_beam_power_is_below_matched_beam_power() {
        let geo = upa_8x8();
        let cb = default_codebook(&geo, 64).unwrap();
        let h = upa_steering_vector(&geo, cb.steering_angles()[10], 0.0).unwrap();
        let aligned = receive_power(&h, cb.beam(10)).unwrap();
        let off = receive_power(&h, cb.beam(12)).unwrap();
        assert!(off < aligned, "{off} vs {aligned}");
        // Brute force: beam 10 is the global best.
        let profile = beam_power_profile(&h, &cb).unwrap();
        let best = profile
            .powers
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(best, aligned);
    }

    #[test]
    fn receive_power_scales_quadratically_and_ignores_global_phase() {
        let geo = upa_8x8();
        let h = upa_steering_vector(&geo, -0.2, 0.05).unwrap();
        let cb = default_codebook(&geo, 64).unwrap();
        let base = receive_power(&h, cb.beam(20)).unwrap();
        let doubled = receive_power(&h.scale(Complex64::new(2.0, 0.0)), cb.beam(20)).unwrap();
        assert!((doubled - 4.0 * base).abs() < 1e-9 * base.max(1.0));
        let rotated = receive_power(&h.scale(Complex64::from_polar(1.0, 1.234)), cb.beam(20)).unwrap();
        assert!((rotated - base).abs() < 1e-9 * base.max(1.0));
    }

    #[test]
    fn receive_power_rejects_length_mismatch() {
        let h = ChannelVector {
            coefficients: vec![Complex64::new(1.0, 0.0); 4],
        };
        let f = vec![Complex64::new(1.0, 0.0); 3];
        assert!(matches!(
            receive_power(&h, &f),
            Err(PhysicsError::DimensionMismatch { .. })
        ));
    }

    // ── profiles and argmax ─────────────────────────────────────────────

    #[test]
    fn profile_argmax_matches_aligned_beam_for_every_codebook_entry() {
        let geo = upa_8x8();
        let cb = default_codebook(&geo, 64).unwrap();
        for q in 0..64 {
            let h = upa_steering_vector(&geo, cb.steering_angles()[q], 0.0).unwrap();
            let profile = beam_power_profile(&h, &cb).unwrap();
            assert_eq!(optimal_beam_index(&profile).unwrap(), q);
        }
    }

    #[test]
    fn zero_channel_gives_zero_profile() {
        let geo = upa_8x8();
        let cb = default_codebook(&geo, 64).unwrap();
        let h = ChannelVector {
            coefficients: vec![Complex64::new(0.0, 0.0); 64],
        };
        let profile = beam_power_profile(&h, &cb).unwrap();
        assert!(profile.powers.iter().all(|&p| p == 0.0));
    }

    #[test]
    fn profile_scales_quadratically_with_channel() {
        let geo = upa_8x8();
        let cb = default_codebook(&geo, 64).unwrap();
        let h = upa_steering_vector(&geo, 0.17, 0.0).unwrap();
        let p1 = beam_power_profile(&h, &cb).unwrap();
        let p2 = beam_power_profile(&h.scale(Complex64::new(2.0, 0.0)), &cb).unwrap();
        for (a, b) in p1.powers.iter().zip(&p2.powers) {
            assert!((b - 4.0 * a).abs() < 1e-9 * a.max(1.0));
        }
    }

    #[test]
    fn argmax_takes_lowest_index_on_ties() {
        let p = BeamPowerProfile {
            powers: vec![1.0, 4.0, 2.5],
        };
        assert_eq!(optimal_beam_index(&p).unwrap(), 1);
        let flat = BeamPowerProfile {
            powers: vec![3.0; 5],
        };
        assert_eq!(optimal_beam_index(&flat).unwrap(), 0);
        let empty = BeamPowerProfile { powers: vec![] };
        assert!(matches!(
            optimal_beam_index(&empty),
            Err(PhysicsError::EmptyProfile)
        ));
    }

    #[test]
    fn argmax_invariant_to_positive_scaling() {
        let p = BeamPowerProfile {
            powers: vec![0.3, 0.9, 0.1, 0.9],
        };
        let scaled = BeamPowerProfile {
            powers: p.powers.iter().map(|x| x * 7.25).collect(),
        };
        assert_eq!(
            optimal_beam_index(&p).unwrap(),
            optimal_beam_index(&scaled).unwrap()
        );
    }

    // ── measurement noise ───────────────────────────────────────────────

    #[test]
    fn zero_noise_std_is_identity() {
        let p = BeamPowerProfile {
            powers: vec![0.5, 1.5, 9.0],
        };
        let cfg = SignalConfig::default();
        assert_eq!(perturb_power_profile(&p, &cfg, 3).powers, p.powers);
    }

    #[test]
    fn same_seed_same_noise() {
        let p = BeamPowerProfile {
            powers: vec![1.0; 16],
        };
        let cfg = SignalConfig {
            power_measurement_noise_std: 0.1,
            ..Default::default()
        };
        let a = perturb_power_profile(&p, &cfg, 77);
        let b = perturb_power_profile(&p, &cfg, 77);
        assert_eq!(a.powers, b.powers);
        let c = perturb_power_profile(&p, &cfg, 78);
        assert_ne!(a.powers, c.powers);
    }

    #[test]
    fn noise_is_unbiased_on_average() {
        let p = BeamPowerProfile {
            powers: vec![1.0; 10_000],
        };
        let cfg = SignalConfig {
            power_measurement_noise_std: 0.05,
            ..Default::default()
        };
        let noisy = perturb_power_profile(&p, &cfg, 1234);
        let mean: f64 = noisy.powers.iter().sum::<f64>() / noisy.powers.len() as f64;
        assert!((mean - 1.0).abs() < 0.01, "mean {mean}");
        assert!(noisy.powers.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn signal_config_validation() {
        let mut cfg = SignalConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.transmit_power = 0.0;
        assert!(cfg.validate().is_err());
        cfg.transmit_power = 1.0;
        cfg.power_measurement_noise_std = -0.1;
        assert!(cfg.validate().is_err());
    }
}
