//! Synthetic shot-resolved momentum events.
//!
//! A shot is built in three stages: a diffuse shell of spontaneously
//! scattered atoms following the dipole pattern, endfire peaks whose
//! populations come from a [`ModeOccupationModel`], and a detector stage that
//! thins events by the quantum efficiency and drops those outside the
//! transverse acceptance. All coordinates are in units of the recoil momentum.

mod chaotic;

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::modestats::{sample_occupation, sample_poisson, ModeOccupationModel, ModeStatsError};
use crate::vec3::Vec3;

pub use chaotic::SpeckleField;

/// HWHM / σ for a Gaussian profile.
pub const HWHM_PER_SIGMA: f64 = 1.177_410_022_515_474_6;

/// Lorentzian offsets are truncated at this many half-widths.
pub const LORENTZIAN_TRUNCATION: f64 = 3.0;

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error("invalid detector: {0}")]
    InvalidDetector(String),
    #[error("invalid occupation model: {0}")]
    Occupation(#[from] ModeStatsError),
    #[error("a run needs at least one shot")]
    NoShots,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicalConstants {
    /// Transition wavelength in metres.
    pub wavelength: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self { wavelength: 1083e-9 }
    }
}

impl PhysicalConstants {
    /// k_rec = 2π/λ in inverse metres.
    pub fn recoil_momentum(&self) -> f64 {
        2.0 * PI / self.wavelength
    }
}

/// Thomas-Fermi radii of the source, in metres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SourceGeometry {
    pub radius_perp: f64,
    pub radius_z: f64,
}

impl Default for SourceGeometry {
    fn default() -> Self {
        Self {
            radius_perp: 5e-6,
            radius_z: 50e-6,
        }
    }
}

/// F = 2 R⊥² / (λ R_z).
pub fn fresnel_number(geom: &SourceGeometry, consts: &PhysicalConstants) -> f64 {
    2.0 * geom.radius_perp.powi(2) / (consts.wavelength * geom.radius_z)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PeakShape {
    #[default]
    Gaussian,
    /// Inverse-CDF Lorentzian offsets truncated at 3 HWHM. Horizontal
    /// widths are angular deviations in rad.
    Lorentzian,
}

/// One superradiant peak, treated as a single transverse mode.
///
/// Vertical is the lab z axis, horizontal covers x and y.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndfirePeak {
    pub center: Vec3,
    pub hwhm_vertical: f64,
    pub hwhm_horizontal: f64,
    pub occupation: ModeOccupationModel,
}

impl EndfirePeak {
    /// Density widths of the τ = 0 superradiant peaks.
    pub fn endfire(center: Vec3, occupation: ModeOccupationModel) -> Self {
        Self {
            center,
            hwhm_vertical: 0.014,
            hwhm_horizontal: 0.14,
            occupation,
        }
    }
}

/// Counting statistics of the diffuse (non-endfire) emission.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DiffuseStatistics {
    /// Independent atoms, Poisson total count.
    #[default]
    Poisson,
    /// Chaotic far field of many independent emitters: the intensity is a
    /// speckle pattern with the given coherence half-widths and every mode is
    /// thermally occupied. Sampled as a Cox process whose intensity already
    /// includes the detector efficiency.
    Chaotic {
        coherence_hwhm_vertical: f64,
        coherence_hwhm_horizontal: f64,
        emitters: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScatterScene {
    pub dipole_axis: Vec3,
    /// Mean number of spontaneously scattered atoms per shot.
    pub diffuse_mean_count: f64,
    pub diffuse_statistics: DiffuseStatistics,
    pub shell_center: f64,
    pub shell_radial_sigma: f64,
    pub peak_shape: PeakShape,
    pub peaks: Vec<EndfirePeak>,
}

impl Default for ScatterScene {
    fn default() -> Self {
        let thermal = ModeOccupationModel::Thermal { mean: 700.0 };
        Self {
            dipole_axis: Vec3::Y,
            diffuse_mean_count: 400.0,
            diffuse_statistics: DiffuseStatistics::Poisson,
            shell_center: 1.0,
            shell_radial_sigma: 0.05,
            peak_shape: PeakShape::Gaussian,
            peaks: vec![
                EndfirePeak::endfire(Vec3::Z, thermal),
                EndfirePeak::endfire(Vec3::Z * -1.0, thermal),
            ],
        }
    }
}

fn is_unit(v: Vec3) -> bool {
    (v.norm() - 1.0).abs() < 1e-9
}

impl ScatterScene {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |msg: String| Err(SynthError::InvalidScene(msg));
        if !is_unit(self.dipole_axis) {
            return bad(format!("dipole_axis {:?} is not a unit vector", self.dipole_axis));
        }
        if !(self.diffuse_mean_count.is_finite() && self.diffuse_mean_count >= 0.0) {
            return bad(format!("diffuse_mean_count {} must be >= 0", self.diffuse_mean_count));
        }
        if !(self.shell_center.is_finite() && self.shell_center > 0.0) {
            return bad(format!("shell_center {} must be > 0", self.shell_center));
        }
        if !(self.shell_radial_sigma.is_finite() && self.shell_radial_sigma > 0.0) {
            return bad(format!("shell_radial_sigma {} must be > 0", self.shell_radial_sigma));
        }
        if let DiffuseStatistics::Chaotic {
            coherence_hwhm_vertical,
            coherence_hwhm_horizontal,
            emitters,
        } = self.diffuse_statistics
        {
            if !(coherence_hwhm_vertical > 0.0 && coherence_hwhm_horizontal > 0.0) {
                return bad("coherence widths must be > 0".into());
            }
            if emitters == 0 {
                return bad("chaotic diffuse emission needs at least one emitter".into());
            }
        }
        for (i, peak) in self.peaks.iter().enumerate() {
            if !is_unit(peak.center) {
                return bad(format!("peaks[{i}].center {:?} is not on the unit sphere", peak.center));
            }
            if !(peak.hwhm_vertical > 0.0 && peak.hwhm_horizontal > 0.0) {
                return bad(format!("peaks[{i}] widths must be > 0"));
            }
            peak.occupation.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorModel {
    pub efficiency: f64,
    /// Events with |k_x| above this miss the detector.
    pub kx_max: f64,
    pub apply_efficiency: bool,
    pub apply_acceptance: bool,
}

impl Default for DetectorModel {
    fn default() -> Self {
        Self {
            efficiency: 0.15,
            kx_max: 0.4,
            apply_efficiency: true,
            apply_acceptance: true,
        }
    }
}

impl DetectorModel {
    /// Perfect detector with unlimited acceptance.
    pub fn ideal() -> Self {
        Self {
            efficiency: 1.0,
            apply_efficiency: false,
            apply_acceptance: false,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if !(0.0..=1.0).contains(&self.efficiency) {
            return Err(SynthError::InvalidDetector(format!(
                "efficiency {} outside [0, 1]",
                self.efficiency
            )));
        }
        if !(self.kx_max > 0.0) {
            return Err(SynthError::InvalidDetector(format!("kx_max {} must be > 0", self.kx_max)));
        }
        Ok(())
    }

    fn effective_efficiency(&self) -> f64 {
        if self.apply_efficiency {
            self.efficiency
        } else {
            1.0
        }
    }

    fn accepts(&self, k: Vec3) -> bool {
        !self.apply_acceptance || k.x.abs() <= self.kx_max
    }
}

/// One experimental realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Shot {
    pub shot_id: u64,
    pub events: Vec<Vec3>,
}

/// Per-source bookkeeping for one shot. For chaotic diffuse emission the
/// generated count already includes the efficiency.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ShotTally {
    pub diffuse_generated: u64,
    pub diffuse_detected: u64,
    pub peak_generated: Vec<u64>,
    pub peak_detected: Vec<u64>,
}

impl ShotTally {
    pub fn generated(&self) -> u64 {
        self.diffuse_generated + self.peak_generated.iter().sum::<u64>()
    }

    pub fn detected(&self) -> u64 {
        self.diffuse_detected + self.peak_detected.iter().sum::<u64>()
    }
}

/// Independent stream for one shot: same seed and shot id always give the
/// same events, whatever order shots are produced in.
pub fn shot_rng(seed: u64, shot_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(shot_id);
    rng
}

fn uniform_direction<R: Rng + ?Sized>(rng: &mut R) -> Vec3 {
    let cos_theta = 2.0 * rng.random::<f64>() - 1.0;
    let phi = 2.0 * PI * rng.random::<f64>();
    let sin_theta = (1.0 - cos_theta * cos_theta).max(0.0).sqrt();
    Vec3::new(sin_theta * phi.cos(), sin_theta * phi.sin(), cos_theta)
}

/// Direction with density ∝ sin²θ, θ measured from `dipole_axis`, by
/// rejection against the uniform sphere.
pub fn sample_dipole_direction<R: Rng + ?Sized>(dipole_axis: Vec3, rng: &mut R) -> Vec3 {
    loop {
        let u = uniform_direction(rng);
        let c = u.dot(dipole_axis);
        if rng.random::<f64>() < 1.0 - c * c {
            return u;
        }
    }
}

fn sample_shell_radius<R: Rng + ?Sized>(scene: &ScatterScene, rng: &mut R) -> f64 {
    loop {
        let z: f64 = rng.sample(StandardNormal);
        let r = scene.shell_center + scene.shell_radial_sigma * z;
        if r > 0.0 {
            return r;
        }
    }
}

pub(crate) fn sample_diffuse_position<R: Rng + ?Sized>(scene: &ScatterScene, rng: &mut R) -> Vec3 {
    let dir = sample_dipole_direction(scene.dipole_axis, rng);
    dir * sample_shell_radius(scene, rng)
}

fn sample_offset<R: Rng + ?Sized>(shape: PeakShape, hwhm: f64, rng: &mut R) -> f64 {
    match shape {
        PeakShape::Gaussian => {
            let z: f64 = rng.sample(StandardNormal);
            z * hwhm / HWHM_PER_SIGMA
        }
        PeakShape::Lorentzian => {
            let edge = LORENTZIAN_TRUNCATION.atan();
            hwhm * ((2.0 * rng.random::<f64>() - 1.0) * edge).tan()
        }
    }
}

fn sample_peak_position<R: Rng + ?Sized>(shape: PeakShape, peak: &EndfirePeak, rng: &mut R) -> Vec3 {
    match shape {
        PeakShape::Gaussian => {
            let dx = sample_offset(shape, peak.hwhm_horizontal, rng);
            let dy = sample_offset(shape, peak.hwhm_horizontal, rng);
            let dz = sample_offset(shape, peak.hwhm_vertical, rng);
            peak.center + Vec3::new(dx, dy, dz)
        }
        PeakShape::Lorentzian => {
            // horizontal widths are angles seen from the origin, so that the
            // projected polar angle of an event is Lorentzian itself
            let dz = sample_offset(shape, peak.hwhm_vertical, rng);
            let lever = (peak.center + Vec3::new(0.0, 0.0, dz)).norm();
            let dx = lever * sample_offset(shape, peak.hwhm_horizontal, rng).tan();
            let dy = lever * sample_offset(shape, peak.hwhm_horizontal, rng).tan();
            peak.center + Vec3::new(dx, dy, dz)
        }
    }
}

/// Generates one shot and reports how many events each source contributed.
pub fn synthesize_shot_tallied<R: Rng + ?Sized>(
    scene: &ScatterScene,
    det: &DetectorModel,
    shot_id: u64,
    rng: &mut R,
) -> (Shot, ShotTally) {
    let eta = det.effective_efficiency();
    let mut tally = ShotTally {
        peak_generated: vec![0; scene.peaks.len()],
        peak_detected: vec![0; scene.peaks.len()],
        ..ShotTally::default()
    };
    let mut events = Vec::new();

    // diffuse shell
    match scene.diffuse_statistics {
        DiffuseStatistics::Poisson => {
            let n = sample_poisson(scene.diffuse_mean_count, rng);
            tally.diffuse_generated = n;
            for _ in 0..n {
                let k = sample_diffuse_position(scene, rng);
                if (!det.apply_efficiency || rng.random::<f64>() < eta) && det.accepts(k) {
                    tally.diffuse_detected += 1;
                    events.push(k);
                }
            }
        }
        DiffuseStatistics::Chaotic {
            coherence_hwhm_vertical,
            coherence_hwhm_horizontal,
            emitters,
        } => {
            let field = SpeckleField::sample(
                coherence_hwhm_vertical,
                coherence_hwhm_horizontal,
                emitters,
                rng,
            );
            let before = events.len();
            field.sample_events(scene, eta * scene.diffuse_mean_count, rng, &mut events);
            tally.diffuse_generated = (events.len() - before) as u64;
            events.retain(|&k| det.accepts(k));
            tally.diffuse_detected = (events.len() - before) as u64;
        }
    }

    // endfire peaks
    for (i, peak) in scene.peaks.iter().enumerate() {
        let n = sample_occupation(&peak.occupation, rng);
        tally.peak_generated[i] = n;
        for _ in 0..n {
            let k = sample_peak_position(scene.peak_shape, peak, rng);
            if (!det.apply_efficiency || rng.random::<f64>() < eta) && det.accepts(k) {
                tally.peak_detected[i] += 1;
                events.push(k);
            }
        }
    }

    (Shot { shot_id, events }, tally)
}

pub fn synthesize_shot<R: Rng + ?Sized>(
    scene: &ScatterScene,
    det: &DetectorModel,
    shot_id: u64,
    rng: &mut R,
) -> Shot {
    synthesize_shot_tallied(scene, det, shot_id, rng).0
}

/// `n_shots` independent shots, each drawn from its own `(seed, shot_id)`
/// stream. Runs in parallel; the output does not depend on the thread count.
pub fn synthesize_run(
    scene: &ScatterScene,
    det: &DetectorModel,
    n_shots: u64,
    seed: u64,
) -> Result<Vec<Shot>, SynthError> {
    Ok(synthesize_run_tallied(scene, det, n_shots, seed)?
        .into_iter()
        .map(|(shot, _)| shot)
        .collect())
}

pub fn synthesize_run_tallied(
    scene: &ScatterScene,
    det: &DetectorModel,
    n_shots: u64,
    seed: u64,
) -> Result<Vec<(Shot, ShotTally)>, SynthError> {
    if n_shots == 0 {
        return Err(SynthError::NoShots);
    }
    scene.validate()?;
    det.validate()?;
    Ok((0..n_shots)
        .into_par_iter()
        .map(|id| {
            let mut rng = shot_rng(seed, id);
            synthesize_shot_tallied(scene, det, id, &mut rng)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fresnel_number_of_default_source() {
        let f = fresnel_number(&SourceGeometry::default(), &PhysicalConstants::default());
        assert!((f - 0.923).abs() < 1e-3, "F = {f}");
    }

    #[test]
    fn fresnel_scaling() {
        let c = PhysicalConstants::default();
        let g = SourceGeometry::default();
        let f = fresnel_number(&g, &c);
        let wide = SourceGeometry {
            radius_perp: 2.0 * g.radius_perp,
            ..g
        };
        let long = SourceGeometry {
            radius_z: 2.0 * g.radius_z,
            ..g
        };
        assert!((fresnel_number(&wide, &c) / f - 4.0).abs() < 1e-12);
        assert!((fresnel_number(&long, &c) / f - 0.5).abs() < 1e-12);
    }

    #[test]
    fn recoil_momentum() {
        let c = PhysicalConstants::default();
        assert!((c.recoil_momentum() * c.wavelength - 2.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn zero_efficiency_gives_empty_shot() {
        let det = DetectorModel {
            efficiency: 0.0,
            ..DetectorModel::default()
        };
        let mut rng = shot_rng(1, 0);
        let shot = synthesize_shot(&ScatterScene::default(), &det, 0, &mut rng);
        assert!(shot.events.is_empty());
    }

    #[test]
    fn fock_peak_without_cuts() {
        let scene = ScatterScene {
            diffuse_mean_count: 0.0,
            peaks: vec![EndfirePeak::endfire(Vec3::Z, ModeOccupationModel::Fock { n: 50 })],
            ..ScatterScene::default()
        };
        let mut rng = shot_rng(2, 0);
        let shot = synthesize_shot(&scene, &DetectorModel::ideal(), 0, &mut rng);
        assert_eq!(shot.events.len(), 50);
        assert!(shot.events.iter().all(|k| (*k - Vec3::Z).norm() < 0.8));
        let mean_z = shot.events.iter().map(|k| k.z).sum::<f64>() / 50.0;
        assert!((mean_z - 1.0).abs() < 0.01);
    }

    #[test]
    fn lorentzian_offsets_are_truncated() {
        let mut rng = shot_rng(3, 0);
        for _ in 0..10_000 {
            let d = sample_offset(PeakShape::Lorentzian, 0.14, &mut rng);
            assert!(d.abs() <= 3.0 * 0.14 + 1e-12);
        }
    }

    #[test]
    fn scene_validation() {
        let mut scene = ScatterScene::default();
        assert!(scene.validate().is_ok());
        scene.dipole_axis = Vec3::new(0.0, 2.0, 0.0);
        assert!(scene.validate().is_err());
        let mut scene = ScatterScene::default();
        scene.peaks[0].center = Vec3::new(0.0, 0.0, 0.9);
        assert!(scene.validate().is_err());
        let mut scene = ScatterScene::default();
        scene.shell_radial_sigma = 0.0;
        assert!(scene.validate().is_err());
        let det = DetectorModel {
            efficiency: 1.5,
            ..DetectorModel::default()
        };
        assert!(det.validate().is_err());
    }

    #[test]
    fn run_rejects_zero_shots() {
        let err = synthesize_run(&ScatterScene::default(), &DetectorModel::default(), 0, 1);
        assert_eq!(err, Err(SynthError::NoShots));
    }

    #[test]
    fn run_is_reproducible() {
        let scene = ScatterScene::default();
        let det = DetectorModel::default();
        let a = synthesize_run(&scene, &det, 20, 99).unwrap();
        let b = synthesize_run(&scene, &det, 20, 99).unwrap();
        assert_eq!(a, b);
        let c = synthesize_run(&scene, &det, 20, 100).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn shots_do_not_depend_on_run_length() {
        let scene = ScatterScene::default();
        let det = DetectorModel::default();
        let short = synthesize_run(&scene, &det, 5, 7).unwrap();
        let long = synthesize_run(&scene, &det, 50, 7).unwrap();
        assert_eq!(short[..], long[..5]);
    }
}
