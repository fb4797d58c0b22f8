//! Speckle intensity of a chaotic multimode far field.
//!
//! The field is a sum of plane waves from point emitters with Gaussian-
//! distributed positions and complex Gaussian amplitudes, so for fixed
//! positions it is a circular Gaussian random field: every mode is thermal
//! and |g¹(Δk)|² is the squared Fourier transform of the emitter cloud.
//! Atoms are drawn as a Cox process on top of the mean dipole density.

use rand::Rng;
use rand_distr::StandardNormal;

use super::{sample_diffuse_position, ScatterScene};
use crate::modestats::sample_poisson;
use crate::vec3::Vec3;

/// Intensity (in units of its mean) above which the acceptance saturates.
/// The truncated mean is restored by scaling the proposal rate.
const INTENSITY_CAP: f64 = 10.0;

#[derive(Debug, Clone)]
pub struct SpeckleField {
    /// Emitter positions in units of 1/k_rec.
    positions: Vec<Vec3>,
    amplitudes: Vec<(f64, f64)>,
}

impl SpeckleField {
    /// Emitter cloud whose |g¹|² has the requested half-widths along z
    /// (vertical) and along x, y (horizontal).
    pub fn sample<R: Rng + ?Sized>(
        hwhm_vertical: f64,
        hwhm_horizontal: f64,
        emitters: usize,
        rng: &mut R,
    ) -> Self {
        // |g1|^2 = exp(-Δq² s²) reaches 1/2 at Δq = sqrt(ln 2)/s
        let ln2 = std::f64::consts::LN_2.sqrt();
        let s_h = ln2 / hwhm_horizontal;
        let s_v = ln2 / hwhm_vertical;
        let amp = std::f64::consts::FRAC_1_SQRT_2;
        let mut positions = Vec::with_capacity(emitters);
        let mut amplitudes = Vec::with_capacity(emitters);
        for _ in 0..emitters {
            let x: f64 = rng.sample(StandardNormal);
            let y: f64 = rng.sample(StandardNormal);
            let z: f64 = rng.sample(StandardNormal);
            positions.push(Vec3::new(x * s_h, y * s_h, z * s_v));
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            amplitudes.push((re * amp, im * amp));
        }
        Self {
            positions,
            amplitudes,
        }
    }

    /// Intensity at `k`, normalized so its ensemble mean is 1.
    pub fn intensity(&self, k: Vec3) -> f64 {
        let (mut re, mut im) = (0.0, 0.0);
        for (s, &(a_re, a_im)) in self.positions.iter().zip(&self.amplitudes) {
            let (sin, cos) = k.dot(*s).sin_cos();
            re += a_re * cos - a_im * sin;
            im += a_re * sin + a_im * cos;
        }
        (re * re + im * im) / self.positions.len() as f64
    }

    /// Appends a Cox-process realization with mean count `mean_count`
    /// distributed like the diffuse shell of `scene`.
    pub(super) fn sample_events<R: Rng + ?Sized>(
        &self,
        scene: &ScatterScene,
        mean_count: f64,
        rng: &mut R,
        out: &mut Vec<Vec3>,
    ) {
        let kept_fraction = 1.0 - (-INTENSITY_CAP).exp();
        let proposals = sample_poisson(mean_count * INTENSITY_CAP / kept_fraction, rng);
        for _ in 0..proposals {
            let k = sample_diffuse_position(scene, rng);
            let accept = self.intensity(k).min(INTENSITY_CAP) / INTENSITY_CAP;
            if rng.random::<f64>() < accept {
                out.push(k);
            }
        }
    }
}
