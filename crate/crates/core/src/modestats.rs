//! Counting statistics of a single scattered mode.
//!
//! The pair-creation Hamiltonian acting on vacuum produces a two-mode squeezed
//! state; tracing out either partner leaves a thermal (geometric) occupation.
//! Operators are never represented: each model samples its closed-form number
//! distribution directly.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ModeStatsError {
    #[error("invalid {name}: {value} (must be finite and >= 0)")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("pair sampling requires a two-mode squeezed vacuum, got {0}")]
    NotSqueezed(&'static str),
    #[error("second-order correlation is undefined for zero mean occupation")]
    ZeroMean,
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("all samples are zero; correlation is undefined")]
    DegenerateSamples,
}

/// Statistical law of one mode's occupation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModeOccupationModel {
    /// Bose-Einstein (geometric) law with the given mean.
    Thermal { mean: f64 },
    /// Poisson law, as for a laser or a condensate.
    Coherent { mean: f64 },
    /// Exactly `n` quanta every realization.
    Fock { n: u64 },
    /// Pair source with squeeze parameter `r` (the product of coupling and
    /// interaction time); each partner alone is thermal with mean sinh²r.
    TwoModeSqueezedVacuum { squeeze: f64 },
}

impl ModeOccupationModel {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Thermal { .. } => "thermal",
            Self::Coherent { .. } => "coherent",
            Self::Fock { .. } => "fock",
            Self::TwoModeSqueezedVacuum { .. } => "two_mode_squeezed_vacuum",
        }
    }

    pub fn validate(&self) -> Result<(), ModeStatsError> {
        let check = |name, value: f64| {
            if value.is_finite() && value >= 0.0 {
                Ok(())
            } else {
                Err(ModeStatsError::InvalidParameter { name, value })
            }
        };
        match *self {
            Self::Thermal { mean } | Self::Coherent { mean } => check("mean", mean),
            Self::Fock { .. } => Ok(()),
            Self::TwoModeSqueezedVacuum { squeeze } => check("squeeze", squeeze),
        }
    }

    /// Squeezed vacuum with the requested per-partner mean occupation.
    pub fn squeezed_with_mean(mean: f64) -> Self {
        Self::TwoModeSqueezedVacuum {
            squeeze: mean.sqrt().asinh(),
        }
    }
}

/// Joint atom/photon counts of one pair-production realization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OccupationSample {
    pub n_atoms: u64,
    pub n_photons: u64,
}

pub fn mean_occupation(model: &ModeOccupationModel) -> f64 {
    match *model {
        ModeOccupationModel::Thermal { mean } | ModeOccupationModel::Coherent { mean } => mean,
        ModeOccupationModel::Fock { n } => n as f64,
        ModeOccupationModel::TwoModeSqueezedVacuum { squeeze } => squeeze.sinh().powi(2),
    }
}

/// Inverse-CDF draw from P(n) = m^n / (1+m)^(n+1), one uniform per sample.
pub fn sample_geometric<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    let ratio = mean / (1.0 + mean);
    // uniform on (0, 1]
    let u = 1.0 - rng.random::<f64>();
    let n = (u.ln() / ratio.ln()).floor();
    if n >= u64::MAX as f64 {
        u64::MAX
    } else {
        n as u64
    }
}

pub fn sample_poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    // mean is finite and positive, so construction cannot fail
    let poisson = Poisson::new(mean).expect("valid Poisson mean");
    let n: f64 = poisson.sample(rng);
    n as u64
}

/// Draws one occupation number. A squeezed vacuum is traced over its partner.
pub fn sample_occupation<R: Rng + ?Sized>(model: &ModeOccupationModel, rng: &mut R) -> u64 {
    match *model {
        ModeOccupationModel::Thermal { mean } => sample_geometric(mean, rng),
        ModeOccupationModel::Coherent { mean } => sample_poisson(mean, rng),
        ModeOccupationModel::Fock { n } => n,
        ModeOccupationModel::TwoModeSqueezedVacuum { .. } => {
            sample_geometric(mean_occupation(model), rng)
        }
    }
}

/// Draws a perfectly correlated atom/photon pair from a squeezed vacuum.
pub fn sample_pair<R: Rng + ?Sized>(
    model: &ModeOccupationModel,
    rng: &mut R,
) -> Result<OccupationSample, ModeStatsError> {
    match model {
        ModeOccupationModel::TwoModeSqueezedVacuum { .. } => {
            let n = sample_geometric(mean_occupation(model), rng);
            Ok(OccupationSample {
                n_atoms: n,
                n_photons: n,
            })
        }
        other => Err(ModeStatsError::NotSqueezed(other.name())),
    }
}

/// Normalized factorial moment ⟨n(n−1)⟩/⟨n⟩² of the model.
pub fn analytic_g2(model: &ModeOccupationModel) -> Result<f64, ModeStatsError> {
    if mean_occupation(model) <= 0.0 {
        return Err(ModeStatsError::ZeroMean);
    }
    Ok(match *model {
        ModeOccupationModel::Thermal { .. } | ModeOccupationModel::TwoModeSqueezedVacuum { .. } => 2.0,
        ModeOccupationModel::Coherent { .. } => 1.0,
        ModeOccupationModel::Fock { n } => 1.0 - 1.0 / n as f64,
    })
}

/// Estimator mean(n(n−1)) / mean(n)² over observed counts.
pub fn empirical_g2(samples: &[u64]) -> Result<f64, ModeStatsError> {
    if samples.len() < 2 {
        return Err(ModeStatsError::TooFewSamples(samples.len()));
    }
    let (sum, sum_ff) = samples.iter().fold((0u128, 0u128), |(s, ff), &n| {
        let n = n as u128;
        (s + n, ff + n * n.saturating_sub(1))
    });
    if sum == 0 {
        return Err(ModeStatsError::DegenerateSamples);
    }
    let len = samples.len() as f64;
    let mean = sum as f64 / len;
    Ok(sum_ff as f64 / len / (mean * mean))
}
