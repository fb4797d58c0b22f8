//! Second-order correlations of shot-resolved events.
//!
//! g²(Δk) is estimated as a histogram of same-shot pair separations divided
//! by the histogram of cross-shot pairs, which samples the autoconvolution of
//! the mean density. Numerator and denominator are integrated over the
//! analysis volume and transverse window separately and divided afterwards.
//!
//! Pairs are unordered and the binned separation is folded to |Δk_axis|, so
//! bin 0 starts at zero separation.

mod angular;
mod cut;
mod oracle;
mod pairs;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::vec3::{Axis, Vec3};

pub use angular::{angular_distribution, AngleHistogram, Plane};
pub use cut::{apply_volume_cut, AxisBound, VolumeCut, SHELL_INNER, SHELL_OUTER};
pub use oracle::{brute_force_pair_histogram, brute_force_pair_histogram_with};
pub use pairs::{pair_histogram, pair_histogram_with, PairCountOptions};

/// Identifier written into every analysis output.
pub const ESTIMATOR_VERSION: &str = "cross-shot-ratio-of-integrals/v1";

#[derive(Debug, Error, PartialEq)]
pub enum CorrError {
    #[error("no event survives the volume cut `{0}`")]
    EmptySelection(String),
    #[error("normalization needs at least 2 shots, got {0}")]
    TooFewShots(u64),
    #[error("every denominator bin is zero")]
    EmptyDenominator,
    #[error("invalid analysis parameter: {0}")]
    InvalidParameter(String),
}

/// Separation axis to bin and the strict bounds |Δk_t| < bound on the two
/// transverse components (in [`Axis::transverse`] order).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairWindow {
    pub axis: Axis,
    pub transverse: [f64; 2],
}

impl PairWindow {
    /// Correlations along z: |Δk_x| < 3e-2, |Δk_y| < 3e-2.
    pub fn along_z() -> Self {
        Self {
            axis: Axis::Z,
            transverse: [3e-2, 3e-2],
        }
    }

    /// Correlations along y: |Δk_x| < 3e-2, |Δk_z| < 3e-3.
    pub fn along_y() -> Self {
        Self {
            axis: Axis::Y,
            transverse: [3e-2, 3e-3],
        }
    }

    pub fn validate(&self) -> Result<(), CorrError> {
        if self.transverse.iter().all(|b| *b > 0.0 && b.is_finite()) {
            Ok(())
        } else {
            Err(CorrError::InvalidParameter(format!(
                "window bounds {:?} must be positive",
                self.transverse
            )))
        }
    }
}

/// Uniform bins `[i·width, (i+1)·width)` for `i < count`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Binning {
    pub width: f64,
    pub count: usize,
}

impl Binning {
    /// As many whole bins of `width` as fit in `[0, range]`.
    pub fn covering(width: f64, range: f64) -> Self {
        Self {
            width,
            count: (range / width + 1e-9).floor() as usize,
        }
    }

    /// Default along z: 3e-3 bins over [0, 0.1].
    pub fn along_z() -> Self {
        Self::covering(3e-3, 0.1)
    }

    /// Default along y: 1e-2 bins over [0, 0.5].
    pub fn along_y() -> Self {
        Self::covering(1e-2, 0.5)
    }

    pub fn validate(&self) -> Result<(), CorrError> {
        if self.width > 0.0 && self.width.is_finite() && self.count > 0 {
            Ok(())
        } else {
            Err(CorrError::InvalidParameter(format!(
                "binning {self:?} needs a positive width and at least one bin"
            )))
        }
    }

    #[inline]
    pub fn bin_of(&self, separation: f64) -> Option<usize> {
        let b = (separation / self.width).floor();
        (b < self.count as f64).then_some(b as usize)
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.count).map(|i| (i as f64 + 0.5) * self.width).collect()
    }

    /// Largest separation that can land in a bin, padded against rounding.
    pub(crate) fn reach(&self) -> f64 {
        self.width * self.count as f64 * (1.0 + 1e-6)
    }
}

/// Bin index for the pair (p, q), or `None` when it falls outside the window
/// or the binned range. Shared by every counting path.
#[inline]
pub(crate) fn classify(p: Vec3, q: Vec3, window: &PairWindow, binning: &Binning) -> Option<usize> {
    let d = q - p;
    let [t1, t2] = window.axis.transverse();
    if d.component(t1).abs() < window.transverse[0] && d.component(t2).abs() < window.transverse[1] {
        binning.bin_of(d.component(window.axis).abs())
    } else {
        None
    }
}

/// Exact pair counts for one window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairCounts {
    pub window: PairWindow,
    pub binning: Binning,
    /// Same-shot pairs.
    pub numerator: Vec<u64>,
    /// Cross-shot pairs.
    pub denominator: Vec<u64>,
    pub n_shots: u64,
    /// Number of distinct shot pairs the denominator was built from.
    pub shot_pairs: u64,
    pub denominator_groups: usize,
    /// Same-shot pairs at exactly identical positions.
    pub duplicate_pairs: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationHistogram {
    pub window: PairWindow,
    pub binning: Binning,
    pub numerator: Vec<u64>,
    pub denominator: Vec<u64>,
    pub n_shots: u64,
    pub shot_pairs: u64,
    pub denominator_groups: usize,
    /// Scale applied to numerator/denominator; M − 1 with all shot pairs.
    pub normalization: f64,
    /// `None` where the denominator is empty.
    pub g2: Vec<Option<f64>>,
    pub err68: Vec<Option<f64>>,
    pub duplicate_pairs: u64,
}

impl CorrelationHistogram {
    pub fn bin_centers(&self) -> Vec<f64> {
        self.binning.centers()
    }

    pub fn defined_bins(&self) -> usize {
        self.g2.iter().filter(|v| v.is_some()).count()
    }
}

/// Ratio with its Poisson 68% half-width: errors on numerator and
/// denominator added in quadrature on log g². An empty numerator bin is
/// given unit variance.
pub fn g2_with_error(numerator: u64, denominator: u64, normalization: f64) -> Option<(f64, f64)> {
    if denominator == 0 {
        return None;
    }
    let (n, d) = (numerator as f64, denominator as f64);
    let g = normalization * n / d;
    let var = normalization.powi(2) * (n.max(1.0) / (d * d) + n * n / (d * d * d));
    Some((g, var.sqrt()))
}

/// (M−1)·numerator/denominator, generalized to a subsampled denominator as
/// 2·(shot pairs)/M.
pub fn normalize_g2(counts: &PairCounts) -> Result<CorrelationHistogram, CorrError> {
    if counts.n_shots < 2 {
        return Err(CorrError::TooFewShots(counts.n_shots));
    }
    if counts.denominator.iter().all(|&d| d == 0) {
        return Err(CorrError::EmptyDenominator);
    }
    let normalization = 2.0 * counts.shot_pairs as f64 / counts.n_shots as f64;
    let (g2, err68) = counts
        .numerator
        .iter()
        .zip(&counts.denominator)
        .map(|(&n, &d)| match g2_with_error(n, d, normalization) {
            Some((g, e)) => (Some(g), Some(e)),
            None => (None, None),
        })
        .unzip();
    if counts.duplicate_pairs > 0 {
        log::warn!(
            "{} same-shot pairs share an identical position; g2 at zero separation is inflated",
            counts.duplicate_pairs
        );
    }
    Ok(CorrelationHistogram {
        window: counts.window,
        binning: counts.binning,
        numerator: counts.numerator.clone(),
        denominator: counts.denominator.clone(),
        n_shots: counts.n_shots,
        shot_pairs: counts.shot_pairs,
        denominator_groups: counts.denominator_groups,
        normalization,
        g2,
        err68,
        duplicate_pairs: counts.duplicate_pairs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn counts(num: Vec<u64>, den: Vec<u64>, n_shots: u64) -> PairCounts {
        PairCounts {
            window: PairWindow::along_z(),
            binning: Binning { width: 0.01, count: num.len() },
            numerator: num,
            denominator: den,
            n_shots,
            shot_pairs: n_shots * (n_shots - 1) / 2,
            denominator_groups: 1,
            duplicate_pairs: 0,
        }
    }

    #[test]
    fn default_binnings() {
        assert_eq!(Binning::along_z().count, 33);
        assert_eq!(Binning::along_y().count, 50);
        // five bins inside the narrowest correlation half-width
        assert!(0.014 / Binning::along_z().width >= 4.6);
    }

    #[test]
    fn bin_edges() {
        let b = Binning { width: 0.01, count: 3 };
        assert_eq!(b.bin_of(0.0), Some(0));
        assert_eq!(b.bin_of(0.015), Some(1));
        assert_eq!(b.bin_of(0.0299), Some(2));
        assert_eq!(b.bin_of(0.031), None);
    }

    #[test]
    fn normalization_uses_m_minus_one() {
        let h = normalize_g2(&counts(vec![10, 0], vec![90, 0], 10)).unwrap();
        assert_eq!(h.normalization, 9.0);
        assert_eq!(h.g2[0], Some(1.0));
        assert_eq!(h.g2[1], None);
        let e = h.err68[0].unwrap();
        assert!((e - (1.0f64 / 10.0 + 1.0 / 90.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn normalization_errors() {
        assert_eq!(
            normalize_g2(&counts(vec![1], vec![0], 5)).unwrap_err(),
            CorrError::EmptyDenominator
        );
        let mut c = counts(vec![1], vec![1], 2);
        c.n_shots = 1;
        assert_eq!(normalize_g2(&c).unwrap_err(), CorrError::TooFewShots(1));
    }

    #[test]
    fn classify_respects_strict_window() {
        let w = PairWindow::along_z();
        let b = Binning::along_z();
        let p = Vec3::new(0.0, 0.0, 1.0);
        assert_eq!(classify(p, Vec3::new(0.0, 0.0, 1.01), &w, &b), Some(3));
        assert_eq!(classify(p, Vec3::new(0.04, 0.0, 1.01), &w, &b), None);
        assert_eq!(classify(p, Vec3::new(0.0, 0.0, 1.2), &w, &b), None);
    }
}
