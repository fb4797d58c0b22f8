//! Shape fits for correlation and angular histograms.
//!
//! * g²: 1 + A·exp(−x²/2σ²) with the baseline pinned at 1.
//! * angular background: A·sin²θ, linear and solved in closed form.
//! * angular peaks: A / (1 + ((θ−θ₀)/w)²) on the background-subtracted
//!   histogram, in a window around each endfire pole.

mod lm;

use std::f64::consts::{FRAC_PI_2, LN_2};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corr::{AngleHistogram, CorrelationHistogram};
use lm::{minimize, Data, Model};

pub use lm::{COST_TOLERANCE, MAX_ITERATIONS};

/// Default half-width of the angular window fitted around each pole, in rad.
pub const DEFAULT_POLE_WINDOW: f64 = 0.5;
/// The pole window never extends beyond this many half-maximum widths.
pub const WINDOW_PER_HWHM: f64 = 2.0;
/// A peak must exceed this many standard deviations of the residual noise.
pub const SIGNIFICANCE: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub err: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitFlag {
    /// Negative g² amplitude.
    AntiBunching,
    /// Reduced χ² more than five standard deviations above 1.
    PoorFit,
    /// Optimizer stopped at the iteration limit; values are unusable.
    NotConverged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: String,
    pub amplitude: Estimate,
    /// HWHM in the abscissa's units.
    pub width: Option<Estimate>,
    pub center: Option<Estimate>,
    pub chi2: f64,
    pub ndf: usize,
    pub reduced_chi2: f64,
    pub converged: bool,
    pub iterations: usize,
    pub excluded_bins: usize,
    /// Half-width of the abscissa range fitted, when restricted.
    pub window: Option<f64>,
    pub flags: Vec<FitFlag>,
}

impl FitResult {
    pub fn has_flag(&self, flag: FitFlag) -> bool {
        self.flags.contains(&flag)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("{model} fit needs at least {needed} usable bins, got {got}")]
    TooFewBins {
        model: &'static str,
        needed: usize,
        got: usize,
    },
    #[error("fit did not converge after {} iterations", .0.iterations)]
    NotConverged(Box<FitResult>),
    #[error("no significant peak near θ = {pole:.3}: residual {signal:.1} against noise {noise:.1}")]
    NoSignificantPeak { pole: f64, signal: f64, noise: f64 },
    #[error("background reference has {reference} bins but the target has {target}")]
    BinningMismatch { reference: usize, target: usize },
}

fn flag_quality(result: &mut FitResult) {
    if result.ndf > 0 && result.reduced_chi2 > 1.0 + 5.0 * (2.0 / result.ndf as f64).sqrt() {
        result.flags.push(FitFlag::PoorFit);
    }
}

/// Points kept for fitting: finite values with strictly positive errors.
fn usable(x: &[f64], y: &[Option<f64>], err: &[Option<f64>]) -> (Vec<f64>, Vec<f64>, Vec<f64>, usize) {
    let mut out = (Vec::new(), Vec::new(), Vec::new(), 0);
    for ((&x, y), e) in x.iter().zip(y).zip(err) {
        match (y, e) {
            (Some(y), Some(e)) if y.is_finite() && e.is_finite() && *e > 0.0 => {
                out.0.push(x);
                out.1.push(*y);
                out.2.push(*e);
            }
            _ => out.3 += 1,
        }
    }
    out
}

struct GaussianBump;

impl Model for GaussianBump {
    fn n_params(&self) -> usize {
        2
    }
    fn eval(&self, x: f64, p: &[f64]) -> f64 {
        1.0 + p[0] * (-x * x / (2.0 * p[1] * p[1])).exp()
    }
    fn gradient(&self, x: f64, p: &[f64], out: &mut [f64]) {
        let e = (-x * x / (2.0 * p[1] * p[1])).exp();
        out[0] = e;
        out[1] = p[0] * e * x * x / p[1].powi(3);
    }
}

struct Lorentzian;

impl Model for Lorentzian {
    fn n_params(&self) -> usize {
        3
    }
    fn eval(&self, x: f64, p: &[f64]) -> f64 {
        let u = (x - p[2]) / p[1];
        p[0] / (1.0 + u * u)
    }
    fn gradient(&self, x: f64, p: &[f64], out: &mut [f64]) {
        let u = (x - p[2]) / p[1];
        let d = 1.0 / (1.0 + u * u);
        out[0] = d;
        out[1] = p[0] * d * d * 2.0 * u * u / p[1];
        out[2] = p[0] * d * d * 2.0 * u / p[1];
    }
}

/// Distance from `x[from]` to the first point where `y` drops to `peak / 2`,
/// scanning in direction `step`.
fn half_max_crossing(x: &[f64], y: &[f64], from: usize, peak: f64, step: isize) -> Option<f64> {
    let mut i = from as isize;
    while i >= 0 && (i as usize) < y.len() {
        if y[i as usize] * peak.signum() <= peak.abs() / 2.0 {
            return Some((x[i as usize] - x[from]).abs());
        }
        i += step;
    }
    None
}

fn finish(model: &str, outcome: lm::Outcome, n_points: usize, excluded: usize) -> FitResult {
    let ndf = n_points.saturating_sub(outcome.params.len());
    FitResult {
        model: model.into(),
        amplitude: Estimate {
            value: outcome.params[0],
            err: outcome.errors[0],
        },
        width: None,
        center: None,
        chi2: outcome.chi2,
        ndf,
        reduced_chi2: if ndf > 0 { outcome.chi2 / ndf as f64 } else { f64::NAN },
        converged: outcome.converged,
        iterations: outcome.iterations,
        excluded_bins: excluded,
        window: None,
        flags: if outcome.converged { Vec::new() } else { vec![FitFlag::NotConverged] },
    }
}

/// Gaussian fit of a normalized correlation histogram.
pub fn fit_g2_gaussian(hist: &CorrelationHistogram) -> Result<FitResult, FitError> {
    let (x, y, err, excluded) = usable(&hist.bin_centers(), &hist.g2, &hist.err68);
    fit_g2_gaussian_points(&x, &y, &err, excluded)
}

/// Gaussian fit of `(x, g², err)` points with the baseline fixed at 1.
/// `excluded` is only reported.
pub fn fit_g2_gaussian_points(x: &[f64], y: &[f64], err: &[f64], excluded: usize) -> Result<FitResult, FitError> {
    const NEEDED: usize = 5;
    if x.len() < NEEDED {
        return Err(FitError::TooFewBins {
            model: "gaussian",
            needed: NEEDED,
            got: x.len(),
        });
    }
    let origin = (0..x.len()).min_by(|&a, &b| x[a].abs().total_cmp(&x[b].abs())).unwrap();
    let excess: Vec<f64> = y.iter().map(|v| v - 1.0).collect();
    let a0 = excess[origin];
    let span = x.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let sigma0 = half_max_crossing(x, &excess, origin, a0, 1)
        .filter(|w| *w > 0.0)
        .map(|w| w / (2.0 * LN_2).sqrt())
        .unwrap_or(span / 4.0)
        .max(span / 100.0);

    let outcome = minimize(&GaussianBump, &Data { x, y, err }, &[a0, sigma0]);
    let sigma = outcome.params[1].abs();
    let sigma_err = outcome.errors[1];
    let hwhm = (2.0 * LN_2).sqrt();
    let mut result = finish("gaussian_g2", outcome, x.len(), excluded);
    result.width = Some(Estimate {
        value: sigma * hwhm,
        err: sigma_err * hwhm,
    });
    if result.amplitude.value < 0.0 {
        result.flags.push(FitFlag::AntiBunching);
    }
    flag_quality(&mut result);
    if result.converged {
        Ok(result)
    } else {
        Err(FitError::NotConverged(Box::new(result)))
    }
}

fn sin2(theta: f64) -> f64 {
    theta.sin().powi(2)
}

/// Closed-form weighted fit of A·sin²θ.
pub fn fit_sin2_background(hist: &AngleHistogram) -> Result<FitResult, FitError> {
    const NEEDED: usize = 8;
    let centers = hist.bin_centers();
    let y: Vec<Option<f64>> = hist.values.iter().map(|&v| Some(v)).collect();
    let e: Vec<Option<f64>> = hist.err68.iter().map(|&v| Some(v)).collect();
    let (x, y, err, excluded) = usable(&centers, &y, &e);
    if x.len() < NEEDED {
        return Err(FitError::TooFewBins {
            model: "sin2",
            needed: NEEDED,
            got: x.len(),
        });
    }
    let (mut sy, mut ss) = (0.0, 0.0);
    for ((&t, &v), &e) in x.iter().zip(&y).zip(&err) {
        let w = 1.0 / (e * e);
        sy += w * v * sin2(t);
        ss += w * sin2(t) * sin2(t);
    }
    let a = sy / ss;
    let chi2: f64 = x
        .iter()
        .zip(&y)
        .zip(&err)
        .map(|((&t, &v), &e)| ((v - a * sin2(t)) / e).powi(2))
        .sum();
    let ndf = x.len() - 1;
    let mut result = FitResult {
        model: "sin2".into(),
        amplitude: Estimate {
            value: a,
            err: ss.sqrt().recip(),
        },
        width: None,
        center: None,
        chi2,
        ndf,
        reduced_chi2: chi2 / ndf as f64,
        converged: true,
        iterations: 1,
        excluded_bins: excluded,
        window: None,
        flags: Vec::new(),
    };
    flag_quality(&mut result);
    Ok(result)
}

/// Source of the spontaneous-emission background subtracted before the
/// peak fits.
#[derive(Debug, Clone, Copy)]
pub enum BackgroundRef<'a> {
    /// Fit A·sin²θ to a peak-free histogram and rescale it by the ratio of
    /// shot counts.
    Reference(&'a AngleHistogram),
    /// Background amplitude in the target's units.
    Amplitude(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PoleFit {
    pub pole: f64,
    pub result: Result<FitResult, FitError>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AngularPeakFit {
    /// Background fit of the reference, if one was given.
    pub background: Option<FitResult>,
    /// sin²θ amplitude subtracted from the target.
    pub subtracted_amplitude: f64,
    pub window: f64,
    pub poles: Vec<PoleFit>,
}

impl AngularPeakFit {
    pub fn successful(&self) -> impl Iterator<Item = &FitResult> {
        self.poles.iter().filter_map(|p| p.result.as_ref().ok())
    }
}

// FitError is carried inside PoleFit; serialize it as its message.
impl Serialize for FitError {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

/// Background-subtracted Lorentzian fits at θ = ±π/2.
///
/// Fails with [`FitError::NoSignificantPeak`] only when neither pole shows a
/// significant residual; otherwise each pole carries its own outcome.
pub fn fit_angular_peak(
    target: &AngleHistogram,
    background: BackgroundRef,
    window: f64,
) -> Result<AngularPeakFit, FitError> {
    let (amplitude, amplitude_err, background_fit) = match background {
        BackgroundRef::Reference(reference) => {
            if reference.values.len() != target.values.len() {
                return Err(FitError::BinningMismatch {
                    reference: reference.values.len(),
                    target: target.values.len(),
                });
            }
            let fit = fit_sin2_background(reference)?;
            let scale = target.n_shots as f64 / reference.n_shots.max(1) as f64;
            (fit.amplitude.value * scale, fit.amplitude.err * scale, Some(fit))
        }
        BackgroundRef::Amplitude(a) => (a, 0.0, None),
    };

    let centers = target.bin_centers();
    let residual: Vec<f64> = centers
        .iter()
        .zip(&target.values)
        .map(|(&t, &v)| v - amplitude * sin2(t))
        .collect();
    let err: Vec<f64> = centers
        .iter()
        .zip(&target.err68)
        .map(|(&t, &e)| (e * e + (amplitude_err * sin2(t)).powi(2)).sqrt())
        .collect();
    let mut poles = Vec::new();
    for pole in [-FRAC_PI_2, FRAC_PI_2] {
        let select = |half_width: f64| {
            let (mut xs, mut ys, mut es) = (Vec::new(), Vec::new(), Vec::new());
            for i in 0..centers.len() {
                if (centers[i] - pole).abs() < half_width {
                    xs.push(centers[i]);
                    ys.push(residual[i]);
                    es.push(err[i]);
                }
            }
            (xs, ys, es)
        };
        let (x, y, e) = select(window);
        if let Err(insignificant) = check_significance(pole, &y, &e) {
            poles.push(PoleFit { pole, result: Err(insignificant) });
            continue;
        }
        let used = effective_window(&x, &y, window);
        let (x, y, e) = if used < window { select(used) } else { (x, y, e) };
        let result = fit_pole(pole, &x, &y, &e).map(|mut r| {
            r.window = Some(used);
            r
        });
        poles.push(PoleFit { pole, result });
    }

    if poles
        .iter()
        .all(|p| matches!(p.result, Err(FitError::NoSignificantPeak { .. })))
    {
        return Err(poles.swap_remove(0).result.unwrap_err());
    }
    Ok(AngularPeakFit {
        background: background_fit,
        subtracted_amplitude: amplitude,
        window,
        poles,
    })
}

/// Fit half-width around a pole: `window`, narrowed to [`WINDOW_PER_HWHM`]
/// times the half-maximum width of the residual so the fit stays on the
/// peak and off the far tails.
fn effective_window(x: &[f64], y: &[f64], window: f64) -> f64 {
    let Some(peak) = (0..y.len()).max_by(|&a, &b| y[a].total_cmp(&y[b])) else {
        return window;
    };
    let a = y[peak];
    match (half_max_crossing(x, y, peak, a, -1), half_max_crossing(x, y, peak, a, 1)) {
        (Some(l), Some(r)) if l > 0.0 && r > 0.0 => window.min(WINDOW_PER_HWHM * (l + r) / 2.0),
        _ => window,
    }
}

fn check_significance(pole: f64, y: &[f64], err: &[f64]) -> Result<(), FitError> {
    let signal: f64 = y.iter().sum();
    let noise = err.iter().map(|e| e * e).sum::<f64>().sqrt();
    if signal < SIGNIFICANCE * noise {
        Err(FitError::NoSignificantPeak { pole, signal, noise })
    } else {
        Ok(())
    }
}

/// Lorentzian fit of the residual around one pole.
pub fn fit_pole(pole: f64, x: &[f64], y: &[f64], err: &[f64]) -> Result<FitResult, FitError> {
    const NEEDED: usize = 5;
    if x.len() < NEEDED {
        return Err(FitError::TooFewBins {
            model: "lorentzian",
            needed: NEEDED,
            got: x.len(),
        });
    }
    check_significance(pole, y, err)?;

    let peak = (0..y.len()).max_by(|&a, &b| y[a].total_cmp(&y[b])).unwrap();
    let a0 = y[peak];
    let right = half_max_crossing(x, y, peak, a0, 1);
    let left = half_max_crossing(x, y, peak, a0, -1);
    let w0 = match (left, right) {
        (Some(l), Some(r)) => (l + r) / 2.0,
        (Some(w), None) | (None, Some(w)) => w,
        (None, None) => (x[x.len() - 1] - x[0]) / 4.0,
    }
    .max(1e-3);

    let outcome = minimize(&Lorentzian, &Data { x, y, err }, &[a0, w0, x[peak]]);
    let (w, w_err) = (outcome.params[1].abs(), outcome.errors[1]);
    let center = Estimate {
        value: outcome.params[2],
        err: outcome.errors[2],
    };
    let mut result = finish("lorentzian", outcome, x.len(), 0);
    result.width = Some(Estimate { value: w, err: w_err });
    result.center = Some(center);
    flag_quality(&mut result);
    if result.converged {
        Ok(result)
    } else {
        Err(FitError::NotConverged(Box::new(result)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corr::Plane;
    use crate::synth::HWHM_PER_SIGMA;
    use std::f64::consts::PI;

    fn angle_hist(values: Vec<f64>) -> AngleHistogram {
        let err68 = values.iter().map(|v| v.max(1.0).sqrt()).collect();
        AngleHistogram {
            plane: Plane::Yz,
            slab: 0.1,
            values,
            err68,
            n_shots: 100,
        }
    }

    fn centers(n: usize) -> Vec<f64> {
        (0..n).map(|i| -PI + (i as f64 + 0.5) * 2.0 * PI / n as f64).collect()
    }

    #[test]
    fn noiseless_gaussian_recovers_parameters() {
        let sigma = 0.021 / HWHM_PER_SIGMA;
        let x: Vec<f64> = (0..33).map(|i| (i as f64 + 0.5) * 0.003).collect();
        let y: Vec<f64> = x.iter().map(|x| 1.0 + (-x * x / (2.0 * sigma * sigma)).exp()).collect();
        let err = vec![0.01; x.len()];
        let fit = fit_g2_gaussian_points(&x, &y, &err, 0).unwrap();
        assert!((fit.amplitude.value - 1.0).abs() < 1e-4);
        assert!((fit.width.unwrap().value - 0.021).abs() < 1e-6);
        assert!(fit.converged);
        assert!(fit.flags.is_empty());
    }

    #[test]
    fn flat_histogram_has_zero_amplitude() {
        let x: Vec<f64> = (0..20).map(|i| (i as f64 + 0.5) * 0.005).collect();
        let y = vec![1.0; 20];
        let err = vec![0.02; 20];
        let fit = fit_g2_gaussian_points(&x, &y, &err, 0).unwrap();
        assert!(fit.amplitude.value.abs() < 1e-6);
        assert!(fit.amplitude.err > 0.0 && fit.amplitude.err < 0.05);
    }

    #[test]
    fn negative_amplitude_is_flagged() {
        let x: Vec<f64> = (0..20).map(|i| (i as f64 + 0.5) * 0.005).collect();
        let y: Vec<f64> = x.iter().map(|x| 1.0 - 0.5 * (-x * x / (2.0 * 0.0004)).exp()).collect();
        let fit = fit_g2_gaussian_points(&x, &y, &vec![0.01; 20], 0).unwrap();
        assert!(fit.has_flag(FitFlag::AntiBunching));
        assert!((fit.amplitude.value + 0.5).abs() < 1e-4);
    }

    #[test]
    fn too_few_bins() {
        let err = fit_g2_gaussian_points(&[0.0, 0.1], &[2.0, 1.0], &[0.1, 0.1], 3).unwrap_err();
        assert!(matches!(err, FitError::TooFewBins { got: 2, .. }));
    }

    #[test]
    fn exact_sin2_is_recovered() {
        let values: Vec<f64> = centers(180).iter().map(|t| 250.0 * sin2(*t)).collect();
        let fit = fit_sin2_background(&angle_hist(values)).unwrap();
        assert!((fit.amplitude.value - 250.0).abs() < 1e-9);
        assert!(fit.reduced_chi2 < 1e-20);
    }

    #[test]
    fn flat_input_is_a_poor_sin2_fit() {
        let fit = fit_sin2_background(&angle_hist(vec![200.0; 180])).unwrap();
        assert!(fit.reduced_chi2 > 10.0);
        assert!(fit.has_flag(FitFlag::PoorFit));
    }

    #[test]
    fn pure_background_has_no_peak() {
        let values: Vec<f64> = centers(180).iter().map(|t| 250.0 * sin2(*t)).collect();
        let hist = angle_hist(values.clone());
        let err = fit_angular_peak(&hist, BackgroundRef::Reference(&hist), DEFAULT_POLE_WINDOW).unwrap_err();
        assert!(matches!(err, FitError::NoSignificantPeak { .. }));
    }

    #[test]
    fn lorentzian_on_background_is_recovered() {
        let values: Vec<f64> = centers(180)
            .iter()
            .map(|&t| {
                let peaks: f64 = [-FRAC_PI_2, FRAC_PI_2]
                    .iter()
                    .map(|p| 400.0 / (1.0 + ((t - p) / 0.14).powi(2)))
                    .sum();
                100.0 * sin2(t) + peaks
            })
            .collect();
        let fit = fit_angular_peak(&angle_hist(values), BackgroundRef::Amplitude(100.0), DEFAULT_POLE_WINDOW).unwrap();
        assert_eq!(fit.successful().count(), 2);
        for r in fit.successful() {
            assert!((r.width.unwrap().value - 0.14).abs() < 2e-3, "{r:?}");
            assert!((r.amplitude.value - 400.0).abs() / 400.0 < 1e-2);
        }
    }
}
