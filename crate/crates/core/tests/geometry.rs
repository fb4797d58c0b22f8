//! Event geometry against quadrature.

use endfire_core::corr::{apply_volume_cut, VolumeCut};
use endfire_core::synth::{
    sample_dipole_direction, shot_rng, synthesize_run, DetectorModel, ScatterScene,
};
use endfire_core::Vec3;

/// Composite Simpson rule with `n` (even) intervals.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// Density of c = k̂·d for emission ∝ 1 − c².
fn dipole_density(c: f64) -> f64 {
    0.75 * (1.0 - c * c)
}

#[test]
fn dipole_moments_match_quadrature() {
    let axis = Vec3::Y;
    let n = 200_000;
    let mut rng = shot_rng(1, 0);
    let (mut m2, mut cap) = (0.0, 0usize);
    for _ in 0..n {
        let c = sample_dipole_direction(axis, &mut rng).dot(axis);
        m2 += c * c;
        if c.abs() > 0.9 {
            cap += 1;
        }
    }
    m2 /= n as f64;
    let expected_m2 = simpson(|c| c * c * dipole_density(c), -1.0, 1.0, 2000);
    assert!((expected_m2 - 0.2).abs() < 1e-12);
    let m4 = simpson(|c| c.powi(4) * dipole_density(c), -1.0, 1.0, 2000);
    let sigma = ((m4 - expected_m2 * expected_m2) / n as f64).sqrt();
    assert!((m2 - expected_m2).abs() < 5.0 * sigma, "<c²> = {m2}");

    let p_cap = 2.0 * simpson(dipole_density, 0.9, 1.0, 200);
    let observed = cap as f64 / n as f64;
    let sigma = (p_cap * (1.0 - p_cap) / n as f64).sqrt();
    assert!((observed - p_cap).abs() < 5.0 * sigma, "cap {observed} vs {p_cap}");
}

#[test]
fn emission_is_symmetric_about_the_dipole_axis() {
    let mut rng = shot_rng(2, 0);
    let n = 100_000;
    let (mut sx, mut sz) = (0.0, 0.0);
    for _ in 0..n {
        let k = sample_dipole_direction(Vec3::Y, &mut rng);
        sx += k.x * k.x;
        sz += k.z * k.z;
    }
    // each transverse component carries (1 - 1/5) / 2
    assert!((sx / n as f64 - 0.4).abs() < 5e-3);
    assert!((sz / n as f64 - 0.4).abs() < 5e-3);
}

/// Fraction of diffuse atoms inside the shell that pass |k_x| ≤ kx_max.
fn diffuse_acceptance_quadrature(sigma: f64, kx_max: f64) -> f64 {
    // with a y dipole, the x direction cosine s has density 3(1 + s²)/8
    let p_s = |s: f64| 0.375 * (1.0 + s * s);
    let gauss = |r: f64| (-(r - 1.0).powi(2) / (2.0 * sigma * sigma)).exp();
    let norm = simpson(gauss, 0.0, 2.0, 4000);
    simpson(
        |r| {
            let lim = (kx_max / r).min(1.0);
            gauss(r) / norm * 2.0 * simpson(p_s, 0.0, lim, 200)
        },
        0.8,
        1.2,
        400,
    )
}

#[test]
fn detector_acceptance_matches_quadrature() {
    let scene = ScatterScene {
        peaks: Vec::new(),
        diffuse_mean_count: 2000.0,
        ..ScatterScene::default()
    };
    let det = DetectorModel {
        apply_efficiency: false,
        ..DetectorModel::default()
    };
    let shots = synthesize_run(&scene, &det, 200, 3).unwrap();
    let shell = VolumeCut::shell(0.8, 1.2);
    let kept: usize = shots.iter().map(|s| apply_volume_cut(s, &shell).events.len()).sum();
    let generated = 2000.0 * 200.0;
    let a = diffuse_acceptance_quadrature(0.05, 0.4);
    assert!((a - 0.31698).abs() < 5e-4, "quadrature acceptance {a}");
    let observed = kept as f64 / generated;
    // Poisson total on top of binomial thinning
    let sigma = (a / generated).sqrt();
    assert!((observed - a).abs() < 5.0 * sigma, "observed {observed} vs {a}");
}
