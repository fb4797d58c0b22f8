use endfire_core::modestats::{
    empirical_g2, sample_occupation, sample_pair, ModeOccupationModel,
};
use endfire_core::synth::{shot_rng, synthesize_run_tallied, DetectorModel, EndfirePeak, ScatterScene};
use endfire_core::Vec3;
use statrs::distribution::{ChiSquared, ContinuousCDF};

const DRAWS: usize = 100_000;

/// Pearson χ² p-value of `samples` against `pmf`, merging the upper tail so
/// every cell expects at least five counts.
fn chi2_p_value(samples: &[u64], pmf: impl Fn(u64) -> f64) -> f64 {
    let n = samples.len() as f64;
    let max = *samples.iter().max().unwrap();
    let mut observed = vec![0f64; max as usize + 2];
    for &s in samples {
        observed[s as usize] += 1.0;
    }
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut obs, mut exp, mut used) = (0.0, 0.0, 0.0);
    for k in 0..=max {
        obs += observed[k as usize];
        exp += n * pmf(k);
        if exp >= 5.0 {
            cells.push((obs, exp));
            used += exp;
            obs = 0.0;
            exp = 0.0;
        }
    }
    // the remaining probability mass, including everything above max
    let tail_exp = n - used;
    if let Some(last) = cells.last_mut() {
        if tail_exp < 5.0 {
            last.0 += obs;
            last.1 += tail_exp;
        } else {
            cells.push((obs, tail_exp));
        }
    }
    let stat: f64 = cells.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    let dof = (cells.len() - 1) as f64;
    1.0 - ChiSquared::new(dof).unwrap().cdf(stat)
}

fn geometric_pmf(mean: f64) -> impl Fn(u64) -> f64 {
    let q = mean / (1.0 + mean);
    move |k| (1.0 - q) * q.powi(k as i32)
}

fn poisson_pmf(mean: f64) -> impl Fn(u64) -> f64 {
    move |k| (k as f64 * mean.ln() - mean - statrs::function::gamma::ln_gamma(k as f64 + 1.0)).exp()
}

fn draw(model: ModeOccupationModel, seed: u64) -> Vec<u64> {
    let mut rng = shot_rng(seed, 0);
    (0..DRAWS).map(|_| sample_occupation(&model, &mut rng)).collect()
}

#[test]
fn thermal_sampler_follows_geometric_law() {
    for (i, mean) in [0.5, 5.0, 50.0].into_iter().enumerate() {
        let samples = draw(ModeOccupationModel::Thermal { mean }, 100 + i as u64);
        let p = chi2_p_value(&samples, geometric_pmf(mean));
        assert!(p > 0.01, "thermal mean {mean}: p = {p}");
    }
}

#[test]
fn coherent_sampler_follows_poisson_law() {
    for (i, mean) in [0.5, 5.0, 50.0].into_iter().enumerate() {
        let samples = draw(ModeOccupationModel::Coherent { mean }, 200 + i as u64);
        let p = chi2_p_value(&samples, poisson_pmf(mean));
        assert!(p > 0.01, "coherent mean {mean}: p = {p}");
    }
}

#[test]
fn chi2_check_rejects_the_wrong_law() {
    let samples = draw(ModeOccupationModel::Coherent { mean: 5.0 }, 300);
    assert!(chi2_p_value(&samples, geometric_pmf(5.0)) < 1e-6);
}

#[test]
fn squeezed_pairs_are_equal_and_thermal() {
    let model = ModeOccupationModel::TwoModeSqueezedVacuum { squeeze: 1.0 };
    let mut rng = shot_rng(400, 0);
    let mut atoms = Vec::with_capacity(DRAWS);
    for _ in 0..DRAWS {
        let pair = sample_pair(&model, &mut rng).unwrap();
        assert_eq!(pair.n_atoms, pair.n_photons);
        atoms.push(pair.n_atoms);
    }
    let mean = 1f64.sinh().powi(2);
    assert!(chi2_p_value(&atoms, geometric_pmf(mean)) > 0.01);
    let g2 = empirical_g2(&atoms).unwrap();
    assert!((g2 - 2.0).abs() < 0.05, "g2 = {g2}");
}

#[test]
fn synthesized_peak_populations_are_geometric() {
    // the occupation drawn inside shot synthesis obeys the same law as the
    // stand-alone sampler
    let mean = 5.0;
    let scene = ScatterScene {
        diffuse_mean_count: 0.0,
        peaks: vec![EndfirePeak::endfire(Vec3::Z, ModeOccupationModel::Thermal { mean })],
        ..ScatterScene::default()
    };
    let run = synthesize_run_tallied(&scene, &DetectorModel::ideal(), 20_000, 5).unwrap();
    let counts: Vec<u64> = run.iter().map(|(_, t)| t.peak_generated[0]).collect();
    assert!(chi2_p_value(&counts, geometric_pmf(mean)) > 0.01);
}
