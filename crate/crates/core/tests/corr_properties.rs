use endfire_core::corr::{
    brute_force_pair_histogram_with, normalize_g2, pair_histogram, pair_histogram_with, Binning,
    PairCountOptions, PairWindow, VolumeCut,
};
use endfire_core::modestats::ModeOccupationModel;
use endfire_core::synth::{synthesize_run, DetectorModel, EndfirePeak, ScatterScene, Shot};
use endfire_core::{Axis, Vec3};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;

/// Coordinates snapped to a lattice finer than the bins, so that exact ties
/// with bin edges and window bounds are common.
fn coordinate(center: f64, spread: f64) -> impl Strategy<Value = f64> {
    (-1000i32..=1000).prop_map(move |i| center + spread * f64::from(i) / 1000.0)
}

fn event() -> impl Strategy<Value = Vec3> {
    prop_oneof![
        // clustered near a pole
        (coordinate(0.0, 0.1), coordinate(0.0, 0.1), coordinate(1.0, 0.05))
            .prop_map(|(x, y, z)| Vec3::new(x, y, z)),
        // spread over a slab
        (coordinate(0.0, 0.6), coordinate(0.0, 0.6), coordinate(0.0, 1.2))
            .prop_map(|(x, y, z)| Vec3::new(x, y, z)),
        // quantized at the window and bin pitch
        (0i32..10, 0i32..10, 0i32..30).prop_map(|(i, j, k)| Vec3::new(
            0.03 * f64::from(i),
            0.003 * f64::from(j),
            1.0 + 0.003 * f64::from(k)
        )),
    ]
}

fn scene() -> impl Strategy<Value = Vec<Shot>> {
    prop::collection::vec(prop::collection::vec(event(), 0..400), 1..9).prop_map(|shots| {
        shots
            .into_iter()
            .enumerate()
            .map(|(i, events)| Shot { shot_id: i as u64 * 3 + 1, events })
            .collect()
    })
}

fn window_and_bins() -> impl Strategy<Value = (PairWindow, Binning)> {
    prop_oneof![
        Just((PairWindow::along_z(), Binning::along_z())),
        Just((PairWindow::along_y(), Binning::along_y())),
        (0.005f64..0.2, 0.003f64..0.05, 1usize..40).prop_map(|(w, width, count)| (
            PairWindow { axis: Axis::X, transverse: [w, w / 2.0] },
            Binning { width, count }
        )),
    ]
}

fn cut() -> impl Strategy<Value = VolumeCut> {
    prop_oneof![
        Just(VolumeCut::everything()),
        Just(VolumeCut::shell(0.8, 1.2)),
        Just(VolumeCut::endfire_peaks()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 128, ..ProptestConfig::default() })]

    #[test]
    fn optimized_counts_equal_the_oracle(
        shots in scene(),
        (window, binning) in window_and_bins(),
        cut in cut(),
        groups in 1usize..4,
    ) {
        let options = PairCountOptions { denominator_groups: groups };
        let slow = brute_force_pair_histogram_with(&shots, &cut, &window, &binning, &options);
        match pair_histogram_with(&shots, &cut, &window, &binning, &options) {
            Ok(fast) => prop_assert_eq!(fast, slow),
            Err(_) => {
                prop_assert!(slow.numerator.iter().chain(&slow.denominator).all(|&n| n == 0));
            }
        }
    }

    #[test]
    fn shot_order_does_not_matter(shots in scene(), seed in any::<u64>()) {
        let (window, binning) = (PairWindow::along_z(), Binning::along_z());
        let cut = VolumeCut::everything();
        let mut shuffled = shots.clone();
        shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let a = pair_histogram(&shots, &cut, &window, &binning);
        let b = pair_histogram(&shuffled, &cut, &window, &binning);
        prop_assert_eq!(&a, &b);
        if let (Ok(a), Ok(b)) = (a, b) {
            if a.n_shots >= 2 && a.denominator.iter().any(|&d| d > 0) {
                prop_assert_eq!(normalize_g2(&a).unwrap(), normalize_g2(&b).unwrap());
            }
        }
    }
}

fn peak_scene(occupation: ModeOccupationModel) -> ScatterScene {
    ScatterScene {
        diffuse_mean_count: 0.0,
        peaks: vec![EndfirePeak::endfire(Vec3::Z, occupation)],
        ..ScatterScene::default()
    }
}

/// g² in the first bin; the denominator uses 64 shot groups to stay fast.
fn g2_at_zero(shots: &[Shot], window: PairWindow, binning: Binning) -> f64 {
    let options = PairCountOptions { denominator_groups: 64 };
    let counts = pair_histogram_with(shots, &VolumeCut::everything(), &window, &binning, &options).unwrap();
    normalize_g2(&counts).unwrap().g2[0].unwrap()
}

#[test]
fn uncorrelated_shots_normalize_to_one() {
    let scene = ScatterScene {
        peaks: Vec::new(),
        diffuse_mean_count: 400.0,
        ..ScatterScene::default()
    };
    let shots = synthesize_run(&scene, &DetectorModel::ideal(), 2000, 21).unwrap();
    let total: usize = shots.iter().map(|s| s.events.len()).sum();
    assert!(total >= 100_000);
    let shell = VolumeCut::shell(0.8, 1.2);
    for (window, binning) in [
        (PairWindow::along_z(), Binning::along_z()),
        (PairWindow::along_y(), Binning::along_y()),
    ] {
        let h = normalize_g2(&pair_histogram(&shots, &shell, &window, &binning).unwrap()).unwrap();
        let defined: Vec<f64> = h.g2.iter().flatten().copied().collect();
        let mean = defined.iter().sum::<f64>() / defined.len() as f64;
        assert!((0.98..=1.02).contains(&mean), "{:?}: mean g2 {mean}", window.axis);
    }
}

#[test]
fn thermal_mode_reaches_two_and_coherent_mode_stays_at_one() {
    let det = DetectorModel::default();
    let window = PairWindow { axis: Axis::Z, transverse: [1.0, 1.0] };
    let binning = Binning { width: 0.01, count: 10 };

    let thermal = synthesize_run(&peak_scene(ModeOccupationModel::Thermal { mean: 700.0 }), &det, 1000, 31).unwrap();
    let g = g2_at_zero(&thermal, window, binning);
    assert!((g - 2.0).abs() < 0.1, "thermal g2(0) = {g}");

    let coherent = synthesize_run(&peak_scene(ModeOccupationModel::Coherent { mean: 700.0 }), &det, 1000, 32).unwrap();
    let g = g2_at_zero(&coherent, window, binning);
    assert!((g - 1.0).abs() < 0.05, "coherent g2(0) = {g}");
}

#[test]
fn widening_the_window_lowers_the_contrast() {
    // a row of independent narrow thermal modes spaced 0.05 apart along x
    let peaks = (-4..=4)
        .map(|i| {
            let center = Vec3::new(0.05 * f64::from(i), 0.0, 1.0).normalized().unwrap();
            EndfirePeak {
                center,
                hwhm_vertical: 0.014,
                hwhm_horizontal: 0.01,
                occupation: ModeOccupationModel::Thermal { mean: 20.0 },
            }
        })
        .collect();
    let scene = ScatterScene {
        diffuse_mean_count: 0.0,
        peaks,
        ..ScatterScene::default()
    };
    let shots = synthesize_run(&scene, &DetectorModel::ideal(), 2000, 41).unwrap();
    let binning = Binning { width: 0.003, count: 5 };
    let values: Vec<f64> = [0.02, 0.04, 0.08, 0.16, 0.32]
        .iter()
        .map(|&w| g2_at_zero(&shots, PairWindow { axis: Axis::Z, transverse: [w, w] }, binning))
        .collect();
    assert!(values[0] > 1.9, "{values:?}");
    for pair in values.windows(2) {
        assert!(pair[1] < pair[0], "{values:?}");
    }
    assert!(values[4] > 1.0 && values[4] < 1.4, "{values:?}");
}
