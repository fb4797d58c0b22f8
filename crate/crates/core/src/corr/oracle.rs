use super::{apply_volume_cut, classify, Binning, PairCounts, PairCountOptions, PairWindow, VolumeCut};
use crate::synth::Shot;

/// Reference implementation of [`super::pair_histogram`]: a direct loop over
/// every pair. Quadratic in the total event count.
pub fn brute_force_pair_histogram(
    shots: &[Shot],
    cut: &VolumeCut,
    window: &PairWindow,
    binning: &Binning,
) -> PairCounts {
    brute_force_pair_histogram_with(shots, cut, window, binning, &PairCountOptions::default())
}

pub fn brute_force_pair_histogram_with(
    shots: &[Shot],
    cut: &VolumeCut,
    window: &PairWindow,
    binning: &Binning,
    options: &PairCountOptions,
) -> PairCounts {
    let groups = options.denominator_groups.max(1) as u64;
    let kept: Vec<Shot> = shots.iter().map(|s| apply_volume_cut(s, cut)).collect();
    let mut numerator = vec![0u64; binning.count];
    let mut denominator = vec![0u64; binning.count];
    let mut duplicate_pairs = 0;
    let mut shot_pairs = 0;

    for (a, sa) in kept.iter().enumerate() {
        for (i, &p) in sa.events.iter().enumerate() {
            for &q in &sa.events[i + 1..] {
                if let Some(b) = classify(p, q, window, binning) {
                    numerator[b] += 1;
                    if p == q {
                        duplicate_pairs += 1;
                    }
                }
            }
        }
        for sb in &kept[a + 1..] {
            if sa.shot_id % groups != sb.shot_id % groups {
                continue;
            }
            shot_pairs += 1;
            for &p in &sa.events {
                for &q in &sb.events {
                    if let Some(b) = classify(p, q, window, binning) {
                        denominator[b] += 1;
                    }
                }
            }
        }
    }

    PairCounts {
        window: *window,
        binning: *binning,
        numerator,
        denominator,
        n_shots: shots.len() as u64,
        shot_pairs,
        denominator_groups: groups as usize,
        duplicate_pairs,
    }
}
