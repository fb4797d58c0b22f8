//! Exact pair counting on a transverse grid.
//!
//! All events of a denominator group are pooled and tagged with their shot.
//! Cells on the two transverse axes are one window wide, so any pair inside
//! the window lies in the same or an adjacent cell; within cells events are
//! sorted along the binned axis and swept with two pointers. Same-shot pairs
//! feed the numerator, the rest the denominator. Every candidate pair goes
//! through [`classify`], so the result matches the brute-force double loop.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{apply_volume_cut, classify, Binning, CorrError, PairCounts, PairWindow, VolumeCut};
use crate::synth::Shot;
use crate::vec3::Vec3;

/// Pools smaller than this are counted with a plain double loop.
const SMALL_POOL: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairCountOptions {
    /// Shots are split into this many groups by `shot_id mod groups` and
    /// cross-shot pairs are only formed inside a group. 1 uses every pair.
    pub denominator_groups: usize,
}

impl Default for PairCountOptions {
    fn default() -> Self {
        Self {
            denominator_groups: 1,
        }
    }
}

#[derive(Clone, Copy)]
struct Tagged {
    k: Vec3,
    along: f64,
    shot: u32,
    cell: (i64, i64),
}

#[derive(Clone)]
struct Partial {
    numerator: Vec<u64>,
    denominator: Vec<u64>,
    duplicates: u64,
}

impl Partial {
    fn new(bins: usize) -> Self {
        Self {
            numerator: vec![0; bins],
            denominator: vec![0; bins],
            duplicates: 0,
        }
    }

    #[inline]
    fn record(&mut self, p: &Tagged, q: &Tagged, window: &PairWindow, binning: &Binning) {
        if let Some(b) = classify(p.k, q.k, window, binning) {
            if p.shot == q.shot {
                self.numerator[b] += 1;
                if p.k == q.k {
                    self.duplicates += 1;
                }
            } else {
                self.denominator[b] += 1;
            }
        }
    }

    fn merge(mut self, other: Partial) -> Partial {
        for (a, b) in self.numerator.iter_mut().zip(&other.numerator) {
            *a += b;
        }
        for (a, b) in self.denominator.iter_mut().zip(&other.denominator) {
            *a += b;
        }
        self.duplicates += other.duplicates;
        self
    }
}

/// [`pair_histogram_with`] using every cross-shot pair.
pub fn pair_histogram(
    shots: &[Shot],
    cut: &VolumeCut,
    window: &PairWindow,
    binning: &Binning,
) -> Result<PairCounts, CorrError> {
    pair_histogram_with(shots, cut, window, binning, &PairCountOptions::default())
}

/// Same-shot and cross-shot pair histograms of the events inside `cut`.
pub fn pair_histogram_with(
    shots: &[Shot],
    cut: &VolumeCut,
    window: &PairWindow,
    binning: &Binning,
    options: &PairCountOptions,
) -> Result<PairCounts, CorrError> {
    window.validate()?;
    binning.validate()?;
    if !cut.is_valid() {
        return Err(CorrError::InvalidParameter(format!("cut `{}` has an empty radial band", cut.name)));
    }
    let groups = options.denominator_groups;
    if groups == 0 {
        return Err(CorrError::InvalidParameter("denominator_groups must be at least 1".into()));
    }
    if shots.len() > u32::MAX as usize {
        return Err(CorrError::InvalidParameter("too many shots".into()));
    }

    let mut pools: Vec<Vec<Tagged>> = vec![Vec::new(); groups];
    let mut shots_per_group = vec![0u64; groups];
    let mut surviving = 0usize;
    for (i, shot) in shots.iter().enumerate() {
        let g = (shot.shot_id % groups as u64) as usize;
        shots_per_group[g] += 1;
        let kept = apply_volume_cut(shot, cut);
        surviving += kept.events.len();
        pools[g].extend(kept.events.into_iter().map(|k| Tagged {
            k,
            along: k.component(window.axis),
            shot: i as u32,
            cell: (0, 0),
        }));
    }
    if surviving == 0 {
        return Err(CorrError::EmptySelection(cut.name.clone()));
    }

    let total = pools
        .into_par_iter()
        .map(|pool| count_pool(pool, window, binning))
        .reduce(|| Partial::new(binning.count), Partial::merge);

    Ok(PairCounts {
        window: *window,
        binning: *binning,
        numerator: total.numerator,
        denominator: total.denominator,
        n_shots: shots.len() as u64,
        shot_pairs: shots_per_group.iter().map(|m| m * m.saturating_sub(1) / 2).sum(),
        denominator_groups: groups,
        duplicate_pairs: total.duplicates,
    })
}

fn count_pool(mut pool: Vec<Tagged>, window: &PairWindow, binning: &Binning) -> Partial {
    let mut acc = Partial::new(binning.count);
    if pool.len() < SMALL_POOL {
        for (i, p) in pool.iter().enumerate() {
            for q in &pool[i + 1..] {
                acc.record(p, q, window, binning);
            }
        }
        return acc;
    }

    let [t1, t2] = window.axis.transverse();
    let cell = [window.transverse[0] * (1.0 + 1e-6), window.transverse[1] * (1.0 + 1e-6)];
    let cell_of = |k: Vec3| -> (i64, i64) {
        (
            (k.component(t1) / cell[0]).floor() as i64,
            (k.component(t2) / cell[1]).floor() as i64,
        )
    };
    for p in pool.iter_mut() {
        p.cell = cell_of(p.k);
    }
    pool.sort_unstable_by(|a, b| a.cell.cmp(&b.cell).then(a.along.total_cmp(&b.along)));

    // (cell, start, end) runs of the sorted pool
    let mut cells: Vec<((i64, i64), usize, usize)> = Vec::new();
    for (i, p) in pool.iter().enumerate() {
        let c = p.cell;
        match cells.last_mut() {
            Some((last, _, end)) if *last == c => *end = i + 1,
            _ => cells.push((c, i, i + 1)),
        }
    }

    let reach = binning.reach();
    let lookup = |c: (i64, i64)| -> Option<&[Tagged]> {
        cells
            .binary_search_by(|(key, _, _)| key.cmp(&c))
            .ok()
            .map(|i| &pool[cells[i].1..cells[i].2])
    };

    cells
        .par_iter()
        .fold(
            || Partial::new(binning.count),
            |mut acc, &((c1, c2), start, end)| {
                let own = &pool[start..end];
                for (i, p) in own.iter().enumerate() {
                    for q in &own[i + 1..] {
                        if q.along - p.along >= reach {
                            break;
                        }
                        acc.record(p, q, window, binning);
                    }
                }
                for offset in [(0, 1), (1, -1), (1, 0), (1, 1)] {
                    if let Some(other) = lookup((c1 + offset.0, c2 + offset.1)) {
                        sweep_cells(own, other, reach, window, binning, &mut acc);
                    }
                }
                acc
            },
        )
        .reduce(|| Partial::new(binning.count), Partial::merge)
}

/// All pairs between two distinct cells whose axis separation is below
/// `reach`; both slices sorted by `along`.
fn sweep_cells(
    a: &[Tagged],
    b: &[Tagged],
    reach: f64,
    window: &PairWindow,
    binning: &Binning,
    acc: &mut Partial,
) {
    let mut lo = 0;
    for p in a {
        while lo < b.len() && p.along - b[lo].along >= reach {
            lo += 1;
        }
        for q in &b[lo..] {
            if q.along - p.along >= reach {
                break;
            }
            acc.record(p, q, window, binning);
        }
    }
}
