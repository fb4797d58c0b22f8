use serde::{Deserialize, Serialize};

use crate::synth::Shot;
use crate::vec3::{Axis, Vec3};

/// Per-axis condition on one momentum component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AxisBound {
    /// |k_axis| < limit
    AbsBelow { axis: Axis, limit: f64 },
    /// |k_axis| > limit
    AbsAbove { axis: Axis, limit: f64 },
    /// lo < k_axis < hi
    Within { axis: Axis, lo: f64, hi: f64 },
}

impl AxisBound {
    pub fn contains(&self, k: Vec3) -> bool {
        match *self {
            AxisBound::AbsBelow { axis, limit } => k.component(axis).abs() < limit,
            AxisBound::AbsAbove { axis, limit } => k.component(axis).abs() > limit,
            AxisBound::Within { axis, lo, hi } => {
                let v = k.component(axis);
                lo < v && v < hi
            }
        }
    }
}

/// Named momentum-space selection: an optional radial band
/// `r_min <= |k| <= r_max` and any number of axis bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VolumeCut {
    pub name: String,
    #[serde(default)]
    pub radial: Option<(f64, f64)>,
    #[serde(default)]
    pub bounds: Vec<AxisBound>,
}

pub const SHELL_INNER: f64 = 0.8;
pub const SHELL_OUTER: f64 = 1.2;

impl VolumeCut {
    pub fn everything() -> Self {
        Self {
            name: "all".into(),
            radial: None,
            bounds: Vec::new(),
        }
    }

    pub fn shell(r_min: f64, r_max: f64) -> Self {
        Self {
            name: "shell".into(),
            radial: Some((r_min, r_max)),
            bounds: Vec::new(),
        }
    }

    /// Endfire peaks: |k_x| < 0.5, |k_y| < 0.5, |k_z| > 0.95, inside the shell.
    pub fn endfire_peaks() -> Self {
        Self {
            name: "peaks".into(),
            radial: Some((SHELL_INNER, SHELL_OUTER)),
            bounds: vec![
                AxisBound::AbsBelow { axis: Axis::X, limit: 0.5 },
                AxisBound::AbsBelow { axis: Axis::Y, limit: 0.5 },
                AxisBound::AbsAbove { axis: Axis::Z, limit: 0.95 },
            ],
        }
    }

    /// Scattering sphere away from the peaks: |k_z| < 0.92, inside the shell.
    pub fn sphere_away_from_peaks() -> Self {
        Self {
            name: "sphere".into(),
            radial: Some((SHELL_INNER, SHELL_OUTER)),
            bounds: vec![AxisBound::AbsBelow { axis: Axis::Z, limit: 0.92 }],
        }
    }

    /// Slab of total width `width` along z centred on a transferred cloud,
    /// unbounded in the xy plane.
    pub fn transferred_cloud(center_z: f64, width: f64) -> Self {
        Self {
            name: "raman".into(),
            radial: None,
            bounds: vec![AxisBound::Within {
                axis: Axis::Z,
                lo: center_z - width / 2.0,
                hi: center_z + width / 2.0,
            }],
        }
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn is_valid(&self) -> bool {
        match self.radial {
            Some((lo, hi)) => lo < hi,
            None => true,
        }
    }

    pub fn contains(&self, k: Vec3) -> bool {
        if let Some((lo, hi)) = self.radial {
            let r = k.norm();
            if !(lo <= r && r <= hi) {
                return false;
            }
        }
        self.bounds.iter().all(|b| b.contains(k))
    }
}

/// Events of `shot` inside `cut`, order preserved.
pub fn apply_volume_cut(shot: &Shot, cut: &VolumeCut) -> Shot {
    Shot {
        shot_id: shot.shot_id,
        events: shot.events.iter().copied().filter(|&k| cut.contains(k)).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(k: Vec3) -> Shot {
        Shot {
            shot_id: 0,
            events: vec![k],
        }
    }

    #[test]
    fn shell_band() {
        let shell = VolumeCut::shell(0.8, 1.2);
        assert_eq!(apply_volume_cut(&one(Vec3::new(0.0, 1.0, 0.0)), &shell).events.len(), 1);
        assert_eq!(apply_volume_cut(&one(Vec3::new(0.0, 0.5, 0.0)), &shell).events.len(), 0);
    }

    #[test]
    fn order_is_preserved() {
        let shot = Shot {
            shot_id: 3,
            events: vec![
                Vec3::new(0.0, 0.0, 1.0),
                Vec3::new(0.0, 0.0, 0.1),
                Vec3::new(0.0, 1.0, 0.0),
                Vec3::new(1.0, 0.0, 0.0),
            ],
        };
        let kept = apply_volume_cut(&shot, &VolumeCut::shell(0.8, 1.2));
        assert_eq!(kept.shot_id, 3);
        assert_eq!(kept.events, vec![shot.events[0], shot.events[2], shot.events[3]]);
    }

    #[test]
    fn peak_and_sphere_cuts_leave_only_a_guard_band() {
        let peaks = VolumeCut::endfire_peaks();
        let sphere = VolumeCut::sphere_away_from_peaks();
        let mut in_both = 0;
        let mut in_neither = 0;
        let n = 2001;
        for i in 0..n {
            // meridian in the yz plane
            let theta = std::f64::consts::PI * i as f64 / (n - 1) as f64;
            let k = Vec3::new(0.0, theta.sin(), theta.cos());
            let (p, s) = (peaks.contains(k), sphere.contains(k));
            if p && s {
                in_both += 1;
            }
            if !p && !s {
                in_neither += 1;
                assert!((0.92..=0.95).contains(&k.z.abs()), "gap at kz = {}", k.z);
            }
        }
        assert_eq!(in_both, 0);
        assert!(in_neither > 0);
    }

    #[test]
    fn transferred_cloud_slab() {
        let cut = VolumeCut::transferred_cloud(1.0, 0.1);
        assert!(cut.contains(Vec3::new(0.1, 0.0, 1.02)));
        assert!(!cut.contains(Vec3::new(0.0, 0.0, 1.06)));
        assert!(!cut.contains(Vec3::new(0.0, 0.0, 0.94)));
    }
}
