use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::VolumeCut;
use crate::synth::Shot;
use crate::vec3::Vec3;

/// Projection plane for angular distributions. In the yz plane the dipole
/// axis sits at θ = 0, π and the endfire poles at ±π/2; the xz plane uses
/// the same polar convention with x in place of y.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Plane {
    Yz,
    Xz,
}

impl Plane {
    pub fn name(self) -> &'static str {
        match self {
            Plane::Yz => "yz",
            Plane::Xz => "xz",
        }
    }

    /// Component integrated over the slab.
    pub fn normal(self, k: Vec3) -> f64 {
        match self {
            Plane::Yz => k.x,
            Plane::Xz => k.y,
        }
    }

    pub fn angle(self, k: Vec3) -> f64 {
        match self {
            Plane::Yz => k.z.atan2(k.y),
            Plane::Xz => k.z.atan2(k.x),
        }
    }
}

/// Event counts per polar-angle bin over [−π, π).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleHistogram {
    pub plane: Plane,
    pub slab: f64,
    pub values: Vec<f64>,
    pub err68: Vec<f64>,
    pub n_shots: u64,
}

impl AngleHistogram {
    pub fn bin_width(&self) -> f64 {
        2.0 * PI / self.values.len() as f64
    }

    pub fn bin_centers(&self) -> Vec<f64> {
        let w = self.bin_width();
        (0..self.values.len()).map(|i| -PI + (i as f64 + 0.5) * w).collect()
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }
}

/// Angular histogram of the events with |k_normal| < `slab` inside `shell`.
/// Errors are Poisson, with empty bins given unit error.
pub fn angular_distribution(
    shots: &[Shot],
    plane: Plane,
    slab: f64,
    shell: &VolumeCut,
    n_bins: usize,
) -> AngleHistogram {
    let mut counts = vec![0u64; n_bins];
    let width = 2.0 * PI / n_bins as f64;
    for k in shots.iter().flat_map(|s| &s.events) {
        if plane.normal(*k).abs() < slab && shell.contains(*k) {
            let b = ((plane.angle(*k) + PI) / width).floor() as usize;
            counts[b.min(n_bins - 1)] += 1;
        }
    }
    AngleHistogram {
        plane,
        slab,
        values: counts.iter().map(|&c| c as f64).collect(),
        err68: counts.iter().map(|&c| (c.max(1) as f64).sqrt()).collect(),
        n_shots: shots.len() as u64,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn angle_convention() {
        assert!((Plane::Yz.angle(Vec3::new(0.0, 0.0, 1.0)) - PI / 2.0).abs() < 1e-15);
        assert!((Plane::Yz.angle(Vec3::new(0.0, 0.0, -1.0)) + PI / 2.0).abs() < 1e-15);
        assert_eq!(Plane::Yz.angle(Vec3::new(0.0, 1.0, 0.0)), 0.0);
        assert!((Plane::Xz.angle(Vec3::new(-1.0, 0.0, 0.0)).abs() - PI).abs() < 1e-15);
    }

    #[test]
    fn slab_and_shell_select() {
        let shots = [Shot {
            shot_id: 0,
            events: vec![
                Vec3::new(0.0, 0.0, 1.0),
                Vec3::new(0.2, 0.0, 1.0),
                Vec3::new(0.0, 0.0, 0.5),
                Vec3::new(0.05, 1.0, 0.0),
            ],
        }];
        let h = angular_distribution(&shots, Plane::Yz, 0.1, &VolumeCut::shell(0.8, 1.2), 4);
        assert_eq!(h.total(), 2.0);
        // +y at θ = 0 starts bin 2, +z at π/2 starts bin 3
        assert_eq!(h.values, vec![0.0, 0.0, 1.0, 1.0]);
        assert_eq!(h.err68, vec![1.0; 4]);
    }
}
