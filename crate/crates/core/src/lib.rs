//! Simulation and analysis of momentum-resolved atom counting data from
//! superradiant emission: mode occupation statistics, synthetic shots,
//! second-order correlation estimators and shape fits.
//!
//! Momenta are in units of the recoil momentum k_rec throughout.

pub mod corr;
pub mod fitshapes;
pub mod modestats;
pub mod scenario;
pub mod synth;
pub mod vec3;

pub use vec3::{Axis, Vec3};
