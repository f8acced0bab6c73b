//! Simulation and analysis toolkit for broadband EIT quantum memories in
//! warm alkali vapor.
//!
//! The crate is organised by subsystem:
//!
//! * [`domain`]: media, beams, pulses, grids and protocol timing.
//! * [`spectrum`]: pulse bandwidth from a zero-padded FFT.
//! * [`doppler`]: Gauss-Hermite velocity classes and Voigt helpers.
//! * [`solver`]: one-dimensional Maxwell-Bloch integration of write, dark time
//!   and read-out.
//! * [`optimizer`]: adjoint gradients and projected ascent on control pulses.
//! * [`sweep`]: parallel parameter sweeps and the detuning curve family.
//! * [`counting`]: photon-counting arithmetic and coherence contamination
//!   models.
//! * [`timetag`]: time-tag streams, arrival histograms and HBT correlators.
//! * [`config`]: TOML scenario files with `key=value` overrides.
//! * [`plot`]: a small SVG line-chart emitter.

pub mod config;
pub mod counting;
pub mod domain;
pub mod doppler;
pub mod error;
pub mod optimizer;
pub mod plot;
pub mod solver;
pub mod spectrum;
pub mod sweep;
pub mod timetag;

pub use error::{Error, Result};

pub type C64 = num_complex::Complex64;

/// Physical constants in SI units (CODATA 2018).
pub mod consts {
    pub const HBAR: f64 = 1.054_571_817e-34;
    pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
    pub const EPSILON_0: f64 = 8.854_187_812_8e-12;
    pub const TWO_PI: f64 = 2.0 * std::f64::consts::PI;
}
