//! Physical parameter bookkeeping: the atomic medium, control beam, pulse
//! envelopes, simulation grid and storage protocol timing.
//!
//! Angular frequencies (detunings, decay rates, Rabi frequencies) are in
//! rad/s, times in s, frequencies quoted as "Hz" are cycles per second.

use serde::{Deserialize, Serialize};

use crate::consts::{EPSILON_0, HBAR, SPEED_OF_LIGHT, TWO_PI};
use crate::doppler;
use crate::error::{ensure_finite, ensure_non_negative, ensure_positive, Error, Result};
use crate::C64;

/// Natural linewidth of the Rb D1 line, Γ/2π in Hz.
pub const RB_D1_NATURAL_LINEWIDTH_HZ: f64 = 5.75e6;

/// Hyperfine splitting between F'=1 and F'=2 of the 87Rb 5P1/2 state, in Hz.
pub const RB87_D1_EXCITED_SPLITTING_HZ: f64 = 814.5e6;

/// Fraction of a raised-cosine edge spent between the 10 % and 90 % levels.
pub fn raised_cosine_10_90_fraction() -> f64 {
    1.0 - 2.0 * (0.8f64).acos() / std::f64::consts::PI
}

/// How the configured optical depth relates to the coupling strength.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OdConvention {
    /// `od` is the measured line-centre optical depth of the
    /// Doppler-broadened reference transition.
    #[default]
    DopplerBroadened,
    /// `od` is the optical depth the reference transition would have without
    /// inhomogeneous broadening.
    Homogeneous,
}

/// One excited hyperfine (or Zeeman) level reachable by the signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcitedLevel {
    pub label: String,
    /// Offset of this level from the reference excited level, rad/s.
    pub offset: f64,
    /// Share of the oscillator strength on the signal leg.
    pub f_signal: f64,
    /// Share of the oscillator strength on the control leg; zero for a
    /// parasitic absorber.
    pub f_control: f64,
    #[serde(default)]
    pub reference: bool,
}

impl ExcitedLevel {
    pub fn is_parasitic(&self) -> bool {
        self.f_control == 0.0 && self.f_signal > 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MediumSpec {
    pub od: f64,
    #[serde(default)]
    pub od_convention: OdConvention,
    /// Informational only; propagation uses the dimensionless coordinate.
    pub cell_length: f64,
    /// Excited-state coherence decay rate (HWHM), rad/s.
    pub gamma_e: f64,
    /// FWHM of the Gaussian Doppler detuning distribution, Hz.
    pub doppler_fwhm: f64,
    pub levels: Vec<ExcitedLevel>,
    /// Spin-wave decay rate during the pulses, rad/s.
    pub gamma_s: f64,
    /// 1/e lifetime of the Gaussian dark-time decay, s.
    pub lifetime_tau: f64,
}

impl MediumSpec {
    /// The level scheme of the 87Rb D1 line with atoms pumped into F=1.
    ///
    /// The F'=2 signal strength is split into a control-coupled part and
    /// a parasitic m_F'=0 share of `parasitic_fraction`.
    pub fn rb87_d1(od: f64, parasitic_fraction: f64) -> Result<Self> {
        let levels = rb87_d1_levels(parasitic_fraction)?;
        let medium = MediumSpec {
            od,
            od_convention: OdConvention::DopplerBroadened,
            cell_length: 37.5e-3,
            gamma_e: TWO_PI * RB_D1_NATURAL_LINEWIDTH_HZ / 2.0,
            doppler_fwhm: 500e6,
            levels,
            gamma_s: 0.0,
            lifetime_tau: 68e-9,
        };
        medium.validate()?;
        Ok(medium)
    }

    /// A single excited level without Doppler broadening.
    pub fn two_level(od: f64, gamma_e: f64) -> Result<Self> {
        let medium = MediumSpec {
            od,
            od_convention: OdConvention::DopplerBroadened,
            cell_length: 37.5e-3,
            gamma_e,
            doppler_fwhm: 0.0,
            levels: vec![ExcitedLevel {
                label: "F1".into(),
                offset: 0.0,
                f_signal: 1.0,
                f_control: 1.0,
                reference: true,
            }],
            gamma_s: 0.0,
            lifetime_tau: 68e-9,
        };
        medium.validate()?;
        Ok(medium)
    }

    pub fn validate(&self) -> Result<()> {
        ensure_positive("medium.od", self.od)?;
        ensure_non_negative("medium.cell_length", self.cell_length)?;
        ensure_positive("medium.gamma_e", self.gamma_e)?;
        ensure_non_negative("medium.doppler_fwhm", self.doppler_fwhm)?;
        ensure_non_negative("medium.gamma_s", self.gamma_s)?;
        ensure_positive("medium.lifetime_tau", self.lifetime_tau)?;
        if self.levels.is_empty() {
            return Err(Error::invalid("medium.levels", "at least one excited level required"));
        }
        let n_ref = self.levels.iter().filter(|l| l.reference).count();
        if n_ref != 1 {
            return Err(Error::invalid(
                "medium.levels",
                format!("exactly one reference level required, found {n_ref}"),
            ));
        }
        let mut total = 0.0;
        for level in &self.levels {
            ensure_finite("medium.levels.offset", level.offset)?;
            ensure_non_negative("medium.levels.f_signal", level.f_signal)?;
            ensure_non_negative("medium.levels.f_control", level.f_control)?;
            total += level.f_signal;
        }
        if total > 1.0 + 1e-12 {
            return Err(Error::invalid(
                "medium.levels",
                format!("signal branching fractions sum to {total} > 1"),
            ));
        }
        let reference = self.reference_level();
        if reference.f_signal <= 0.0 || reference.f_control <= 0.0 {
            return Err(Error::invalid(
                "medium.levels",
                "reference level must couple to both signal and control",
            ));
        }
        Ok(())
    }

    pub fn reference_level(&self) -> &ExcitedLevel {
        self.levels
            .iter()
            .find(|l| l.reference)
            .expect("validated medium has a reference level")
    }

    /// Copy of this medium with every parasitic absorber removed.
    pub fn without_parasitic(&self) -> Self {
        let mut m = self.clone();
        m.levels.retain(|l| !l.is_parasitic());
        m
    }

    /// Optical depth of the reference transition in the absence of Doppler
    /// broadening; this is what sets the atom-field coupling.
    pub fn homogeneous_od(&self) -> f64 {
        match self.od_convention {
            OdConvention::Homogeneous => self.od,
            OdConvention::DopplerBroadened => {
                let sigma = doppler::fwhm_to_sigma(self.doppler_fwhm) * TWO_PI;
                self.od / doppler::voigt_peak_factor(self.gamma_e, sigma)
            }
        }
    }
}

/// Default 87Rb D1 excited levels: F'=1 (reference), the control-coupled
/// part of F'=2, and the parasitic F'=2, m_F'=0 share.
pub fn rb87_d1_levels(parasitic_fraction: f64) -> Result<Vec<ExcitedLevel>> {
    ensure_non_negative("medium.parasitic_fraction", parasitic_fraction)?;
    if parasitic_fraction > 1.0 {
        return Err(Error::invalid("medium.parasitic_fraction", "must be <= 1"));
    }
    let offset = TWO_PI * RB87_D1_EXCITED_SPLITTING_HZ;
    let f2_signal = 5.0 / 6.0;
    let mut levels = vec![
        ExcitedLevel {
            label: "F1".into(),
            offset: 0.0,
            f_signal: 1.0 / 6.0,
            f_control: 0.5,
            reference: true,
        },
        ExcitedLevel {
            label: "F2".into(),
            offset,
            f_signal: f2_signal * (1.0 - parasitic_fraction),
            f_control: 0.5,
            reference: false,
        },
    ];
    if parasitic_fraction > 0.0 {
        levels.push(ExcitedLevel {
            label: "F2_m0_parasitic".into(),
            offset,
            f_signal: f2_signal * parasitic_fraction,
            f_control: 0.0,
            reference: false,
        });
    }
    Ok(levels)
}

/// Complex envelope sampled on a uniform time grid `t0 + n·dt`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseEnvelope {
    t0: f64,
    dt: f64,
    amplitude: Vec<C64>,
}

impl PulseEnvelope {
    pub fn new(t0: f64, dt: f64, amplitude: Vec<C64>) -> Result<Self> {
        ensure_finite("pulse.t0", t0)?;
        ensure_positive("pulse.dt", dt)?;
        if amplitude.is_empty() {
            return Err(Error::invalid("pulse.amplitude", "no samples"));
        }
        if let Some(i) = amplitude.iter().position(|a| !(a.re.is_finite() && a.im.is_finite())) {
            return Err(Error::invalid("pulse.amplitude", format!("sample {i} is not finite")));
        }
        Ok(PulseEnvelope { t0, dt, amplitude })
    }

    pub fn zeros(t0: f64, dt: f64, len: usize) -> Result<Self> {
        Self::new(t0, dt, vec![C64::new(0.0, 0.0); len])
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.amplitude.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitude.is_empty()
    }

    pub fn amplitude(&self) -> &[C64] {
        &self.amplitude
    }

    pub fn amplitude_mut(&mut self) -> &mut [C64] {
        &mut self.amplitude
    }

    pub fn into_amplitude(self) -> Vec<C64> {
        self.amplitude
    }

    pub fn time(&self, n: usize) -> f64 {
        self.t0 + n as f64 * self.dt
    }

    pub fn t_grid(&self) -> Vec<f64> {
        (0..self.len()).map(|n| self.time(n)).collect()
    }

    pub fn t_end(&self) -> f64 {
        self.time(self.len() - 1)
    }

    /// Rectangle-rule energy `Σ|a|²·dt`.
    pub fn energy(&self) -> f64 {
        self.amplitude.iter().map(|a| a.norm_sqr()).sum::<f64>() * self.dt
    }

    pub fn peak(&self) -> f64 {
        self.amplitude.iter().map(|a| a.norm()).fold(0.0, f64::max)
    }

    /// Linear interpolation; zero outside the sampled interval.
    pub fn value_at(&self, t: f64) -> C64 {
        let x = (t - self.t0) / self.dt;
        let last = (self.len() - 1) as f64;
        if !(x >= 0.0 && x <= last) {
            return C64::new(0.0, 0.0);
        }
        let i = x.floor() as usize;
        if i + 1 >= self.len() {
            return self.amplitude[self.len() - 1];
        }
        let frac = x - i as f64;
        self.amplitude[i] * (1.0 - frac) + self.amplitude[i + 1] * frac
    }

    pub fn shifted(&self, by: f64) -> Self {
        PulseEnvelope {
            t0: self.t0 + by,
            dt: self.dt,
            amplitude: self.amplitude.clone(),
        }
    }

    pub fn scaled(&self, factor: C64) -> Self {
        PulseEnvelope {
            t0: self.t0,
            dt: self.dt,
            amplitude: self.amplitude.iter().map(|a| a * factor).collect(),
        }
    }

    /// Same samples on a time axis stretched by `factor`.
    pub fn time_stretched(&self, factor: f64) -> Self {
        PulseEnvelope {
            t0: self.t0 * factor,
            dt: self.dt * factor,
            amplitude: self.amplitude.clone(),
        }
    }

    /// The detected intensity trace |a(t)|² as a real envelope.
    pub fn intensity_trace(&self) -> Self {
        PulseEnvelope {
            t0: self.t0,
            dt: self.dt,
            amplitude: self.amplitude.iter().map(|a| C64::new(a.norm_sqr(), 0.0)).collect(),
        }
    }

    /// Rescales so that `energy() == 1`.
    pub fn normalized(&self) -> Result<Self> {
        let e = self.energy();
        if e <= 0.0 {
            return Err(Error::Domain("cannot normalize an envelope with zero energy".into()));
        }
        Ok(self.scaled(C64::new(1.0 / e.sqrt(), 0.0)))
    }

    /// Sample-wise sum with another envelope on the same grid.
    pub fn try_add(&self, other: &PulseEnvelope) -> Result<Self> {
        if self.len() != other.len()
            || (self.dt - other.dt).abs() > 1e-12 * self.dt
            || (self.t0 - other.t0).abs() > 1e-9 * self.dt
        {
            return Err(Error::ShapeMismatch("envelopes live on different grids".into()));
        }
        Ok(PulseEnvelope {
            t0: self.t0,
            dt: self.dt,
            amplitude: self
                .amplitude
                .iter()
                .zip(&other.amplitude)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ControlBeam {
    /// Peak power, W.
    pub power_peak: f64,
    /// e⁻² intensity diameter, m.
    pub waist_diameter_e2: f64,
    /// Transition dipole moment, C·m.
    pub dipole_moment: f64,
}

impl ControlBeam {
    pub fn validate(&self) -> Result<()> {
        ensure_positive("beam.power_peak", self.power_peak)?;
        ensure_positive("beam.waist_diameter_e2", self.waist_diameter_e2)?;
        ensure_positive("beam.dipole_moment", self.dipole_moment)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimGrid {
    pub nz: usize,
    pub nt: usize,
    pub n_velocity: usize,
    pub t_span: (f64, f64),
}

impl SimGrid {
    pub fn new(nz: usize, nt: usize, n_velocity: usize, t_span: (f64, f64)) -> Result<Self> {
        let grid = SimGrid {
            nz,
            nt,
            n_velocity,
            t_span,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nz < 2 {
            return Err(Error::invalid("grid.nz", "need at least 2 spatial points"));
        }
        if self.nt < 2 {
            return Err(Error::invalid("grid.nt", "need at least 2 time points"));
        }
        if self.n_velocity < 1 {
            return Err(Error::invalid("grid.n_velocity", "need at least one velocity class"));
        }
        ensure_finite("grid.t_start", self.t_span.0)?;
        ensure_finite("grid.t_end", self.t_span.1)?;
        if self.t_span.1 <= self.t_span.0 {
            return Err(Error::invalid("grid.t_span", "t_end must exceed t_start"));
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        (self.t_span.1 - self.t_span.0) / (self.nt - 1) as f64
    }

    pub fn time(&self, n: usize) -> f64 {
        self.t_span.0 + n as f64 * self.dt()
    }

    pub fn dz(&self) -> f64 {
        1.0 / (self.nz - 1) as f64
    }

    pub fn shifted(&self, by: f64) -> Self {
        SimGrid {
            t_span: (self.t_span.0 + by, self.t_span.1 + by),
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolTiming {
    pub storage_control_center: f64,
    pub retrieval_control_center: f64,
    /// Dark time used by the Gaussian decay factor, s.
    pub storage_time: f64,
    pub retrieval_window: (f64, f64),
}

impl ProtocolTiming {
    /// Read pulse `storage_time` after the write pulse, with the default
    /// window `[read − 10 ns, read + 25 ns]`.
    pub fn new(storage_control_center: f64, storage_time: f64) -> Result<Self> {
        let read = storage_control_center + storage_time;
        let timing = ProtocolTiming {
            storage_control_center,
            retrieval_control_center: read,
            storage_time,
            retrieval_window: (read - 10e-9, read + 25e-9),
        };
        timing.validate()?;
        Ok(timing)
    }

    pub fn validate(&self) -> Result<()> {
        ensure_finite("protocol.storage_control_center", self.storage_control_center)?;
        ensure_finite("protocol.retrieval_control_center", self.retrieval_control_center)?;
        ensure_non_negative("protocol.storage_time", self.storage_time)?;
        ensure_finite("protocol.retrieval_window.0", self.retrieval_window.0)?;
        ensure_finite("protocol.retrieval_window.1", self.retrieval_window.1)?;
        if self.retrieval_control_center <= self.storage_control_center {
            return Err(Error::invalid(
                "protocol.retrieval_control_center",
                "read pulse must come after the write pulse",
            ));
        }
        if self.retrieval_window.1 <= self.retrieval_window.0 {
            return Err(Error::invalid("protocol.retrieval_window", "t_b must exceed t_a"));
        }
        Ok(())
    }

    /// Instant separating the write and read phases.
    pub fn dark_midpoint(&self) -> f64 {
        0.5 * (self.storage_control_center + self.retrieval_control_center)
    }

    pub fn shifted(&self, by: f64) -> Self {
        ProtocolTiming {
            storage_control_center: self.storage_control_center + by,
            retrieval_control_center: self.retrieval_control_center + by,
            storage_time: self.storage_time,
            retrieval_window: (self.retrieval_window.0 + by, self.retrieval_window.1 + by),
        }
    }

    /// Amplitude factor applied to the spin wave over the dark time.
    pub fn dark_decay_amplitude(&self, lifetime_tau: f64) -> f64 {
        let x = self.storage_time / lifetime_tau;
        (-0.5 * x * x).exp()
    }
}

/// Raised-cosine flat-top profile as a function of the offset `x` from the
/// pulse centre; each edge is measured from its own end of the pulse.
fn raised_cosine_profile(x: f64, rise_edge: f64, flat_top: f64, fall_edge: f64) -> f64 {
    use std::f64::consts::PI;
    let half = 0.5 * (rise_edge + flat_top + fall_edge);
    let from_start = half + x;
    let from_end = half - x;
    if from_start <= 0.0 || from_end <= 0.0 {
        0.0
    } else if from_start < rise_edge {
        0.5 * (1.0 - (PI * from_start / rise_edge).cos())
    } else if from_end < fall_edge {
        0.5 * (1.0 - (PI * from_end / fall_edge).cos())
    } else {
        1.0
    }
}

/// Flat-topped signal pulse with raised-cosine edges, normalized to unit
/// energy. The edge widths are the 10-90 % amplitude transition times; the
/// pulse starts at t = 0 and the sample grid is centred on the pulse.
pub fn make_signal_pulse(rise_10_90: f64, fall_90_10: f64, flat_top: f64, dt: f64) -> Result<PulseEnvelope> {
    ensure_positive("signal.rise_10_90", rise_10_90)?;
    ensure_positive("signal.fall_90_10", fall_90_10)?;
    ensure_non_negative("signal.flat_top", flat_top)?;
    ensure_positive("signal.dt", dt)?;
    let limit = rise_10_90.min(fall_90_10) / 10.0;
    if dt > limit * (1.0 + 1e-12) {
        return Err(Error::GridTooCoarse { dt, limit });
    }
    let frac = raised_cosine_10_90_fraction();
    let rise_edge = rise_10_90 / frac;
    let fall_edge = fall_90_10 / frac;
    let total = rise_edge + flat_top + fall_edge;
    let n = (total / dt).ceil() as usize + 1;
    let mid = 0.5 * (n - 1) as f64;
    let t0 = 0.5 * total - mid * dt;
    let amplitude = (0..n)
        .map(|i| {
            let x = (i as f64 - mid) * dt;
            C64::new(raised_cosine_profile(x, rise_edge, flat_top, fall_edge), 0.0)
        })
        .collect();
    PulseEnvelope::new(t0, dt, amplitude)?.normalized()
}

pub fn gaussian_profile(t: f64, center: f64, fwhm: f64) -> f64 {
    let x = (t - center) / fwhm;
    (-4.0 * std::f64::consts::LN_2 * x * x).exp()
}

/// Real Gaussian control pulse Ω(t) sampled on the simulation grid.
pub fn make_gaussian_control(fwhm: f64, center: f64, peak_rabi: f64, grid: &SimGrid) -> Result<PulseEnvelope> {
    ensure_positive("control.fwhm", fwhm)?;
    ensure_finite("control.center", center)?;
    ensure_finite("control.peak_rabi", peak_rabi)?;
    grid.validate()?;
    if center < grid.t_span.0 || center > grid.t_span.1 {
        return Err(Error::invalid("control.center", "must lie inside the grid time span"));
    }
    let amplitude = (0..grid.nt)
        .map(|n| C64::new(peak_rabi * gaussian_profile(grid.time(n), center, fwhm), 0.0))
        .collect();
    PulseEnvelope::new(grid.t_span.0, grid.dt(), amplitude)
}

/// Identical Gaussian write and read pulses at the protocol's two centres.
pub fn make_write_read_control(
    fwhm: f64,
    peak_rabi: f64,
    timing: &ProtocolTiming,
    grid: &SimGrid,
) -> Result<PulseEnvelope> {
    let write = make_gaussian_control(fwhm, timing.storage_control_center, peak_rabi, grid)?;
    let read = make_gaussian_control(fwhm, timing.retrieval_control_center, peak_rabi, grid)?;
    write.try_add(&read)
}

/// Peak Rabi frequency Ω = d·E/ħ of a Gaussian beam, rad/s.
pub fn rabi_from_beam(beam: &ControlBeam) -> Result<f64> {
    beam.validate()?;
    let w = beam.waist_diameter_e2 / 2.0;
    let intensity = 2.0 * beam.power_peak / (std::f64::consts::PI * w * w);
    let e_peak = (2.0 * intensity / (SPEED_OF_LIGHT * EPSILON_0)).sqrt();
    Ok(beam.dipole_moment * e_peak / HBAR)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn signal_pulse_is_normalized_and_nonnegative() {
        let p = make_signal_pulse(0.5e-9, 1.0e-9, 0.3e-9, 10e-12).unwrap();
        assert!((p.energy() - 1.0).abs() < 1e-9);
        assert!(p.amplitude().iter().all(|a| a.im == 0.0 && a.re >= 0.0));
    }

    #[test]
    fn signal_pulse_is_unimodal() {
        let p = make_signal_pulse(0.5e-9, 1.0e-9, 0.2e-9, 5e-12).unwrap();
        let a: Vec<f64> = p.amplitude().iter().map(|a| a.re).collect();
        let peak = a.iter().cloned().fold(f64::MIN, f64::max);
        let i_peak = a.iter().position(|&x| x == peak).unwrap();
        assert!(a[..=i_peak].windows(2).all(|w| w[1] >= w[0]));
        // after the flat top the envelope never rises again
        let last_top = a.iter().rposition(|&x| x == peak).unwrap();
        assert!(a[last_top..].windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn symmetric_signal_pulse_equals_its_reverse() {
        let p = make_signal_pulse(0.5e-9, 0.5e-9, 0.0, 25e-12).unwrap();
        let a = p.amplitude();
        let n = a.len();
        for i in 0..n {
            assert!((a[i] - a[n - 1 - i]).norm() < 1e-12);
        }
    }

    #[test]
    fn signal_pulse_edges_have_requested_10_90_times() {
        let p = make_signal_pulse(0.5e-9, 1.0e-9, 0.4e-9, 1e-12).unwrap();
        let a: Vec<f64> = p.amplitude().iter().map(|a| a.re).collect();
        let peak = a.iter().cloned().fold(0.0, f64::max);
        let crossing = |level: f64, rising: bool| -> f64 {
            let idx = if rising {
                a.iter().position(|&x| x >= level * peak).unwrap()
            } else {
                a.iter().rposition(|&x| x >= level * peak).unwrap()
            };
            p.time(idx)
        };
        let rise = crossing(0.9, true) - crossing(0.1, true);
        let fall = crossing(0.1, false) - crossing(0.9, false);
        assert!((rise - 0.5e-9).abs() < 3e-12, "rise {rise}");
        assert!((fall - 1.0e-9).abs() < 3e-12, "fall {fall}");
    }

    #[test]
    fn coarse_grid_is_rejected() {
        assert!(matches!(
            make_signal_pulse(0.5e-9, 1.0e-9, 0.0, 60e-12),
            Err(Error::GridTooCoarse { .. })
        ));
    }

    #[test]
    fn constructors_reject_non_finite_inputs() {
        assert!(make_signal_pulse(f64::NAN, 1e-9, 0.0, 1e-12).is_err());
        let grid = SimGrid::new(4, 101, 1, (0.0, 10e-9)).unwrap();
        assert!(make_gaussian_control(5e-9, 5e-9, f64::INFINITY, &grid).is_err());
        assert!(PulseEnvelope::new(0.0, 1e-12, vec![C64::new(f64::NAN, 0.0)]).is_err());
        assert!(SimGrid::new(4, 101, 1, (0.0, f64::NAN)).is_err());
        assert!(MediumSpec::two_level(f64::NAN, 1e7).is_err());
        let beam = ControlBeam {
            power_peak: f64::NAN,
            waist_diameter_e2: 525e-6,
            dipole_moment: 2.54e-29,
        };
        assert!(rabi_from_beam(&beam).is_err());
    }

    #[test]
    fn gaussian_control_peak_and_half_width() {
        // 1 ps spacing puts centre and centre ± fwhm/2 on grid points
        let grid = SimGrid::new(4, 20_001, 1, (-10e-9, 10e-9)).unwrap();
        let peak = TWO_PI * 600e6;
        let c = make_gaussian_control(5e-9, 0.0, peak, &grid).unwrap();
        let max = c.peak();
        assert!((max - peak).abs() <= peak * f64::EPSILON * 4.0);
        for t in [-2.5e-9, 2.5e-9] {
            assert_relative_eq!(c.value_at(t).re, peak / 2.0, max_relative = 1e-9);
        }
        let zero = make_gaussian_control(5e-9, 0.0, 0.0, &grid).unwrap();
        assert!(zero.amplitude().iter().all(|a| *a == C64::new(0.0, 0.0)));
    }

    #[test]
    fn control_center_outside_grid_is_rejected() {
        let grid = SimGrid::new(4, 101, 1, (0.0, 10e-9)).unwrap();
        assert!(make_gaussian_control(5e-9, 20e-9, 1.0, &grid).is_err());
    }

    #[test]
    fn rabi_scales_with_sqrt_power_and_dipole() {
        let beam = ControlBeam {
            power_peak: 0.12,
            waist_diameter_e2: 525e-6,
            dipole_moment: 2.54e-29,
        };
        let base = rabi_from_beam(&beam).unwrap();
        let quad = rabi_from_beam(&ControlBeam {
            power_peak: 0.48,
            ..beam
        })
        .unwrap();
        assert_relative_eq!(quad, 2.0 * base, max_relative = 1e-12);
        let small = rabi_from_beam(&ControlBeam {
            dipole_moment: 2.54e-35,
            ..beam
        })
        .unwrap();
        assert_relative_eq!(small, base * 1e-6, max_relative = 1e-12);
    }

    #[test]
    fn medium_validation() {
        let m = MediumSpec::rb87_d1(5.0, 1.0 / 3.0).unwrap();
        assert_eq!(m.levels.len(), 3);
        let total: f64 = m.levels.iter().map(|l| l.f_signal).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert_eq!(m.without_parasitic().levels.len(), 2);

        let mut bad = m.clone();
        bad.levels[1].reference = true;
        assert!(bad.validate().is_err());
        let mut bad = m.clone();
        bad.levels[1].f_signal = 0.9;
        assert!(bad.validate().is_err());
        let mut bad = m;
        bad.lifetime_tau = 0.0;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn homogeneous_od_exceeds_doppler_od() {
        let m = MediumSpec::rb87_d1(5.0, 1.0 / 3.0).unwrap();
        assert!(m.homogeneous_od() > 100.0);
        let mut h = m.clone();
        h.od_convention = OdConvention::Homogeneous;
        assert_eq!(h.homogeneous_od(), 5.0);
    }

    #[test]
    fn protocol_timing_defaults() {
        let t = ProtocolTiming::new(0.0, 50e-9).unwrap();
        assert_eq!(t.retrieval_control_center, 50e-9);
        assert!((t.retrieval_window.0 - 40e-9).abs() < 1e-18);
        assert!((t.retrieval_window.1 - 75e-9).abs() < 1e-18);
        assert_relative_eq!(
            ProtocolTiming::new(0.0, 68e-9).unwrap().dark_decay_amplitude(68e-9).powi(2),
            (-1.0f64).exp()
        );
    }
}
