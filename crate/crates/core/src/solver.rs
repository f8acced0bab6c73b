//! One-dimensional Maxwell-Bloch integration of EIT storage and retrieval in
//! a Doppler-broadened multi-level Λ medium.
//!
//! Propagation uses the co-moving frame and the dimensionless cell
//! coordinate ζ ∈ [0, 1]. For velocity class v (detuning shift δ_v, weight
//! w_v) and excited level k:
//!
//! ```text
//! ∂ζ E     = i Σ_v w_v Σ_k √d_k P_vk
//! ∂t P_vk  = −(γ_e + i(Δ − Δ_k + δ_v)) P_vk + i √d_k γ_e E + i f_k Ω S_v
//! ∂t S_v   = −γ_s S_v + i Ω* Σ_k f_k P_vk
//! ```
//!
//! `d_k` is the amplitude coupling, half the intensity optical depth of level
//! k, and `f_k` the relative control coupling. At each time step the field is
//! obtained from the polarisation by cumulative trapezoidal integration in ζ,
//! which turns the system into an ODE for (P, S) advanced with classical RK4.
//! Between the write and read pulses the spin wave is multiplied by the
//! Gaussian dark-time decay factor. When the Doppler distribution has
//! dephased the optical coherence by then, P is cleared at the same instant:
//! a finite set of velocity classes would otherwise rephase and re-emit,
//! which the continuous distribution never does.

use serde::Serialize;

use crate::domain::{MediumSpec, ProtocolTiming, PulseEnvelope, SimGrid};
use crate::doppler::VelocityClasses;
use crate::error::{Error, Result};
use crate::C64;

/// States larger than this (in units of the peak input amplitude) signal a
/// step-size violation.
pub const INSTABILITY_THRESHOLD: f64 = 1e6;

/// Optical coherence is treated as fully dephased at the dark midpoint when
/// σ_D·(T/2) exceeds this; the continuous-distribution residue is then
/// exp(−σ_D²T²/8) < 1e-7.
pub const DEPHASING_THRESHOLD: f64 = 6.0;

const I: C64 = C64 { re: 0.0, im: 1.0 };
const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Snapshot of the full dynamical state at one instant.
#[derive(Debug, Clone, Serialize)]
pub struct FieldState {
    pub nz: usize,
    pub n_velocity: usize,
    pub n_levels: usize,
    /// E(ζ_i).
    pub e_field: Vec<C64>,
    /// P_{v,k}(ζ_i) at index `(i·n_velocity + v)·n_levels + k`.
    pub polarization: Vec<C64>,
    /// S_v(ζ_i) at index `i·n_velocity + v`.
    pub spin_wave: Vec<C64>,
}

impl FieldState {
    pub fn spin_wave_profile(&self, v: usize) -> Vec<C64> {
        (0..self.nz).map(|i| self.spin_wave[i * self.n_velocity + v]).collect()
    }

    fn is_finite(&self) -> bool {
        self.e_field
            .iter()
            .chain(&self.polarization)
            .chain(&self.spin_wave)
            .all(|c| c.re.is_finite() && c.im.is_finite())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MemoryResult {
    /// Spin-wave excitation at the end of the write phase per input photon.
    pub eta_storage: f64,
    /// Output energy inside the retrieval window per input photon.
    pub eta_total: f64,
    /// Output energy leaving the cell during the write phase.
    pub leakage: f64,
    /// Retrieved field E(ζ = 1, t) on the simulation grid.
    pub e_out: PulseEnvelope,
    /// State at the end of the write phase, before the dark-time decay.
    pub stored: FieldState,
}

impl MemoryResult {
    /// S_v(ζ) after storage, one profile per velocity class.
    pub fn s_profile(&self) -> Vec<Vec<C64>> {
        (0..self.stored.n_velocity).map(|v| self.stored.spin_wave_profile(v)).collect()
    }
}

/// Coefficients of the linear (P, S) system for one detuning.
#[derive(Debug, Clone)]
pub(crate) struct Model {
    pub nz: usize,
    pub nv: usize,
    pub nk: usize,
    pub stride: usize,
    pub h: f64,
    pub gamma_s: f64,
    /// −(γ_e + i(Δ − Δ_k + δ_v)), index `v·nk + k`.
    pub rates: Vec<C64>,
    /// i √d_k γ_e.
    pub couple_in: Vec<C64>,
    /// i w_v √d_k, index `v·nk + k`.
    pub src_coef: Vec<C64>,
    pub f_control: Vec<f64>,
    pub weights: Vec<f64>,
    pub gamma_e: f64,
}

impl Model {
    pub fn new(medium: &MediumSpec, grid: &SimGrid, delta: f64) -> Result<Self> {
        medium.validate()?;
        grid.validate()?;
        if !delta.is_finite() {
            return Err(Error::invalid("delta", "must be finite"));
        }
        let classes = VelocityClasses::gaussian(medium.doppler_fwhm, grid.n_velocity);
        let reference = medium.reference_level();
        // amplitude coupling of the reference line: intensity OD / 2
        let d_ref = 0.5 * medium.homogeneous_od();
        let nk = medium.levels.len();
        let nv = classes.len();
        let sqrt_d: Vec<f64> = medium
            .levels
            .iter()
            .map(|l| (d_ref * l.f_signal / reference.f_signal).sqrt())
            .collect();
        let f_control: Vec<f64> = medium
            .levels
            .iter()
            .map(|l| (l.f_control / reference.f_control).sqrt())
            .collect();
        let mut rates = Vec::with_capacity(nv * nk);
        let mut src_coef = Vec::with_capacity(nv * nk);
        for (&dv, &wv) in classes.detunings.iter().zip(&classes.weights) {
            for (level, &sd) in medium.levels.iter().zip(&sqrt_d) {
                rates.push(-C64::new(medium.gamma_e, delta - level.offset + dv));
                src_coef.push(I * (wv * sd));
            }
        }
        Ok(Model {
            nz: grid.nz,
            nv,
            nk,
            stride: nv * nk + nv,
            h: grid.dz(),
            gamma_s: medium.gamma_s,
            rates,
            couple_in: sqrt_d.iter().map(|&sd| I * (sd * medium.gamma_e)).collect(),
            src_coef,
            f_control,
            weights: classes.weights,
            gamma_e: medium.gamma_e,
        })
    }

    pub fn state_len(&self) -> usize {
        self.nz * self.stride
    }

    /// Trapezoid weight of spatial point `z` for ∫₀¹ dζ.
    pub fn trap_weight(&self, z: usize) -> f64 {
        if z == 0 || z == self.nz - 1 {
            0.5 * self.h
        } else {
            self.h
        }
    }

    #[inline]
    fn source(&self, y: &[C64], z: usize) -> C64 {
        let np = self.nv * self.nk;
        let base = z * self.stride;
        y[base..base + np]
            .iter()
            .zip(&self.src_coef)
            .fold(ZERO, |acc, (p, c)| acc + p * c)
    }

    /// Fills `e` with E(ζ_z) for input amplitude `e_in`.
    pub fn field(&self, e_in: C64, y: &[C64], e: &mut [C64]) {
        let half_h = 0.5 * self.h;
        let mut prev = ZERO;
        for z in 0..self.nz {
            let src = self.source(y, z);
            e[z] = if z == 0 { e_in } else { e[z - 1] + (prev + src) * half_h };
            prev = src;
        }
    }

    pub fn output_field(&self, e_in: C64, y: &[C64]) -> C64 {
        let mut acc = ZERO;
        for z in 0..self.nz {
            acc += self.source(y, z) * self.trap_weight(z);
        }
        e_in + acc
    }

    /// dy = L(Ω) y + (source from e_in).
    pub fn rhs(&self, omega: C64, e_in: C64, y: &[C64], dy: &mut [C64], scratch: &mut Scratch) {
        self.field(e_in, y, &mut scratch.e);
        let np = self.nv * self.nk;
        for (k, f) in self.f_control.iter().enumerate() {
            scratch.om_p[k] = I * omega * *f;
        }
        let om_s = I * omega.conj();
        for z in 0..self.nz {
            let base = z * self.stride;
            let ez = scratch.e[z];
            for k in 0..self.nk {
                scratch.drive[k] = self.couple_in[k] * ez;
            }
            for v in 0..self.nv {
                let s = y[base + np + v];
                let mut acc = ZERO;
                let off = v * self.nk;
                for k in 0..self.nk {
                    let p = y[base + off + k];
                    dy[base + off + k] = self.rates[off + k] * p + scratch.drive[k] + scratch.om_p[k] * s;
                    acc += p * self.f_control[k];
                }
                dy[base + np + v] = s * (-self.gamma_s) + om_s * acc;
            }
        }
    }

    /// out = L(Ω)ᴴ a, the adjoint of the homogeneous part of [`Model::rhs`]
    /// under the real inner product Re⟨·,·⟩.
    pub fn rhs_adjoint(&self, omega: C64, a: &[C64], out: &mut [C64], scratch: &mut Scratch) {
        let np = self.nv * self.nk;
        // B(z) = Σ conj(i √d_k γ) a_P(z), then C(j) = Σ_z K_zj B(z)
        for z in 0..self.nz {
            let base = z * self.stride;
            let mut b = ZERO;
            for v in 0..self.nv {
                let off = base + v * self.nk;
                for k in 0..self.nk {
                    b += a[off + k] * self.couple_in[k].conj();
                }
            }
            scratch.e[z] = b;
        }
        // suffix sums over z > j
        let mut suffix = ZERO;
        let half_h = 0.5 * self.h;
        for j in (0..self.nz).rev() {
            let bj = scratch.e[j];
            let cj = if j == 0 { suffix * half_h } else { bj * half_h + suffix * self.h };
            suffix += bj;
            scratch.c[j] = cj;
        }
        for (k, f) in self.f_control.iter().enumerate() {
            // conj(i f Ω) and conj(i Ω*) f
            scratch.om_p[k] = (I * omega * *f).conj();
            scratch.drive[k] = (I * omega.conj() * *f).conj();
        }
        for z in 0..self.nz {
            let base = z * self.stride;
            let cz = scratch.c[z];
            for v in 0..self.nv {
                let a_s = a[base + np + v];
                let off = v * self.nk;
                let mut acc_s = a_s * (-self.gamma_s);
                for k in 0..self.nk {
                    let ap = a[base + off + k];
                    out[base + off + k] =
                        self.rates[off + k].conj() * ap + self.src_coef[off + k].conj() * cz + scratch.drive[k] * a_s;
                    acc_s += scratch.om_p[k] * ap;
                }
                out[base + np + v] = acc_s;
            }
        }
    }

    /// Derivatives of Re⟨a, L(Ω) y⟩ with respect to Re Ω and Im Ω.
    pub fn omega_sensitivity(&self, a: &[C64], y: &[C64]) -> (f64, f64) {
        let np = self.nv * self.nk;
        // ∂/∂ReΩ: P ← i f S, S ← i Σ f P ;  ∂/∂ImΩ: P ← −f S, S ← Σ f P
        let mut x = ZERO; // Σ conj(aP) f S
        let mut w = ZERO; // Σ conj(aS) Σ f P
        for z in 0..self.nz {
            let base = z * self.stride;
            for v in 0..self.nv {
                let s = y[base + np + v];
                let a_s = a[base + np + v];
                let off = base + v * self.nk;
                let mut fp = ZERO;
                let mut afs = ZERO;
                for k in 0..self.nk {
                    let f = self.f_control[k];
                    afs += a[off + k].conj() * f;
                    fp += y[off + k] * f;
                }
                x += afs * s;
                w += a_s.conj() * fp;
            }
        }
        let d_re = (I * x).re + (I * w).re;
        let d_im = -x.re + w.re;
        (d_re, d_im)
    }

    /// Conjugate gradient of E_out with respect to the state: δE_out =
    /// Σ_j g_j δy_j with `g_j` written into `out` (S entries zero).
    pub fn output_coefficients(&self, out: &mut [C64]) {
        out.iter_mut().for_each(|c| *c = ZERO);
        let np = self.nv * self.nk;
        for z in 0..self.nz {
            let wz = self.trap_weight(z);
            let base = z * self.stride;
            for j in 0..np {
                out[base + j] = self.src_coef[j] * wz;
            }
        }
    }

    pub fn snapshot(&self, e_in: C64, y: &[C64], scale: f64) -> FieldState {
        let mut e = vec![ZERO; self.nz];
        self.field(e_in, y, &mut e);
        let np = self.nv * self.nk;
        let mut polarization = Vec::with_capacity(self.nz * np);
        let mut spin_wave = Vec::with_capacity(self.nz * self.nv);
        for z in 0..self.nz {
            let base = z * self.stride;
            polarization.extend(y[base..base + np].iter().map(|c| c * scale));
            spin_wave.extend(y[base + np..base + self.stride].iter().map(|c| c * scale));
        }
        FieldState {
            nz: self.nz,
            n_velocity: self.nv,
            n_levels: self.nk,
            e_field: e.into_iter().map(|c| c * scale).collect(),
            polarization,
            spin_wave,
        }
    }

    /// Σ_v w_v ∫ |S_v|² dζ / γ_e.
    pub fn spin_wave_energy(&self, y: &[C64]) -> f64 {
        let np = self.nv * self.nk;
        let mut acc = 0.0;
        for z in 0..self.nz {
            let base = z * self.stride + np;
            let row: f64 = (0..self.nv).map(|v| self.weights[v] * y[base + v].norm_sqr()).sum();
            acc += self.trap_weight(z) * row;
        }
        acc / self.gamma_e
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Scratch {
    pub e: Vec<C64>,
    pub c: Vec<C64>,
    pub om_p: Vec<C64>,
    pub drive: Vec<C64>,
}

impl Scratch {
    pub fn new(model: &Model) -> Self {
        Scratch {
            e: vec![ZERO; model.nz],
            c: vec![ZERO; model.nz],
            om_p: vec![ZERO; model.nk],
            drive: vec![ZERO; model.nk],
        }
    }
}

/// RK4 work buffers.
#[derive(Debug, Clone)]
pub(crate) struct Stages {
    pub k: [Vec<C64>; 4],
    pub tmp: Vec<C64>,
    pub scratch: Scratch,
}

impl Stages {
    pub fn new(model: &Model) -> Self {
        let n = model.state_len();
        Stages {
            k: [vec![ZERO; n], vec![ZERO; n], vec![ZERO; n], vec![ZERO; n]],
            tmp: vec![ZERO; n],
            scratch: Scratch::new(model),
        }
    }
}

/// A fully specified storage-and-retrieval run, with the input amplitude
/// rescaled to unit peak (the dynamics are linear in the signal).
#[derive(Debug, Clone)]
pub(crate) struct Propagator {
    pub model: Model,
    pub nt: usize,
    pub dt: f64,
    pub t0: f64,
    /// Scaled input on grid points and at half steps.
    pub e_full: Vec<C64>,
    pub e_half: Vec<C64>,
    pub omega: Vec<C64>,
    /// Index of the first grid point at or after the dark-time midpoint.
    pub n_mid: usize,
    pub decay: f64,
    /// Clear the optical polarisation together with the spin-wave decay.
    pub dephase_optical: bool,
    /// Inclusive grid-index range of the retrieval window (empty if a > b).
    pub window: (usize, usize),
    /// Scaled input energy Σ|e|²·dt.
    pub input_energy: f64,
    /// Peak of the unscaled input amplitude.
    pub input_scale: f64,
}

impl Propagator {
    pub fn new(
        medium: &MediumSpec,
        grid: &SimGrid,
        signal: &PulseEnvelope,
        control: &PulseEnvelope,
        delta: f64,
        timing: &ProtocolTiming,
    ) -> Result<Self> {
        timing.validate()?;
        let model = Model::new(medium, grid, delta)?;
        if control.len() != grid.nt {
            return Err(Error::ShapeMismatch(format!(
                "control has {} samples, grid has nt = {}",
                control.len(),
                grid.nt
            )));
        }
        let dt = grid.dt();
        if (control.dt() - dt).abs() > 1e-9 * dt || (control.t0() - grid.t_span.0).abs() > 1e-6 * dt {
            return Err(Error::ShapeMismatch("control is not sampled on the simulation grid".into()));
        }
        let t_mid = timing.dark_midpoint();
        if t_mid <= grid.t_span.0 || t_mid >= grid.t_span.1 {
            return Err(Error::invalid("protocol", "dark-time midpoint lies outside the time grid"));
        }
        let n_mid = ((t_mid - grid.t_span.0) / dt - 1e-9).ceil() as usize;
        let sigma_doppler = crate::consts::TWO_PI * crate::doppler::fwhm_to_sigma(medium.doppler_fwhm);
        let e_raw: Vec<C64> = (0..grid.nt).map(|n| signal.value_at(grid.time(n))).collect();
        let e_half_raw: Vec<C64> = (0..grid.nt - 1)
            .map(|n| signal.value_at(grid.time(n) + 0.5 * dt))
            .collect();
        let input_scale = e_raw
            .iter()
            .chain(&e_half_raw)
            .map(|c| c.norm())
            .fold(0.0, f64::max);
        let inv = if input_scale > 0.0 { 1.0 / input_scale } else { 0.0 };
        let e_full: Vec<C64> = e_raw.iter().map(|c| c * inv).collect();
        let e_half: Vec<C64> = e_half_raw.iter().map(|c| c * inv).collect();
        let input_energy = e_full.iter().map(|c| c.norm_sqr()).sum::<f64>() * dt;
        let (ta, tb) = timing.retrieval_window;
        let lo = ((ta - grid.t_span.0) / dt - 1e-9).ceil().max(0.0) as usize;
        let hi_f = ((tb - grid.t_span.0) / dt + 1e-9).floor();
        let hi = if hi_f < 0.0 { 0 } else { (hi_f as usize).min(grid.nt - 1) };
        let window = if hi_f < 0.0 || lo > hi { (1, 0) } else { (lo, hi) };
        Ok(Propagator {
            model,
            nt: grid.nt,
            dt,
            t0: grid.t_span.0,
            e_full,
            e_half,
            omega: control.amplitude().to_vec(),
            n_mid,
            decay: timing.dark_decay_amplitude(medium.lifetime_tau),
            dephase_optical: sigma_doppler * (t_mid - timing.storage_control_center) > DEPHASING_THRESHOLD,
            window,
            input_energy,
            input_scale,
        })
    }

    pub fn in_window(&self, n: usize) -> bool {
        n >= self.window.0 && n <= self.window.1
    }

    pub fn time(&self, n: usize) -> f64 {
        self.t0 + n as f64 * self.dt
    }

    /// Stage inputs (Ω, e_in) of the RK4 step n → n+1.
    #[inline]
    pub fn stage_inputs(&self, n: usize) -> [(C64, C64); 4] {
        let om_mid = 0.5 * (self.omega[n] + self.omega[n + 1]);
        [
            (self.omega[n], self.e_full[n]),
            (om_mid, self.e_half[n]),
            (om_mid, self.e_half[n]),
            (self.omega[n + 1], self.e_full[n + 1]),
        ]
    }

    /// RK4 step without the decay; stage derivatives remain in `st.k`.
    pub fn step_raw(&self, n: usize, y: &mut [C64], st: &mut Stages) {
        let h = self.dt;
        let inputs = self.stage_inputs(n);
        let m = &self.model;
        let Stages { k, tmp, scratch } = st;
        m.rhs(inputs[0].0, inputs[0].1, y, &mut k[0], scratch);
        for i in 0..y.len() {
            tmp[i] = y[i] + k[0][i] * (0.5 * h);
        }
        m.rhs(inputs[1].0, inputs[1].1, tmp, &mut k[1], scratch);
        for i in 0..y.len() {
            tmp[i] = y[i] + k[1][i] * (0.5 * h);
        }
        m.rhs(inputs[2].0, inputs[2].1, tmp, &mut k[2], scratch);
        for i in 0..y.len() {
            tmp[i] = y[i] + k[2][i] * h;
        }
        m.rhs(inputs[3].0, inputs[3].1, tmp, &mut k[3], scratch);
        let h6 = h / 6.0;
        for i in 0..y.len() {
            y[i] += (k[0][i] + (k[1][i] + k[2][i]) * 2.0 + k[3][i]) * h6;
        }
    }

    /// Dark-time map; it is diagonal and real, so it is also its own adjoint.
    pub fn apply_decay(&self, y: &mut [C64]) {
        let m = &self.model;
        let np = m.nv * m.nk;
        for z in 0..m.nz {
            let base = z * m.stride;
            if self.dephase_optical {
                y[base..base + np].fill(C64::new(0.0, 0.0));
            }
            for s in &mut y[base + np..base + np + m.nv] {
                *s *= self.decay;
            }
        }
    }

    fn check(&self, n: usize, y: &[C64]) -> Result<()> {
        let mut worst = 0.0f64;
        for c in y {
            let a = c.norm_sqr();
            if !a.is_finite() {
                return Err(Error::Unstable {
                    t: self.time(n),
                    magnitude: f64::INFINITY,
                });
            }
            worst = worst.max(a);
        }
        if worst.sqrt() > INSTABILITY_THRESHOLD {
            return Err(Error::Unstable {
                t: self.time(n),
                magnitude: worst.sqrt(),
            });
        }
        Ok(())
    }

    /// Forward integration. Returns the scaled output field at every grid
    /// point and the pre-decay state at `n_mid`; when `checkpoint_every` is
    /// set, also the post-step state at every multiple of it.
    pub fn forward(&self, checkpoint_every: Option<usize>) -> Result<ForwardRun> {
        let m = &self.model;
        let mut y = vec![ZERO; m.state_len()];
        let mut st = Stages::new(m);
        let mut e_out = Vec::with_capacity(self.nt);
        let mut checkpoints = Vec::new();
        let mut stored = None;
        e_out.push(m.output_field(self.e_full[0], &y));
        if let Some(k) = checkpoint_every {
            debug_assert!(k > 0);
            checkpoints.push(y.clone());
        }
        for n in 0..self.nt - 1 {
            self.step_raw(n, &mut y, &mut st);
            if n + 1 == self.n_mid {
                stored = Some(y.clone());
                self.apply_decay(&mut y);
            }
            if (n + 1) % 64 == 0 || n + 2 == self.nt {
                self.check(n + 1, &y)?;
            }
            e_out.push(m.output_field(self.e_full[n + 1], &y));
            if let Some(k) = checkpoint_every {
                if (n + 1) % k == 0 {
                    checkpoints.push(y.clone());
                }
            }
        }
        let stored = stored.unwrap_or_else(|| y.clone());
        Ok(ForwardRun {
            e_out,
            stored,
            checkpoints,
        })
    }

    /// η_total from a scaled output trace.
    pub fn window_efficiency(&self, e_out: &[C64]) -> f64 {
        if self.input_energy == 0.0 || self.window.0 > self.window.1 {
            return 0.0;
        }
        let sum: f64 = e_out[self.window.0..=self.window.1].iter().map(|c| c.norm_sqr()).sum();
        sum * self.dt / self.input_energy
    }
}

#[derive(Debug, Clone)]
pub(crate) struct ForwardRun {
    pub e_out: Vec<C64>,
    pub stored: Vec<C64>,
    pub checkpoints: Vec<Vec<C64>>,
}

/// Integrates write, dark time and read-out and reports the efficiencies.
pub fn solve(
    medium: &MediumSpec,
    grid: &SimGrid,
    signal: &PulseEnvelope,
    control: &PulseEnvelope,
    delta: f64,
    timing: &ProtocolTiming,
) -> Result<MemoryResult> {
    let prop = Propagator::new(medium, grid, signal, control, delta, timing)?;
    let m = &prop.model;
    if prop.input_scale == 0.0 {
        let zero_state = vec![ZERO; m.state_len()];
        return Ok(MemoryResult {
            eta_storage: 0.0,
            eta_total: 0.0,
            leakage: 0.0,
            e_out: PulseEnvelope::zeros(grid.t_span.0, grid.dt(), grid.nt)?,
            stored: m.snapshot(ZERO, &zero_state, 0.0),
        });
    }
    let run = prop.forward(None)?;
    let scale = prop.input_scale;
    let norm = prop.dt / prop.input_energy;
    let leakage = run.e_out[..prop.n_mid].iter().map(|c| c.norm_sqr()).sum::<f64>() * norm;
    let eta_total = prop.window_efficiency(&run.e_out);
    let eta_storage = m.spin_wave_energy(&run.stored) / prop.input_energy;
    let stored = m.snapshot(prop.e_full[prop.n_mid], &run.stored, scale);
    if !stored.is_finite() {
        return Err(Error::Unstable {
            t: prop.time(prop.n_mid),
            magnitude: f64::NAN,
        });
    }
    let e_out = PulseEnvelope::new(
        grid.t_span.0,
        grid.dt(),
        run.e_out.iter().map(|c| c * scale).collect(),
    )?;
    Ok(MemoryResult {
        eta_storage,
        eta_total,
        leakage,
        e_out,
        stored,
    })
}

/// Weak CW probe transmission `|E(1)/E(0)|²` with a constant control of
/// Rabi frequency `cw_control_rabi` held on resonance with the reference
/// control leg, so that the two-photon detuning equals the probe detuning.
pub fn transmission_spectrum(
    medium: &MediumSpec,
    grid: &SimGrid,
    delta_list: &[f64],
    cw_control_rabi: f64,
) -> Result<Vec<(f64, f64)>> {
    medium.validate()?;
    grid.validate()?;
    if !cw_control_rabi.is_finite() {
        return Err(Error::invalid("cw_control_rabi", "must be finite"));
    }
    let reference = medium.reference_level();
    let d_ref = 0.5 * medium.homogeneous_od();
    let classes = VelocityClasses::gaussian(medium.doppler_fwhm, grid.n_velocity);
    let sqrt_d: Vec<f64> = medium
        .levels
        .iter()
        .map(|l| (d_ref * l.f_signal / reference.f_signal).sqrt())
        .collect();
    let f_ctl: Vec<f64> = medium
        .levels
        .iter()
        .map(|l| (l.f_control / reference.f_control).sqrt())
        .collect();
    let gamma = medium.gamma_e;
    let omega = cw_control_rabi;
    delta_list
        .iter()
        .map(|&delta| {
            if !delta.is_finite() {
                return Err(Error::invalid("delta", "must be finite"));
            }
            let mut kappa = ZERO;
            for (&dv, &wv) in classes.detunings.iter().zip(&classes.weights) {
                let rates: Vec<C64> = medium
                    .levels
                    .iter()
                    .map(|l| -C64::new(gamma, delta - l.offset + dv))
                    .collect();
                // steady state: P_k = −(i√d_k γ E + i f_k Ω S)/r_k, S from the spin equation
                let mut a = ZERO;
                let mut b = ZERO;
                for k in 0..rates.len() {
                    a += f_ctl[k] * sqrt_d[k] * gamma / rates[k];
                    b += f_ctl[k] * f_ctl[k] / rates[k];
                }
                let s = if omega == 0.0 {
                    ZERO
                } else {
                    let denom = C64::new(medium.gamma_s, delta) - b * (omega * omega);
                    a * omega / denom
                };
                for k in 0..rates.len() {
                    let p = -(I * sqrt_d[k] * gamma + I * f_ctl[k] * omega * s) / rates[k];
                    kappa += I * wv * sqrt_d[k] * p;
                }
            }
            Ok((delta, (2.0 * kappa.re).exp()))
        })
        .collect()
}
