//! Optimal control of the write and read pulses.
//!
//! The gradient of the retrieval efficiency with respect to every control
//! sample comes from the exact discrete adjoint of the RK4 propagation, so it
//! agrees with finite differences of [`crate::solver::solve`] to rounding.
//! The backward sweep recomputes the forward states segment by segment from
//! checkpoints taken every ~√nt steps, which keeps memory at O(√nt) states.
//!
//! [`optimize_control`] performs projected gradient ascent on the complex
//! control samples: low-passed ascent direction, backtracking on rejected
//! steps, and projection onto the feasible set (peak or energy cap).

use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::domain::{MediumSpec, ProtocolTiming, PulseEnvelope, SimGrid};
use crate::error::{ensure_finite, ensure_positive, Error, Result};
use crate::solver::{Propagator, Stages};
use crate::C64;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Gradient of η_total with respect to the control samples: `re` holds
/// ∂η/∂Re Ω_j and `im` holds ∂η/∂Im Ω_j, both in 1/(rad/s).
#[derive(Debug, Clone)]
pub struct EfficiencyGradient {
    pub eta_total: f64,
    pub gradient: Vec<C64>,
}

/// One forward solve plus one adjoint sweep.
pub fn efficiency_gradient(
    medium: &MediumSpec,
    grid: &SimGrid,
    signal: &PulseEnvelope,
    control: &PulseEnvelope,
    delta: f64,
    timing: &ProtocolTiming,
) -> Result<EfficiencyGradient> {
    let prop = Propagator::new(medium, grid, signal, control, delta, timing)?;
    adjoint_gradient(&prop)
}

pub(crate) fn adjoint_gradient(prop: &Propagator) -> Result<EfficiencyGradient> {
    let nt = prop.nt;
    let mut gradient = vec![ZERO; nt];
    if prop.input_scale == 0.0 || prop.window.0 > prop.window.1 {
        return Ok(EfficiencyGradient {
            eta_total: 0.0,
            gradient,
        });
    }
    let m = &prop.model;
    let len = m.state_len();
    let seg = ((nt as f64).sqrt().ceil() as usize).max(1);
    let run = prop.forward(Some(seg))?;
    let eta_total = prop.window_efficiency(&run.e_out);

    let mut coef = vec![ZERO; len];
    m.output_coefficients(&mut coef);
    let cost_scale = 2.0 * prop.dt / prop.input_energy;

    let mut st = Stages::new(m);
    // stage inputs x1..x4 of every step in the current segment
    let mut stage_states: Vec<[Vec<C64>; 4]> = Vec::new();
    let mut lambda = vec![ZERO; len];
    let mut a = vec![ZERO; len];
    let mut mu = vec![ZERO; len];
    let mut mu_sum = vec![ZERO; len];
    let h = prop.dt;

    // terminal condition
    add_cost_gradient(prop, nt - 1, &run.e_out, &coef, cost_scale, &mut lambda);

    let n_seg = (nt - 1).div_ceil(seg);
    for s in (0..n_seg).rev() {
        let start = s * seg;
        let end = ((s + 1) * seg).min(nt - 1);
        recompute_segment(prop, &run.checkpoints[s], start, end, &mut st, &mut stage_states);
        for n in (start..end).rev() {
            // λ currently holds ∂J/∂y_{n+1}
            if n + 1 == prop.n_mid {
                prop.apply_decay(&mut lambda);
            }
            let inputs = prop.stage_inputs(n);
            let x = &stage_states[n - start];
            mu_sum.iter_mut().for_each(|c| *c = ZERO);
            let mut sens = [(0.0, 0.0); 4];
            // stage 4
            for i in 0..len {
                a[i] = lambda[i] * (h / 6.0);
            }
            m.rhs_adjoint(inputs[3].0, &a, &mut mu, &mut st.scratch);
            sens[3] = m.omega_sensitivity(&a, &x[3]);
            accumulate(&mut mu_sum, &mu);
            // stage 3
            for i in 0..len {
                a[i] = lambda[i] * (h / 3.0) + mu[i] * h;
            }
            m.rhs_adjoint(inputs[2].0, &a, &mut mu, &mut st.scratch);
            sens[2] = m.omega_sensitivity(&a, &x[2]);
            accumulate(&mut mu_sum, &mu);
            // stage 2
            for i in 0..len {
                a[i] = lambda[i] * (h / 3.0) + mu[i] * (0.5 * h);
            }
            m.rhs_adjoint(inputs[1].0, &a, &mut mu, &mut st.scratch);
            sens[1] = m.omega_sensitivity(&a, &x[1]);
            accumulate(&mut mu_sum, &mu);
            // stage 1
            for i in 0..len {
                a[i] = lambda[i] * (h / 6.0) + mu[i] * (0.5 * h);
            }
            m.rhs_adjoint(inputs[0].0, &a, &mut mu, &mut st.scratch);
            sens[0] = m.omega_sensitivity(&a, &x[0]);
            accumulate(&mut mu_sum, &mu);

            gradient[n] += C64::new(sens[0].0, sens[0].1);
            let mid = C64::new(sens[1].0 + sens[2].0, sens[1].1 + sens[2].1) * 0.5;
            gradient[n] += mid;
            gradient[n + 1] += mid;
            gradient[n + 1] += C64::new(sens[3].0, sens[3].1);

            accumulate(&mut lambda, &mu_sum);
            add_cost_gradient(prop, n, &run.e_out, &coef, cost_scale, &mut lambda);
        }
    }
    Ok(EfficiencyGradient { eta_total, gradient })
}

fn accumulate(acc: &mut [C64], x: &[C64]) {
    for (a, b) in acc.iter_mut().zip(x) {
        *a += b;
    }
}

fn add_cost_gradient(prop: &Propagator, n: usize, e_out: &[C64], coef: &[C64], scale: f64, lambda: &mut [C64]) {
    if !prop.in_window(n) {
        return;
    }
    let e = e_out[n] * scale;
    for (l, c) in lambda.iter_mut().zip(coef) {
        *l += c.conj() * e;
    }
}

/// Re-runs steps `start..end` from the checkpointed state at `start`,
/// recording the four RK4 stage inputs of each step.
fn recompute_segment(
    prop: &Propagator,
    checkpoint: &[C64],
    start: usize,
    end: usize,
    st: &mut Stages,
    out: &mut Vec<[Vec<C64>; 4]>,
) {
    let m = &prop.model;
    let h = prop.dt;
    let len = m.state_len();
    out.resize_with(end - start, || {
        [vec![ZERO; len], vec![ZERO; len], vec![ZERO; len], vec![ZERO; len]]
    });
    let mut y = checkpoint.to_vec();
    for n in start..end {
        let inputs = prop.stage_inputs(n);
        let x = &mut out[n - start];
        let Stages { k, scratch, .. } = st;
        x[0].copy_from_slice(&y);
        m.rhs(inputs[0].0, inputs[0].1, &x[0], &mut k[0], scratch);
        for i in 0..len {
            x[1][i] = y[i] + k[0][i] * (0.5 * h);
        }
        m.rhs(inputs[1].0, inputs[1].1, &x[1], &mut k[1], scratch);
        for i in 0..len {
            x[2][i] = y[i] + k[1][i] * (0.5 * h);
        }
        m.rhs(inputs[2].0, inputs[2].1, &x[2], &mut k[2], scratch);
        for i in 0..len {
            x[3][i] = y[i] + k[2][i] * h;
        }
        m.rhs(inputs[3].0, inputs[3].1, &x[3], &mut k[3], scratch);
        for i in 0..len {
            y[i] += (k[0][i] + (k[1][i] + k[2][i]) * 2.0 + k[3][i]) * (h / 6.0);
        }
        if n + 1 == prop.n_mid {
            prop.apply_decay(&mut y);
        }
    }
}

/// Feasible set of control envelopes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ControlConstraint {
    /// |Ω(t)| ≤ `max_peak_rabi` sample by sample.
    PeakCap,
    /// |Ω(t)| ≤ `max_peak_rabi` and ∫|Ω|²dt ≤ `max_pulse_area` (rad²/s).
    EnergyCap { max_pulse_area: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    /// Cap on |Ω(t)|, rad/s.
    pub max_peak_rabi: f64,
    /// Initial step as a fraction of `max_peak_rabi` for the largest gradient
    /// component.
    pub step_size: f64,
    /// Step multiplier after a rejected step, in (0, 1).
    pub shrink_factor: f64,
    /// Step multiplier after an accepted step, ≥ 1.
    pub grow_factor: f64,
    pub max_iters: usize,
    /// Stop once the relative improvement of an accepted step drops below this.
    pub tol: f64,
    /// Give up when the step falls below this fraction of `max_peak_rabi`.
    pub min_step: f64,
    pub optimize_write: bool,
    pub optimize_read: bool,
    /// Share of `max_iters` spent on the read pulse alone before both pulses
    /// are optimized jointly (only when both are enabled).
    pub read_phase_fraction: f64,
    /// Low-pass cutoff applied to every ascent direction, Hz; `None` disables.
    pub lowpass_cutoff: Option<f64>,
    pub constraint: ControlConstraint,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            max_peak_rabi: 4.0 * crate::consts::TWO_PI * 600e6,
            step_size: 0.2,
            shrink_factor: 0.5,
            grow_factor: 1.5,
            max_iters: 40,
            tol: 1e-4,
            min_step: 1e-4,
            optimize_write: true,
            optimize_read: true,
            read_phase_fraction: 0.25,
            lowpass_cutoff: Some(2e9),
            constraint: ControlConstraint::PeakCap,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        ensure_positive("optimizer.max_peak_rabi", self.max_peak_rabi)?;
        ensure_positive("optimizer.step_size", self.step_size)?;
        ensure_positive("optimizer.tol", self.tol)?;
        ensure_positive("optimizer.min_step", self.min_step)?;
        ensure_finite("optimizer.grow_factor", self.grow_factor)?;
        if !(self.shrink_factor > 0.0 && self.shrink_factor < 1.0) {
            return Err(Error::invalid("optimizer.shrink_factor", "must lie in (0, 1)"));
        }
        if self.grow_factor < 1.0 {
            return Err(Error::invalid("optimizer.grow_factor", "must be >= 1"));
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("optimizer.max_iters", "must be >= 1"));
        }
        if !self.optimize_write && !self.optimize_read {
            return Err(Error::invalid("optimizer", "nothing to optimize: both pulses are frozen"));
        }
        if !(0.0..=1.0).contains(&self.read_phase_fraction) {
            return Err(Error::invalid("optimizer.read_phase_fraction", "must lie in [0, 1]"));
        }
        if let Some(fc) = self.lowpass_cutoff {
            ensure_positive("optimizer.lowpass_cutoff", fc)?;
        }
        if let ControlConstraint::EnergyCap { max_pulse_area } = self.constraint {
            ensure_positive("optimizer.constraint.max_pulse_area", max_pulse_area)?;
        }
        Ok(())
    }
}

/// Why the ascent stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// Relative improvement fell below `tol`.
    Converged,
    /// Iteration budget exhausted while still improving.
    MaxIters,
    /// Step shrank below `min_step` without finding an improvement.
    NoProgress,
}

#[derive(Debug, Clone)]
pub struct OptimizationOutcome {
    pub control: PulseEnvelope,
    /// η_total of the starting control followed by every accepted iterate.
    pub trace: Vec<f64>,
    pub termination: Termination,
    pub gradient_evaluations: usize,
}

impl OptimizationOutcome {
    pub fn final_efficiency(&self) -> f64 {
        *self.trace.last().expect("trace always holds the start value")
    }
}

/// Projected gradient ascent on the control samples. With both pulses
/// enabled, the read pulse is optimized alone for the first
/// `read_phase_fraction` of the iteration budget and both pulses jointly
/// afterwards.
#[allow(clippy::too_many_arguments)]
pub fn optimize_control(
    medium: &MediumSpec,
    grid: &SimGrid,
    signal: &PulseEnvelope,
    control0: &PulseEnvelope,
    delta: f64,
    timing: &ProtocolTiming,
    cfg: &OptimizerConfig,
) -> Result<OptimizationOutcome> {
    cfg.validate()?;
    let cap = cfg.max_peak_rabi;
    if control0.peak() > cap * (1.0 + 1e-12) {
        return Err(Error::invalid(
            "control0",
            format!("peak {:e} rad/s exceeds the cap {:e} rad/s", control0.peak(), cap),
        ));
    }
    let mut prop = Propagator::new(medium, grid, signal, control0, delta, timing)?;
    let t_mid = timing.dark_midpoint();
    let read_mask: Vec<bool> = (0..grid.nt).map(|n| grid.time(n) >= t_mid).collect();
    let mask_for = |write: bool, read: bool| -> Vec<bool> {
        read_mask.iter().map(|&r| if r { read } else { write }).collect()
    };
    let phases: Vec<(Vec<bool>, usize)> = if cfg.optimize_write && cfg.optimize_read {
        let first = ((cfg.max_iters as f64 * cfg.read_phase_fraction).round() as usize).min(cfg.max_iters);
        vec![(mask_for(false, true), first), (mask_for(true, true), cfg.max_iters - first)]
    } else {
        vec![(mask_for(cfg.optimize_write, cfg.optimize_read), cfg.max_iters)]
    };

    let lowpass = cfg.lowpass_cutoff.map(|fc| LowPass::new(grid.nt, grid.dt(), fc));
    let mut omega = prop.omega.clone();
    project(&mut omega, cfg, grid.dt());
    prop.omega.clone_from(&omega);
    let mut current = adjoint_gradient(&prop)?;
    let mut evaluations = 1;
    let mut trace = vec![current.eta_total];
    let mut termination = Termination::MaxIters;
    let mut step = cfg.step_size;

    'phases: for (phase, (mask, budget)) in phases.iter().enumerate() {
        let last_phase = phase + 1 == phases.len();
        let mut iters = 0;
        while iters < *budget {
            iters += 1;
            let mut dir: Vec<C64> = current
                .gradient
                .iter()
                .zip(mask)
                .map(|(g, &on)| if on { *g } else { ZERO })
                .collect();
            if let Some(lp) = &lowpass {
                lp.apply(&mut dir);
                dir.iter_mut().zip(mask).filter(|(_, &on)| !on).for_each(|(d, _)| *d = ZERO);
            }
            let gmax = dir.iter().map(|c| c.norm()).fold(0.0, f64::max);
            if gmax == 0.0 || !gmax.is_finite() {
                termination = Termination::NoProgress;
                break 'phases;
            }
            // backtracking line search
            let accepted = loop {
                if step < cfg.min_step {
                    break None;
                }
                let scale = step * cap / gmax;
                let mut trial: Vec<C64> = omega.iter().zip(&dir).map(|(w, d)| w + d * scale).collect();
                project(&mut trial, cfg, grid.dt());
                prop.omega.clone_from(&trial);
                let result = adjoint_gradient(&prop);
                evaluations += 1;
                match result {
                    Ok(g) if g.eta_total > current.eta_total => break Some((trial, g)),
                    // an unstable trial counts as a rejected step
                    Ok(_) | Err(Error::Unstable { .. }) => step *= cfg.shrink_factor,
                    Err(e) => return Err(e),
                }
            };
            let Some((trial, g)) = accepted else {
                termination = Termination::NoProgress;
                break 'phases;
            };
            let gain = (g.eta_total - current.eta_total) / current.eta_total.max(f64::MIN_POSITIVE);
            omega = trial;
            current = g;
            trace.push(current.eta_total);
            step *= cfg.grow_factor;
            if gain < cfg.tol {
                if last_phase {
                    termination = Termination::Converged;
                    break 'phases;
                }
                break;
            }
        }
        if last_phase {
            termination = Termination::MaxIters;
        }
    }
    let control = PulseEnvelope::new(grid.t_span.0, grid.dt(), omega)?;
    Ok(OptimizationOutcome {
        control,
        trace,
        termination,
        gradient_evaluations: evaluations,
    })
}

/// Projection onto the feasible set; the peak cap is enforced last so it
/// holds exactly.
fn project(omega: &mut [C64], cfg: &OptimizerConfig, dt: f64) {
    if let ControlConstraint::EnergyCap { max_pulse_area } = cfg.constraint {
        let area: f64 = omega.iter().map(|c| c.norm_sqr()).sum::<f64>() * dt;
        if area > max_pulse_area {
            let s = (max_pulse_area / area).sqrt();
            omega.iter_mut().for_each(|c| *c *= s);
        }
    }
    let cap = cfg.max_peak_rabi;
    for c in omega.iter_mut() {
        let r = c.norm();
        if r > cap {
            *c *= cap / r;
        }
    }
}

/// Brick-wall spectral filter on a zero-padded copy of the series.
struct LowPass {
    len: usize,
    n_fft: usize,
    keep: usize,
}

impl LowPass {
    fn new(len: usize, dt: f64, cutoff: f64) -> Self {
        let n_fft = (2 * len).next_power_of_two();
        let df = 1.0 / (n_fft as f64 * dt);
        let keep = ((cutoff / df).floor() as usize).min(n_fft / 2);
        LowPass { len, n_fft, keep }
    }

    fn apply(&self, x: &mut [C64]) {
        debug_assert_eq!(x.len(), self.len);
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(self.n_fft);
        let inv = planner.plan_fft_inverse(self.n_fft);
        let mut buf = vec![ZERO; self.n_fft];
        buf[..self.len].copy_from_slice(x);
        fwd.process(&mut buf);
        for (i, c) in buf.iter_mut().enumerate() {
            let f = i.min(self.n_fft - i);
            if f > self.keep {
                *c = ZERO;
            }
        }
        inv.process(&mut buf);
        let norm = 1.0 / self.n_fft as f64;
        for (xi, b) in x.iter_mut().zip(&buf) {
            *xi = b * norm;
        }
    }
}
