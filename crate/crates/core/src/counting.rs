//! Photon-counting arithmetic: efficiencies from detector counts, noise
//! figures, coherence contamination models and the memory lifetime fit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::consts::TWO_PI;
use crate::error::{ensure_finite, ensure_non_negative, ensure_positive, Error, Result};

/// Counts accumulated in the retrieval window plus the calibration needed to
/// turn them into efficiencies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CountRecord {
    /// Counts with the input switched on.
    pub n_signal: f64,
    /// Counts with the input blocked.
    pub n_noise: f64,
    /// Mean input photon number per pulse.
    pub alpha2: f64,
    pub eta_apd: f64,
    /// Repetition rate, Hz.
    pub f_rep: f64,
    /// Integration time, s.
    pub t_int: f64,
    /// Linear signal attenuation of the filtering path (≥ 1).
    pub filter_attenuation: f64,
}

impl Default for CountRecord {
    fn default() -> Self {
        CountRecord {
            n_signal: 42_000.0,
            n_noise: 9_000.0,
            alpha2: 1.0,
            eta_apd: 0.60,
            f_rep: 1.67e6,
            t_int: 1.0,
            filter_attenuation: 3.0,
        }
    }
}

impl CountRecord {
    pub fn validate(&self) -> Result<()> {
        ensure_non_negative("counts.n_noise", self.n_noise)?;
        ensure_non_negative("counts.n_signal", self.n_signal)?;
        if self.n_signal < self.n_noise {
            return Err(Error::invalid("counts.n_signal", "must be >= counts.n_noise"));
        }
        ensure_positive("counts.alpha2", self.alpha2)?;
        ensure_positive("counts.eta_apd", self.eta_apd)?;
        if self.eta_apd > 1.0 {
            return Err(Error::invalid("counts.eta_apd", "must be <= 1"));
        }
        ensure_positive("counts.f_rep", self.f_rep)?;
        ensure_positive("counts.t_int", self.t_int)?;
        ensure_finite("counts.filter_attenuation", self.filter_attenuation)?;
        if self.filter_attenuation < 1.0 {
            return Err(Error::invalid("counts.filter_attenuation", "must be >= 1"));
        }
        Ok(())
    }
}

/// Noise-corrected end-to-end efficiency
/// (N_signal − N_noise)/(|α|² η_APD f_rep t_int).
pub fn eta_e2e(rec: &CountRecord) -> Result<f64> {
    rec.validate()?;
    Ok((rec.n_signal - rec.n_noise) / (rec.alpha2 * rec.eta_apd * rec.f_rep * rec.t_int))
}

/// (N_signal − N_noise)/N_noise.
pub fn snr(rec: &CountRecord) -> Result<f64> {
    rec.validate()?;
    if rec.n_noise == 0.0 {
        return Err(Error::Domain("SNR is undefined without noise counts".into()));
    }
    Ok((rec.n_signal - rec.n_noise) / rec.n_noise)
}

/// Input photon number at which the retrieval SNR is one.
pub fn mu1(rec: &CountRecord) -> Result<f64> {
    rec.validate()?;
    if rec.n_noise == 0.0 {
        return Err(Error::Domain("mu1 is undefined without noise counts".into()));
    }
    if rec.n_signal == rec.n_noise {
        return Err(Error::Domain("mu1 diverges when no signal is retrieved".into()));
    }
    Ok(rec.alpha2 * rec.n_noise / (rec.n_signal - rec.n_noise))
}

/// Intrinsic efficiencies `(η_int after storage_time, η_int corrected for
/// the Gaussian dark-time decay)`.
pub fn eta_intrinsic(rec: &CountRecord, storage_time: f64, tau: f64) -> Result<(f64, f64)> {
    ensure_non_negative("storage_time", storage_time)?;
    ensure_positive("tau", tau)?;
    let at_t = eta_e2e(rec)? * rec.filter_attenuation;
    let x = storage_time / tau;
    Ok((at_t, at_t / (-x * x).exp()))
}

/// Result of fitting η(T) = η₀ exp(−(T/τ)²).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LifetimeFit {
    pub eta0: f64,
    pub tau: f64,
    /// Root-mean-square residual of the final fit.
    pub rms: f64,
    pub iterations: usize,
}

/// Least-squares fit of the Gaussian decay model: log-linear initial guess
/// against T², refined by damped Gauss–Newton on the linear residuals.
pub fn lifetime_fit(points: &[(f64, f64)]) -> Result<LifetimeFit> {
    if points.len() < 3 {
        return Err(Error::invalid("points", "need at least 3 points"));
    }
    for &(t, eta) in points {
        ensure_non_negative("points.T", t)?;
        ensure_finite("points.eta", eta)?;
    }
    // initial guess from ln η = ln η₀ − u T² on the positive points
    let pos: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.1 > 0.0)
        .map(|&(t, e)| (t * t, e.ln()))
        .collect();
    if pos.len() < 2 {
        return Err(Error::Domain("need at least two positive efficiencies".into()));
    }
    let n = pos.len() as f64;
    let mx = pos.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pos.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pos.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pos.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Domain("need at least two distinct storage times".into()));
    }
    let slope = sxy / sxx;
    if slope >= 0.0 {
        return Err(Error::Domain("efficiencies do not decay with storage time".into()));
    }
    // parameters (η₀, u = 1/τ²); u scaled by the data range for conditioning
    let t_scale = points.iter().map(|p| p.0).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let mut eta0 = (my - slope * mx).exp();
    let mut v = -slope * t_scale * t_scale; // u·t_scale²
    let cost = |eta0: f64, v: f64| -> f64 {
        points
            .iter()
            .map(|&(t, e)| {
                let x = t / t_scale;
                (e - eta0 * (-v * x * x).exp()).powi(2)
            })
            .sum()
    };
    let mut c = cost(eta0, v);
    let mut lambda = 1e-3;
    const MAX_ITERS: usize = 200;
    for it in 1..=MAX_ITERS {
        let (mut a11, mut a12, mut a22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for &(t, e) in points {
            let x2 = (t / t_scale).powi(2);
            let g = (-v * x2).exp();
            let r = e - eta0 * g;
            let j1 = g;
            let j2 = -eta0 * x2 * g;
            a11 += j1 * j1;
            a12 += j1 * j2;
            a22 += j2 * j2;
            b1 += j1 * r;
            b2 += j2 * r;
        }
        let mut accepted = false;
        for _ in 0..30 {
            let d11 = a11 * (1.0 + lambda);
            let d22 = a22 * (1.0 + lambda);
            let det = d11 * d22 - a12 * a12;
            if det <= 0.0 || !det.is_finite() {
                lambda *= 10.0;
                continue;
            }
            let s1 = (d22 * b1 - a12 * b2) / det;
            let s2 = (d11 * b2 - a12 * b1) / det;
            let (ne, nv) = (eta0 + s1, v + s2);
            let nc = cost(ne, nv);
            if nv > 0.0 && nc <= c {
                let rel = (s1 / eta0).abs().max((s2 / v).abs());
                eta0 = ne;
                v = nv;
                let done = rel < 1e-12 || (c - nc) <= 1e-15 * c.max(f64::MIN_POSITIVE);
                c = nc;
                lambda = (lambda * 0.3).max(1e-12);
                accepted = true;
                if done {
                    return Ok(finish(eta0, v, t_scale, c, points.len(), it));
                }
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            // no descent direction left: at a minimum to working precision
            return Ok(finish(eta0, v, t_scale, c, points.len(), it));
        }
    }
    Err(Error::FitNotConverged {
        iterations: MAX_ITERS,
        rms: (c / points.len() as f64).sqrt(),
    })
}

fn finish(eta0: f64, v: f64, t_scale: f64, cost: f64, n: usize, iterations: usize) -> LifetimeFit {
    LifetimeFit {
        eta0,
        tau: t_scale / v.sqrt(),
        rms: (cost / n as f64).sqrt(),
        iterations,
    }
}

/// Fringe visibility of a coherent signal on top of an incoherent,
/// non-interfering background: V = v0·snr/(snr + 1).
pub fn visibility_model(snr: f64, v0: f64) -> f64 {
    if snr.is_infinite() {
        return v0;
    }
    v0 * snr / (snr + 1.0)
}

/// Weight of the signal–noise cross term in [`g2_mixture`].
pub const BEAT_WEIGHT: f64 = 4.0;
const NO_BEAT_WEIGHT: f64 = 2.0;

/// g²(0) of a signal/noise mixture at the given SNR:
/// (g2_s S² + g2_n N² + β S N)/(S + N)² with S = snr/(1+snr), N = 1/(1+snr).
/// `include_beat` selects β = 4 (fields add with random relative phase)
/// instead of β = 2 (intensities add).
pub fn g2_mixture(snr: f64, g2_signal: f64, g2_noise: f64, include_beat: bool) -> f64 {
    let beta = if include_beat { BEAT_WEIGHT } else { NO_BEAT_WEIGHT };
    let (s, n) = if snr.is_infinite() {
        (1.0, 0.0)
    } else {
        (snr / (1.0 + snr), 1.0 / (1.0 + snr))
    };
    (g2_signal * s * s + g2_noise * n * n + beta * s * n) / (s + n).powi(2)
}

/// Monte Carlo oracle for [`g2_mixture`]: a phase-randomized coherent field
/// of mean intensity S/(S+N) plus an independent thermal (complex Gaussian)
/// field of mean intensity N/(S+N), detected as one intensity.
pub fn g2_two_field_monte_carlo(snr: f64, samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = snr / (1.0 + snr);
    let n = 1.0 / (1.0 + snr);
    let gauss = Normal::new(0.0, (n / 2.0).sqrt()).expect("finite variance");
    let (mut m1, mut m2) = (0.0, 0.0);
    for _ in 0..samples {
        let phi: f64 = rng.gen::<f64>() * TWO_PI;
        let re = s.sqrt() * phi.cos() + gauss.sample(&mut rng);
        let im = s.sqrt() * phi.sin() + gauss.sample(&mut rng);
        let i = re * re + im * im;
        m1 += i;
        m2 += i * i;
    }
    let k = samples as f64;
    (m2 / k) / (m1 / k).powi(2)
}

/// B = τ·bandwidth.
pub fn time_bandwidth_product(tau: f64, bandwidth: f64) -> Result<f64> {
    ensure_positive("tau", tau)?;
    ensure_positive("bandwidth", bandwidth)?;
    Ok(tau * bandwidth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn record(n_signal: f64, n_noise: f64) -> CountRecord {
        CountRecord {
            n_signal,
            n_noise,
            ..CountRecord::default()
        }
    }

    #[test]
    fn reference_record() {
        let rec = CountRecord::default();
        assert_relative_eq!(eta_e2e(&rec).unwrap(), 33_000.0 / 1.002e6, max_relative = 1e-12);
        assert!((eta_e2e(&rec).unwrap() - 0.0329).abs() < 5e-5);
        assert!((snr(&rec).unwrap() - 3.667).abs() < 1e-3);
        assert!((mu1(&rec).unwrap() - 0.2727).abs() < 1e-4);
        let (at_t, total) = eta_intrinsic(&rec, 50e-9, 68e-9).unwrap();
        assert!((at_t - 0.0988).abs() < 1e-4);
        assert!((total - 0.170).abs() < 1e-3);
    }

    #[test]
    fn unity_snr_point() {
        let rec = record(2000.0, 1000.0);
        assert_eq!(snr(&rec).unwrap(), 1.0);
        assert_eq!(mu1(&rec).unwrap(), rec.alpha2);
        assert_eq!(eta_e2e(&record(500.0, 500.0)).unwrap(), 0.0);
    }

    #[test]
    fn invalid_records() {
        assert!(snr(&record(10.0, 0.0)).is_err());
        assert!(eta_e2e(&record(1.0, 2.0)).is_err());
        let rec = CountRecord {
            eta_apd: 1.5,
            ..CountRecord::default()
        };
        assert!(eta_e2e(&rec).is_err());
    }

    #[test]
    fn intrinsic_decay_correction() {
        let rec = CountRecord::default();
        let (a, b) = eta_intrinsic(&rec, 0.0, 68e-9).unwrap();
        assert_eq!(a, b);
        let (a, b) = eta_intrinsic(&rec, 68e-9, 68e-9).unwrap();
        assert_relative_eq!(b / a, std::f64::consts::E, max_relative = 1e-12);
    }

    fn decay_points(eta0: f64, tau: f64, n: usize) -> Vec<(f64, f64)> {
        (0..n)
            .map(|i| {
                let t = i as f64 * 150e-9 / (n - 1) as f64;
                (t, eta0 * (-(t / tau).powi(2)).exp())
            })
            .collect()
    }

    #[test]
    fn lifetime_fit_recovers_exact_model() {
        let fit = lifetime_fit(&decay_points(0.17, 68e-9, 12)).unwrap();
        assert_relative_eq!(fit.eta0, 0.17, max_relative = 1e-6);
        assert_relative_eq!(fit.tau, 68e-9, max_relative = 1e-6);
    }

    #[test]
    fn lifetime_fit_scale_invariance() {
        let pts = decay_points(0.17, 68e-9, 8);
        let a = lifetime_fit(&pts).unwrap();
        let scaled: Vec<_> = pts.iter().map(|&(t, e)| (t, 3.0 * e)).collect();
        let b = lifetime_fit(&scaled).unwrap();
        assert_relative_eq!(b.eta0, 3.0 * a.eta0, max_relative = 1e-8);
        assert_relative_eq!(b.tau, a.tau, max_relative = 1e-8);
    }

    #[test]
    fn lifetime_fit_with_noise() {
        let mut hits = 0;
        for seed in 0..100u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let noise = Normal::new(0.0, 0.02).unwrap();
            let pts: Vec<_> = decay_points(0.17, 68e-9, 20)
                .into_iter()
                .map(|(t, e)| (t, e * (1.0 + noise.sample(&mut rng))))
                .collect();
            let fit = lifetime_fit(&pts).unwrap();
            if (fit.tau / 68e-9 - 1.0).abs() < 0.05 {
                hits += 1;
            }
        }
        // 2 % noise on 20 points gives a ~1 % standard error on τ
        assert!(hits >= 99, "success fraction {hits}/100");
    }

    #[test]
    fn lifetime_fit_rejects_bad_input() {
        assert!(lifetime_fit(&[(0.0, 1.0), (1.0, 0.5)]).is_err());
        assert!(lifetime_fit(&[(0.0, 0.1), (1.0, 0.2), (2.0, 0.3)]).is_err());
    }

    #[test]
    fn visibility_limits() {
        assert!((visibility_model(2.0, 1.0) - 0.667).abs() < 1e-3);
        assert_eq!(visibility_model(f64::INFINITY, 0.97), 0.97);
        assert!(visibility_model(1e6, 1.0) > 0.99);
        assert_eq!(visibility_model(0.0, 0.8), 0.0);
    }

    #[test]
    fn g2_mixture_matches_two_field_oracle() {
        for (i, &snr) in [0.5, 1.0, 2.0, 3.67, 10.0].iter().enumerate() {
            let mc = g2_two_field_monte_carlo(snr, 2_000_000, 11 + i as u64);
            let model = g2_mixture(snr, 1.0, 2.0, true);
            assert!((model / mc - 1.0).abs() < 0.01, "snr {snr}: model {model} mc {mc}");
            let no_beat = g2_mixture(snr, 1.0, 2.0, false);
            assert!((no_beat / mc - 1.0).abs() > 0.01 || snr > 5.0);
        }
        assert!((g2_mixture(3.67, 1.0, 2.0, true) - 1.38).abs() < 0.005);
    }

    #[test]
    fn g2_mixture_limits() {
        assert_eq!(g2_mixture(f64::INFINITY, 1.0, 2.0, true), 1.0);
        assert_eq!(g2_mixture(0.0, 1.0, 2.0, true), 2.0);
        assert!((g2_mixture(0.7, 1.0, 1.0, false) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn g2_mixture_bound_on_grid() {
        for i in 0..=40 {
            let snr = 0.25 * i as f64;
            for gs in [0.0, 0.5, 1.0, 1.5, 2.0] {
                for gn in [1.0, 1.5, 2.0, 3.0] {
                    let g = g2_mixture(snr, gs, gn, true);
                    assert!(g <= f64::max(gs, gn + 1.0) + 1e-12, "{snr} {gs} {gn} {g}");
                }
            }
        }
    }

    #[test]
    fn time_bandwidth() {
        assert!((time_bandwidth_product(68e-9, 0.66e9).unwrap() - 44.88).abs() < 1e-9);
        assert_relative_eq!(time_bandwidth_product(1.0 / 3e8, 3e8).unwrap(), 1.0);
        assert!(time_bandwidth_product(0.0, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn counting_is_scale_invariant(ns in 1.0f64..1e6, frac in 0.01f64..1.0, c in 0.1f64..100.0) {
            let nn = ns * frac;
            let a = record(ns, nn);
            let b = CountRecord { n_signal: c * ns, n_noise: c * nn, t_int: c * a.t_int, ..a };
            prop_assert!((eta_e2e(&a).unwrap() - eta_e2e(&b).unwrap()).abs() <= 1e-12 * eta_e2e(&a).unwrap().abs() + 1e-15);
            prop_assert!((snr(&a).unwrap() - snr(&b).unwrap()).abs() <= 1e-12 * snr(&a).unwrap().abs() + 1e-15);
            if frac < 1.0 {
                prop_assert!((mu1(&a).unwrap() / mu1(&b).unwrap() - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn coherence_models_monotone_in_snr(s1 in 0.0f64..50.0, ds in 0.0f64..50.0, v0 in 0.0f64..1.0) {
            let s2 = s1 + ds;
            prop_assert!(visibility_model(s2, v0) >= visibility_model(s1, v0) - 1e-15);
            prop_assert!(g2_mixture(s2, 1.0, 2.0, true) <= g2_mixture(s1, 1.0, 2.0, true) + 1e-15);
            prop_assert!(g2_mixture(s2, 1.0, 2.0, false) <= g2_mixture(s1, 1.0, 2.0, false) + 1e-15);
        }
    }
}
