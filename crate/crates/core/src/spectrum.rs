//! Spectral width of sampled envelopes.

use rustfft::FftPlanner;

use crate::domain::{make_signal_pulse, PulseEnvelope};
use crate::error::{Error, Result};
use crate::C64;

const MIN_TRANSFORM_LEN: usize = 1 << 16;

/// Power spectrum `|FFT(a)|²` of the zero-padded envelope, returned as
/// (frequencies in Hz ascending, power) with DC in the middle.
pub fn power_spectrum(p: &PulseEnvelope, min_len: usize) -> (Vec<f64>, Vec<f64>) {
    let n = min_len.max(16 * p.len()).next_power_of_two();
    let mut buf = vec![C64::new(0.0, 0.0); n];
    buf[..p.len()].copy_from_slice(p.amplitude());
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let df = 1.0 / (n as f64 * p.dt());
    let half = n / 2;
    let mut freqs = Vec::with_capacity(n);
    let mut power = Vec::with_capacity(n);
    for i in 0..n {
        let k = (i + half) % n;
        let signed = if k >= half { k as isize - n as isize } else { k as isize };
        freqs.push(signed as f64 * df);
        power.push(buf[k].norm_sqr());
    }
    (freqs, power)
}

/// FWHM in Hz of the power spectrum `|FFT(amplitude)|²`, with half-maximum
/// crossings found by linear interpolation.
pub fn fft_bandwidth(p: &PulseEnvelope) -> Result<f64> {
    let (freqs, power) = power_spectrum(p, MIN_TRANSFORM_LEN);
    let (i_peak, &peak) = power
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty spectrum");
    if peak <= 0.0 {
        return Err(Error::NoHalfMaxCrossing);
    }
    let half = 0.5 * peak;
    let interp = |i_out: usize, i_in: usize| -> f64 {
        let (f0, p0) = (freqs[i_out], power[i_out]);
        let (f1, p1) = (freqs[i_in], power[i_in]);
        f0 + (half - p0) * (f1 - f0) / (p1 - p0)
    };
    let mut lo = i_peak;
    while power[lo] >= half {
        if lo == 0 {
            return Err(Error::NoHalfMaxCrossing);
        }
        lo -= 1;
    }
    let mut hi = i_peak;
    while power[hi] >= half {
        hi += 1;
        if hi == power.len() {
            return Err(Error::NoHalfMaxCrossing);
        }
    }
    Ok(interp(hi, hi - 1) - interp(lo, lo + 1))
}

/// Flat-top duration at which the detected intensity trace of a
/// raised-cosine signal pulse has a spectral FWHM of `target_hz`.
///
/// The bandwidth falls monotonically with the flat top, so a bisection over
/// `[0, max_flat]` suffices. Fails when the target lies outside the
/// bracketed range.
pub fn calibrate_flat_top(rise_10_90: f64, fall_90_10: f64, dt: f64, target_hz: f64) -> Result<f64> {
    let bw = |flat: f64| -> Result<f64> {
        fft_bandwidth(&make_signal_pulse(rise_10_90, fall_90_10, flat, dt)?.intensity_trace())
    };
    let mut lo = 0.0;
    let mut hi = 20.0 * (rise_10_90 + fall_90_10);
    let (b_lo, b_hi) = (bw(lo)?, bw(hi)?);
    if !(b_hi <= target_hz && target_hz <= b_lo) {
        return Err(Error::Domain(format!(
            "target bandwidth {target_hz:e} Hz outside achievable range [{b_hi:e}, {b_lo:e}] Hz"
        )));
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if bw(mid)? > target_hz {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-4 * dt {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}
