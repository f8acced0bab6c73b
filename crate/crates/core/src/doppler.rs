//! Doppler (velocity-class) discretisation.

use statrs::function::erf::erfc;

use crate::consts::TWO_PI;

const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_4; // 2·sqrt(2 ln 2)

pub fn fwhm_to_sigma(fwhm: f64) -> f64 {
    fwhm / FWHM_PER_SIGMA
}

/// Gauss-Hermite nodes and weights for ∫ e^{-x²} f(x) dx, ascending nodes.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "need at least one node");
    let pim4 = std::f64::consts::PI.powf(-0.25);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = (n + 1) / 2;
    let nf = n as f64;
    let mut z = 0.0;
    for i in 0..m {
        // initial guesses for the largest roots, then extrapolate inwards
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    x.reverse();
    w.reverse();
    (x, w)
}

/// Discrete velocity classes: one-photon detuning shift (rad/s) and
/// probability weight (weights sum to one).
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityClasses {
    pub detunings: Vec<f64>,
    pub weights: Vec<f64>,
}

impl VelocityClasses {
    /// Gauss-Hermite classes for a Gaussian detuning distribution of FWHM
    /// `doppler_fwhm` (Hz). A zero width collapses to one class.
    pub fn gaussian(doppler_fwhm: f64, n: usize) -> Self {
        if doppler_fwhm == 0.0 || n == 1 {
            return VelocityClasses {
                detunings: vec![0.0],
                weights: vec![1.0],
            };
        }
        let sigma = TWO_PI * fwhm_to_sigma(doppler_fwhm);
        let (x, w) = gauss_hermite(n);
        let norm = std::f64::consts::PI.sqrt();
        VelocityClasses {
            detunings: x.iter().map(|xi| std::f64::consts::SQRT_2 * sigma * xi).collect(),
            weights: w.iter().map(|wi| wi / norm).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Line-centre ratio of Doppler-averaged to homogeneous absorption,
/// `Re⟨γ/(γ + iδ)⟩` over δ ~ N(0, σ²) (σ in rad/s).
pub fn voigt_peak_factor(gamma: f64, sigma: f64) -> f64 {
    if sigma == 0.0 {
        return 1.0;
    }
    let y = gamma / (std::f64::consts::SQRT_2 * sigma);
    // e^{y²} erfc(y) is well conditioned for the small y of thermal vapor
    let erfcx = if y < 20.0 {
        (y * y).exp() * erfc(y)
    } else {
        1.0 / (y * std::f64::consts::PI.sqrt()) * (1.0 - 0.5 / (y * y))
    };
    (std::f64::consts::PI / 2.0).sqrt() * (gamma / sigma) * erfcx
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn hermite_rule_integrates_moments() {
        for n in [1, 2, 5, 16, 32] {
            let (x, w) = gauss_hermite(n);
            let sqrt_pi = std::f64::consts::PI.sqrt();
            assert_relative_eq!(w.iter().sum::<f64>(), sqrt_pi, max_relative = 1e-12);
            if n >= 2 {
                let m2: f64 = x.iter().zip(&w).map(|(x, w)| w * x * x).sum();
                assert_relative_eq!(m2, sqrt_pi / 2.0, max_relative = 1e-12);
            }
            if n >= 3 {
                let m4: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(4)).sum();
                assert_relative_eq!(m4, 3.0 * sqrt_pi / 4.0, max_relative = 1e-11);
            }
            assert!(x.windows(2).all(|p| p[1] > p[0]));
        }
    }

    #[test]
    fn velocity_classes_reproduce_gaussian_variance() {
        let vc = VelocityClasses::gaussian(500e6, 16);
        let sigma = TWO_PI * fwhm_to_sigma(500e6);
        let var: f64 = vc.detunings.iter().zip(&vc.weights).map(|(d, w)| w * d * d).sum();
        assert_relative_eq!(var, sigma * sigma, max_relative = 1e-12);
        assert_relative_eq!(vc.weights.iter().sum::<f64>(), 1.0, max_relative = 1e-13);
    }

    #[test]
    fn zero_width_collapses_to_one_class() {
        let vc = VelocityClasses::gaussian(0.0, 16);
        assert_eq!(vc.detunings, vec![0.0]);
        assert_eq!(vc.weights, vec![1.0]);
    }

    #[test]
    fn voigt_factor_matches_direct_quadrature() {
        let gamma = 2e7;
        let sigma = 1.3e9;
        // trapezoid quadrature on a fine grid as an independent check
        let n = 400_000;
        let lim = 12.0 * sigma;
        let h = 2.0 * lim / n as f64;
        let mut acc = 0.0;
        for i in 0..=n {
            let d = -lim + i as f64 * h;
            let g = (-d * d / (2.0 * sigma * sigma)).exp() / (sigma * (TWO_PI).sqrt());
            let wgt = if i == 0 || i == n { 0.5 } else { 1.0 };
            acc += wgt * h * g * gamma * gamma / (gamma * gamma + d * d);
        }
        assert_relative_eq!(voigt_peak_factor(gamma, sigma), acc, max_relative = 1e-6);
    }
}
