//! Pointwise functions used by the learning rules: the triangular surrogate
//! derivative, its antiderivative, and the delay-parameterized Gaussian
//! spike kernel with its delay derivative.

use std::f64::consts::PI;
use std::ops::RangeInclusive;

use crate::config::ConfigError;

/// Triangular pseudo-derivative of the spike function,
/// `(gamma/v_th) * max(0, 1 - |(v - v_th)/v_th|)`.
#[inline]
pub fn surrogate_pd(v: f64, v_th: f64, gamma_pd: f64) -> f64 {
    (gamma_pd / v_th) * (1.0 - ((v - v_th) / v_th).abs()).max(0.0)
}

/// Antiderivative of [`surrogate_pd`] that is zero below 0 and saturates at
/// `gamma_pd` above `2 v_th`. Used as a differentiable spike in the
/// soft-spike forward pass.
#[inline]
pub fn soft_spike(v: f64, v_th: f64, gamma_pd: f64) -> f64 {
    let u = v / v_th;
    if u <= 0.0 {
        0.0
    } else if u <= 1.0 {
        gamma_pd * 0.5 * u * u
    } else if u <= 2.0 {
        let r = 2.0 - u;
        gamma_pd * (1.0 - 0.5 * r * r)
    } else {
        gamma_pd
    }
}

/// Region of the triangle a potential falls in. Changes of region mark
/// points where the surrogate is not differentiable.
#[inline]
pub fn surrogate_region(v: f64, v_th: f64) -> u8 {
    if v < 0.0 {
        0
    } else if v < v_th {
        1
    } else if v < 2.0 * v_th {
        2
    } else {
        3
    }
}

#[inline]
fn gauss_at(u: f64, sigma: f64) -> f64 {
    (-(u * u) / (2.0 * sigma * sigma)).exp() / ((2.0 * PI).sqrt() * sigma)
}

#[inline]
fn gauss_slope_at(u: f64, sigma: f64) -> f64 {
    u / ((2.0 * PI).sqrt() * sigma.powi(3)) * (-(u * u) / (2.0 * sigma * sigma)).exp()
}

/// Gaussian stand-in for a spike emitted at `t_k` and shifted by `d`
/// timesteps, evaluated at `t`.
pub fn gauss_kernel(t: f64, t_k: f64, d: f64, sigma: f64) -> Result<f64, ConfigError> {
    if !(sigma > 0.0) {
        return Err(ConfigError::NonPositive { name: "sigma", value: sigma });
    }
    Ok(gauss_at(t - t_k - d, sigma))
}

/// Derivative of [`gauss_kernel`] with respect to the shift `d`.
pub fn gauss_kernel_ddelay(t: f64, t_k: f64, d: f64, sigma: f64) -> f64 {
    gauss_slope_at(t - t_k - d, sigma)
}

/// Truncated Gaussian kernel of fixed width, evaluated on integer lags.
///
/// A read at lag `l` (presynaptic activity `l` steps in the past) with
/// continuous shift `s` contributes with weight `G(l - s)` when
/// `|l - s| <= half_width`. Lags are non-negative, so the kernel is causal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpikeKernel {
    pub sigma: f64,
    pub half_width: f64,
}

impl SpikeKernel {
    pub fn new(sigma: f64) -> Self {
        Self { sigma, half_width: (3.0 * sigma).ceil() }
    }

    #[inline]
    pub fn value(&self, lag: usize, shift: f64) -> f64 {
        gauss_at(lag as f64 - shift, self.sigma)
    }

    #[inline]
    pub fn slope(&self, lag: usize, shift: f64) -> f64 {
        gauss_slope_at(lag as f64 - shift, self.sigma)
    }

    /// Integer lags inside the truncation window, clipped to `[0, max_lag]`.
    #[inline]
    pub fn lags(&self, shift: f64, max_lag: usize) -> RangeInclusive<usize> {
        let lo = (shift - self.half_width).ceil().max(0.0);
        let hi = (shift + self.half_width).floor().min(max_lag as f64);
        if hi < lo {
            // empty
            #[allow(clippy::reversed_empty_ranges)]
            return 1..=0;
        }
        lo as usize..=hi as usize
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn surrogate_examples() {
        assert!((surrogate_pd(1.0, 1.0, 0.3) - 0.3).abs() < 1e-15);
        assert_eq!(surrogate_pd(0.0, 1.0, 0.3), 0.0);
        assert_eq!(surrogate_pd(2.0, 1.0, 0.3), 0.0);
        assert!((surrogate_pd(1.5, 1.0, 0.3) - 0.15).abs() < 1e-15);
        assert_eq!(surrogate_pd(-3.0, 1.0, 0.3), 0.0);
    }

    #[test]
    fn soft_spike_derivative_is_surrogate() {
        let (v_th, g) = (0.8, 0.3);
        let h = 1e-6;
        for k in -10..30 {
            let v = k as f64 * 0.07 + 0.013;
            let fd = (soft_spike(v + h, v_th, g) - soft_spike(v - h, v_th, g)) / (2.0 * h);
            assert!((fd - surrogate_pd(v, v_th, g)).abs() < 1e-7, "v={v}");
        }
        assert_eq!(soft_spike(5.0, v_th, g), g);
    }

    #[test]
    fn gaussian_examples() {
        let peak = gauss_kernel(3.0, 1.0, 2.0, 1.0).unwrap();
        assert!((peak - 0.398942).abs() < 1e-6);
        let one_sigma = gauss_kernel(4.0, 1.0, 2.0, 1.0).unwrap();
        assert!((one_sigma - 0.241971).abs() < 1e-6);
        assert!(gauss_kernel(1e3, 0.0, 0.0, 1.0).unwrap() < 1e-300);
        assert!(gauss_kernel(0.0, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn gaussian_slope_matches_central_difference() {
        // u = t - t_k - d = 1, sigma = 1
        let h = 1e-5;
        let fd =
            (gauss_kernel(2.0, 0.0, 1.0 + h, 1.0).unwrap() - gauss_kernel(2.0, 0.0, 1.0 - h, 1.0).unwrap()) / (2.0 * h);
        let exact = gauss_kernel_ddelay(2.0, 0.0, 1.0, 1.0);
        assert!((exact - 0.241971).abs() < 1e-6);
        assert!((fd - exact).abs() < 1e-8);
        assert_eq!(gauss_kernel_ddelay(3.0, 1.0, 2.0, 1.0), 0.0);
        let a = gauss_kernel_ddelay(5.3, 0.0, 2.0, 1.7);
        let b = gauss_kernel_ddelay(-1.3, 0.0, 2.0, 1.7);
        assert!((a + b).abs() < 1e-15);
    }

    #[test]
    fn window_lags() {
        let k = SpikeKernel::new(2.0);
        assert_eq!(k.half_width, 6.0);
        assert_eq!(k.lags(0.0, 40), 0..=6);
        assert_eq!(k.lags(10.5, 40), 5..=16);
        assert_eq!(k.lags(24.0, 20), 18..=20);
        assert!(k.lags(30.0, 20).is_empty());
    }
}
