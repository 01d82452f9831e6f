//! Network hyperparameters and the scalar helpers derived from them.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("d_max must be odd and >= 1, got {0}")]
    DelayCap(usize),
    #[error("sparsity must lie in [0, 1), got {0}")]
    Sparsity(f64),
    #[error("v_reset must be 0, got {0}")]
    Reset(f64),
    #[error("recurrent delays configured on a feedforward network")]
    RecurrentDelayWithoutRecurrence,
    #[error("network needs at least one input, hidden and output unit")]
    EmptyLayer,
}

/// How a connection group carries delays.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DelayMode {
    /// No delay line: the presynaptic frame is read at lag 0.
    #[default]
    None,
    /// One delay per presynaptic unit, shared by all of its targets.
    Axonal,
    /// One delay per connection.
    Synaptic,
}

impl DelayMode {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "none" => Some(Self::None),
            "axonal" => Some(Self::Axonal),
            "synaptic" => Some(Self::Synaptic),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::None => "none",
            Self::Axonal => "axonal",
            Self::Synaptic => "synaptic",
        }
    }
}

/// Initial placement of delay parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DelayInit {
    /// Uniform over the whole clamp range.
    #[default]
    Uniform,
    /// All delays at the lower clamp bound (zero effective delay).
    Zero,
}

/// Source of the feedback matrix used to form learning signals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Feedback {
    /// Feedback is the transpose of the readout weights.
    #[default]
    Symmetric,
    /// Fixed random feedback drawn at initialization.
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub n_in: usize,
    pub n_hidden: usize,
    pub n_out: usize,
    pub recurrent: bool,
    pub delay_in: DelayMode,
    pub delay_rec: DelayMode,
    pub delay_init: DelayInit,
    /// Timestep (ms).
    pub dt: f64,
    /// Hidden membrane time constant (ms).
    pub tau_m: f64,
    /// Readout time constant (ms).
    pub tau_out: f64,
    pub v_th: f64,
    pub v_reset: f64,
    pub gamma_pd: f64,
    /// Gaussian kernel width in timesteps.
    pub sigma: f64,
    /// Delay cap in timesteps (odd).
    pub d_max: usize,
    pub lr_w: f64,
    pub lr_d: f64,
    /// Fraction of masked-out input/recurrent connections.
    pub sparsity: f64,
    pub feedback: Feedback,
    pub seed: u64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            n_in: 116,
            n_hidden: 16,
            n_out: 20,
            recurrent: false,
            delay_in: DelayMode::Synaptic,
            delay_rec: DelayMode::None,
            delay_init: DelayInit::Uniform,
            dt: 10.0,
            tau_m: 20.0,
            tau_out: 1000.0,
            v_th: 1.0,
            v_reset: 0.0,
            gamma_pd: 0.3,
            sigma: 2.0,
            d_max: 25,
            lr_w: 1e-4,
            lr_d: 1e-2,
            sparsity: 0.0,
            feedback: Feedback::Symmetric,
            seed: 0,
        }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        for (name, value) in [
            ("dt", self.dt),
            ("tau_m", self.tau_m),
            ("tau_out", self.tau_out),
            ("v_th", self.v_th),
            ("sigma", self.sigma),
        ] {
            if !(value > 0.0) || !value.is_finite() {
                return Err(ConfigError::NonPositive { name, value });
            }
        }
        if self.d_max == 0 || self.d_max.is_multiple_of(2) {
            return Err(ConfigError::DelayCap(self.d_max));
        }
        if !(0.0..1.0).contains(&self.sparsity) {
            return Err(ConfigError::Sparsity(self.sparsity));
        }
        if self.v_reset != 0.0 {
            return Err(ConfigError::Reset(self.v_reset));
        }
        if !self.recurrent && self.delay_rec != DelayMode::None {
            return Err(ConfigError::RecurrentDelayWithoutRecurrence);
        }
        if self.n_in == 0 || self.n_hidden == 0 || self.n_out == 0 {
            return Err(ConfigError::EmptyLayer);
        }
        Ok(())
    }

    /// Hidden membrane decay per step.
    pub fn alpha(&self) -> f64 {
        (-self.dt / self.tau_m).exp()
    }

    /// Readout decay per step.
    pub fn kappa(&self) -> f64 {
        (-self.dt / self.tau_out).exp()
    }

    /// Largest admissible delay parameter magnitude, `(d_max - 1) / 2`.
    pub fn delay_bound(&self) -> f64 {
        delay_bound(self.d_max)
    }

    /// Half-width of the truncated Gaussian kernel in timesteps.
    pub fn kernel_half_width(&self) -> f64 {
        (3.0 * self.sigma).ceil()
    }

    /// Ring-buffer depth that covers every delayed or kernel-windowed read.
    pub fn history_len(&self) -> usize {
        self.d_max + self.kernel_half_width() as usize + 1
    }

    pub fn density(&self) -> f64 {
        1.0 - self.sparsity
    }
}

/// `exp(-dt / tau)`.
pub fn decay_factor(tau: f64, dt: f64) -> Result<f64, ConfigError> {
    if !(tau > 0.0) {
        return Err(ConfigError::NonPositive { name: "tau", value: tau });
    }
    if !(dt > 0.0) {
        return Err(ConfigError::NonPositive { name: "dt", value: dt });
    }
    Ok((-dt / tau).exp())
}

pub fn delay_bound(d_max: usize) -> f64 {
    (d_max as f64 - 1.0) / 2.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decay_factor_values() {
        assert!((decay_factor(20.0, 10.0).unwrap() - 0.606531).abs() < 1e-6);
        assert!((decay_factor(10.0, 10.0).unwrap() - 0.367879).abs() < 1e-6);
        assert!((decay_factor(1000.0, 10.0).unwrap() - 0.990050).abs() < 1e-6);
    }

    #[test]
    fn decay_factor_rejects_non_positive() {
        assert!(decay_factor(0.0, 10.0).is_err());
        assert!(decay_factor(10.0, -1.0).is_err());
        assert!(decay_factor(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn default_config_is_valid() {
        let cfg = NetworkConfig::default();
        cfg.validate().unwrap();
        assert!(cfg.alpha() > 0.0 && cfg.alpha() < 1.0);
        assert!(cfg.kappa() > 0.0 && cfg.kappa() < 1.0);
        assert_eq!(cfg.delay_bound(), 12.0);
        assert_eq!(cfg.kernel_half_width(), 6.0);
    }

    #[test]
    fn even_delay_cap_rejected() {
        let cfg = NetworkConfig { d_max: 24, ..Default::default() };
        assert_eq!(cfg.validate(), Err(ConfigError::DelayCap(24)));
    }

    #[test]
    fn recurrent_delays_need_recurrence() {
        let cfg = NetworkConfig { delay_rec: DelayMode::Axonal, ..Default::default() };
        assert_eq!(cfg.validate(), Err(ConfigError::RecurrentDelayWithoutRecurrence));
    }
}
