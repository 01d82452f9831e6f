//! Learnable parameters, connectivity masks and their initialization.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{ConfigError, DelayInit, DelayMode, Feedback, NetworkConfig};
use crate::data::mask::gen_sparsity_mask;
use crate::tensor::Matrix;

/// Fixed binary connectivity map, `rows` postsynaptic × `cols` presynaptic.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mask {
    rows: usize,
    cols: usize,
    bits: Vec<bool>,
}

impl Mask {
    pub fn full(rows: usize, cols: usize) -> Self {
        Self { rows, cols, bits: vec![true; rows * cols] }
    }

    pub fn from_bits(rows: usize, cols: usize, bits: Vec<bool>) -> Self {
        assert_eq!(bits.len(), rows * cols, "mask length mismatch");
        Self { rows, cols, bits }
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> bool {
        self.bits[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, on: bool) {
        self.bits[r * self.cols + c] = on;
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }
}

/// Delay parameters of one connection group.
///
/// Values are real numbers in `[-(d_max-1)/2, (d_max-1)/2]`; the lower bound
/// means "no delay" and the upper bound means the maximal `d_max - 1` steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DelayParams {
    None,
    /// Per presynaptic unit.
    Axonal(Vec<f64>),
    /// Per connection, `[post × pre]`.
    Synaptic(Matrix),
}

impl DelayParams {
    pub fn mode(&self) -> DelayMode {
        match self {
            Self::None => DelayMode::None,
            Self::Axonal(_) => DelayMode::Axonal,
            Self::Synaptic(_) => DelayMode::Synaptic,
        }
    }

    /// Raw delay parameter for connection `pre -> post`; `None` without delays.
    #[inline]
    pub fn param(&self, post: usize, pre: usize) -> Option<f64> {
        match self {
            Self::None => None,
            Self::Axonal(d) => Some(d[pre]),
            Self::Synaptic(m) => Some(m.get(post, pre)),
        }
    }

    /// Continuous shift in timesteps, `D + (d_max-1)/2`.
    #[inline]
    pub fn shift(&self, post: usize, pre: usize, bound: f64) -> f64 {
        self.param(post, pre).map_or(0.0, |d| d + bound)
    }

    pub fn values(&self) -> &[f64] {
        match self {
            Self::None => &[],
            Self::Axonal(d) => d,
            Self::Synaptic(m) => m.as_slice(),
        }
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        match self {
            Self::None => &mut [],
            Self::Axonal(d) => d,
            Self::Synaptic(m) => m.as_mut_slice(),
        }
    }

    pub fn len(&self) -> usize {
        self.values().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Zero-valued container of the same shape.
    pub fn zeros_like(&self) -> Self {
        match self {
            Self::None => Self::None,
            Self::Axonal(d) => Self::Axonal(vec![0.0; d.len()]),
            Self::Synaptic(m) => Self::Synaptic(Matrix::zeros(m.rows(), m.cols())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkParams {
    pub w_in: Matrix,
    pub w_rec: Option<Matrix>,
    pub w_out: Matrix,
    pub b_fb: Matrix,
    pub d_in: DelayParams,
    pub d_rec: DelayParams,
    pub mask_in: Mask,
    pub mask_rec: Option<Mask>,
}

fn uniform_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, bound: f64) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.gen_range(-bound..=bound))
}

fn init_delays(
    rng: &mut ChaCha8Rng,
    mode: DelayMode,
    init: DelayInit,
    post: usize,
    pre: usize,
    bound: f64,
) -> DelayParams {
    let mut draw = || match init {
        DelayInit::Uniform if bound > 0.0 => rng.gen_range(-bound..=bound),
        _ => -bound,
    };
    match mode {
        DelayMode::None => DelayParams::None,
        DelayMode::Axonal => DelayParams::Axonal((0..pre).map(|_| draw()).collect()),
        DelayMode::Synaptic => DelayParams::Synaptic(Matrix::from_fn(post, pre, |_, _| draw())),
    }
}

impl NetworkParams {
    /// Random initialization, deterministic in `cfg.seed`.
    ///
    /// Weights are uniform in `±1/sqrt(fan_in)`; delays follow `cfg.delay_init`.
    pub fn init(cfg: &NetworkConfig) -> Result<Self, ConfigError> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let (nh, ni, no) = (cfg.n_hidden, cfg.n_in, cfg.n_out);
        let density = cfg.density();
        let bound = cfg.delay_bound();

        let mask_in = gen_sparsity_mask(nh, ni, density, rng.gen());
        let mask_rec = cfg.recurrent.then(|| gen_sparsity_mask(nh, nh, density, rng.gen()));

        let mut w_in = uniform_matrix(&mut rng, nh, ni, 1.0 / (ni as f64).sqrt());
        let mut w_rec = cfg.recurrent.then(|| uniform_matrix(&mut rng, nh, nh, 1.0 / (nh as f64).sqrt()));
        let w_out = uniform_matrix(&mut rng, no, nh, 1.0 / (nh as f64).sqrt());
        let mut d_in = init_delays(&mut rng, cfg.delay_in, cfg.delay_init, nh, ni, bound);
        let mut d_rec = if cfg.recurrent {
            init_delays(&mut rng, cfg.delay_rec, cfg.delay_init, nh, nh, bound)
        } else {
            DelayParams::None
        };
        let b_fb = match cfg.feedback {
            Feedback::Symmetric => w_out.transpose(),
            Feedback::Random => uniform_matrix(&mut rng, nh, no, 1.0 / (no as f64).sqrt()),
        };

        zero_masked(&mut w_in, &mut d_in, &mask_in);
        if let (Some(w), Some(m)) = (w_rec.as_mut(), mask_rec.as_ref()) {
            zero_masked(w, &mut d_rec, m);
        }

        Ok(Self { w_in, w_rec, w_out, b_fb, d_in, d_rec, mask_in, mask_rec })
    }

    /// Clamp every delay parameter into `[-bound, bound]`.
    pub fn clamp_delays(&mut self, bound: f64) {
        for d in self.d_in.values_mut().iter_mut().chain(self.d_rec.values_mut()) {
            *d = d.clamp(-bound, bound);
        }
    }

    /// Shape check against a configuration.
    pub fn matches(&self, cfg: &NetworkConfig) -> bool {
        let (nh, ni, no) = (cfg.n_hidden, cfg.n_in, cfg.n_out);
        let delay_ok = |d: &DelayParams, mode: DelayMode, pre: usize| {
            d.mode() == mode
                && match d {
                    DelayParams::None => true,
                    DelayParams::Axonal(v) => v.len() == pre,
                    DelayParams::Synaptic(m) => m.shape() == (nh, pre),
                }
        };
        self.w_in.shape() == (nh, ni)
            && self.mask_in.shape() == (nh, ni)
            && self.w_out.shape() == (no, nh)
            && self.b_fb.shape() == (nh, no)
            && self.w_rec.as_ref().map(|w| w.shape()) == cfg.recurrent.then_some((nh, nh))
            && self.mask_rec.as_ref().map(|m| m.shape()) == cfg.recurrent.then_some((nh, nh))
            && delay_ok(&self.d_in, cfg.delay_in, ni)
            && delay_ok(&self.d_rec, if cfg.recurrent { cfg.delay_rec } else { DelayMode::None }, nh)
    }
}

fn zero_masked(w: &mut Matrix, d: &mut DelayParams, mask: &Mask) {
    let (rows, cols) = w.shape();
    for r in 0..rows {
        for c in 0..cols {
            if !mask.get(r, c) {
                w.set(r, c, 0.0);
                if let DelayParams::Synaptic(m) = d {
                    m.set(r, c, 0.0);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_is_deterministic_and_in_range() {
        let cfg = NetworkConfig { sparsity: 0.8, ..Default::default() };
        let a = NetworkParams::init(&cfg).unwrap();
        let b = NetworkParams::init(&cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.matches(&cfg));
        let bound = 1.0 / (cfg.n_in as f64).sqrt();
        assert!(a.w_in.as_slice().iter().all(|w| w.abs() <= bound));
        assert!(a.d_in.values().iter().all(|d| d.abs() <= 12.0));
        assert_eq!(a.mask_in.count_ones(), (16.0 * 116.0 * 0.2f64).round() as usize);
        for j in 0..cfg.n_hidden {
            for i in 0..cfg.n_in {
                if !a.mask_in.get(j, i) {
                    assert_eq!(a.w_in.get(j, i), 0.0);
                }
            }
        }
        assert_eq!(a.b_fb, a.w_out.transpose());
    }

    #[test]
    fn zero_init_places_delays_at_lower_bound() {
        let cfg = NetworkConfig { delay_in: DelayMode::Axonal, delay_init: DelayInit::Zero, ..Default::default() };
        let p = NetworkParams::init(&cfg).unwrap();
        assert!(p.d_in.values().iter().all(|d| *d == -12.0));
        assert_eq!(p.d_in.len(), cfg.n_in);
    }

    #[test]
    fn clamp_keeps_bounds() {
        let mut p = NetworkParams::init(&NetworkConfig::default()).unwrap();
        p.d_in.values_mut()[0] = 40.0;
        p.d_in.values_mut()[1] = -40.0;
        p.clamp_delays(12.0);
        assert_eq!(p.d_in.values()[0], 12.0);
        assert_eq!(p.d_in.values()[1], -12.0);
    }
}
