//! Small-network fidelity checks of the online rules against the oracles.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::config::{ConfigError, DelayMode, NetworkConfig};
use crate::data::DenseSample;
use crate::dynamics::{ForwardMode, SpikeMode};
use crate::learn::{sample_gradients, Gradients, Group, LearnError, LearnerOptions};
use crate::oracle::{bptt_grad, finite_diff_grad, live_params, GradReport};
use crate::params::NetworkParams;

#[derive(Debug, Error)]
pub enum GradCheckError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Learn(#[from] LearnError),
}

/// Largest problem the check accepts; the oracles scale with `T²`.
pub const MAX_STEPS: usize = 200;
pub const MAX_UNITS: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckSpec {
    pub net: NetworkConfig,
    pub t_len: usize,
    /// Probability that an input channel is active in a frame.
    pub input_rate: f64,
    /// Multiplier applied to initial input weights so hidden potentials
    /// visit the surrogate's support.
    pub weight_scale: f64,
    /// Finite-difference step.
    pub h: f64,
    pub seeds: Vec<u64>,
    pub weight_max_rel: f64,
    pub weight_min_cosine: f64,
    pub delay_min_cosine: f64,
    /// Recurrent nets are only approximated online; their weights are held
    /// to this pooled cosine instead of the feedforward tolerances.
    pub recurrent_min_cosine: f64,
    #[doc(hidden)]
    pub trace_decay_override: Option<f64>,
}

impl Default for GradCheckSpec {
    fn default() -> Self {
        Self {
            net: NetworkConfig {
                n_in: 6,
                n_hidden: 4,
                n_out: 3,
                delay_in: DelayMode::Synaptic,
                sigma: 2.0,
                ..Default::default()
            },
            t_len: 25,
            input_rate: 0.25,
            weight_scale: 3.0,
            h: 1e-3,
            seeds: (0..20).collect(),
            weight_max_rel: 1e-4,
            weight_min_cosine: 0.9999,
            delay_min_cosine: 0.99,
            recurrent_min_cosine: 0.8,
            trace_decay_override: None,
        }
    }
}

impl GradCheckSpec {
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.net.validate()?;
        if self.t_len > MAX_STEPS {
            return Err(ConfigError::NonPositive { name: "t_len (too large for gradcheck)", value: self.t_len as f64 });
        }
        for (name, n) in [("n_in", self.net.n_in), ("n_hidden", self.net.n_hidden), ("n_out", self.net.n_out)] {
            if n > MAX_UNITS {
                return Err(ConfigError::NonPositive { name, value: n as f64 });
            }
        }
        if !(self.h > 0.0) {
            return Err(ConfigError::NonPositive { name: "h", value: self.h });
        }
        Ok(())
    }

    fn learner(&self, spike: SpikeMode) -> LearnerOptions {
        LearnerOptions {
            mode: ForwardMode::smoothed(self.net.sigma, spike),
            trace_decay_override: self.trace_decay_override,
            ..Default::default()
        }
    }
}

/// Random parameters and a random labelled input for one seed.
pub fn random_problem(
    spec: &GradCheckSpec,
    seed: u64,
) -> Result<(NetworkConfig, NetworkParams, DenseSample), ConfigError> {
    let cfg = NetworkConfig { seed, ..spec.net.clone() };
    let mut params = NetworkParams::init(&cfg)?;
    params.w_in.as_mut_slice().iter_mut().for_each(|w| *w *= spec.weight_scale);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_da7a);
    let frames = (0..spec.t_len * cfg.n_in).map(|_| rng.gen_bool(spec.input_rate) as u8).collect();
    let label = rng.gen_range(0..cfg.n_out);
    Ok((cfg.clone(), params, DenseSample::new(cfg.n_in, frames, label)))
}

/// Online gradients on the smoothed forward pass.
pub fn online_smoothed(
    spec: &GradCheckSpec,
    sample: &DenseSample,
    params: &NetworkParams,
    cfg: &NetworkConfig,
    spike: SpikeMode,
) -> Result<Gradients, LearnError> {
    Ok(sample_gradients(sample, params, cfg, spec.learner(spike))?.0)
}

const WEIGHT_GROUPS: [Group; 3] = [Group::WIn, Group::WRec, Group::WOut];
const DELAY_GROUPS: [Group; 2] = [Group::DIn, Group::DRec];

/// Online weight gradients vs reverse mode for one seed.
pub fn weights_vs_bptt(
    spec: &GradCheckSpec,
    seed: u64,
    spike: SpikeMode,
) -> Result<(GradReport, NetworkParams), GradCheckError> {
    let (cfg, params, sample) = random_problem(spec, seed)?;
    let online = online_smoothed(spec, &sample, &params, &cfg, spike)?;
    let oracle = bptt_grad(&sample, &params, &cfg, spike);
    Ok((GradReport::compare(&params, &online, &oracle, &WEIGHT_GROUPS), params))
}

/// Online delay gradients vs central differences (soft spikes) for one seed.
pub fn delays_vs_fd(spec: &GradCheckSpec, seed: u64) -> Result<(GradReport, NetworkParams), GradCheckError> {
    let (cfg, params, sample) = random_problem(spec, seed)?;
    let online = online_smoothed(spec, &sample, &params, &cfg, SpikeMode::Soft)?;
    let selected = live_params(&params, &DELAY_GROUPS);
    let fd = finite_diff_grad(&sample, &params, &cfg, SpikeMode::Soft, &selected, spec.h);
    Ok((GradReport::compare_fd(&params, &online, &fd), params))
}

#[derive(Debug, Clone)]
pub struct GradCheckOutcome {
    /// Weight rows vs reverse mode followed by delay rows vs finite
    /// differences, for the first seed.
    pub report: GradReport,
    pub weight_max_rel: f64,
    /// Smallest per-group weight cosine over seeds.
    pub weight_min_cosine: f64,
    /// Smallest pooled weight cosine over seeds.
    pub weight_min_pooled_cosine: f64,
    /// Median over seeds of the pooled delay cosine.
    pub delay_cosine_median: f64,
    pub delay_cosines: Vec<f64>,
    pub weight_pass: bool,
    pub delay_pass: bool,
}

impl GradCheckOutcome {
    pub fn pass(&self) -> bool {
        self.weight_pass && self.delay_pass
    }
}

/// Run both checks over every seed.
///
/// Weights: every seed must satisfy the relative-error and cosine bounds
/// (feedforward) or the pooled-cosine bound (recurrent).
/// Delays: every seed's pooled cosine must reach the threshold.
pub fn run(spec: &GradCheckSpec) -> Result<GradCheckOutcome, GradCheckError> {
    spec.validate()?;
    let mut weight_max_rel: f64 = 0.0;
    let mut weight_min_cosine: f64 = 1.0;
    let mut weight_min_pooled_cosine: f64 = 1.0;
    let mut delay_cosines = Vec::new();
    let mut first: Option<GradReport> = None;
    let has_delays = spec.net.delay_in != DelayMode::None || spec.net.delay_rec != DelayMode::None;
    for &seed in &spec.seeds {
        let (wr, params) = weights_vs_bptt(spec, seed, SpikeMode::Binary)?;
        for s in &wr.groups {
            weight_max_rel = weight_max_rel.max(s.max_rel_err);
            weight_min_cosine = weight_min_cosine.min(s.cosine);
        }
        weight_min_pooled_cosine = weight_min_pooled_cosine.min(wr.pooled_cosine(&WEIGHT_GROUPS));
        let mut rows = wr.rows.clone();
        if has_delays {
            let (dr, _) = delays_vs_fd(spec, seed)?;
            delay_cosines.push(dr.pooled_cosine(&DELAY_GROUPS));
            rows.extend(dr.rows);
        }
        if first.is_none() {
            first = Some(GradReport::from_pairs(
                &params,
                rows.into_iter().map(|r| (r.group, r.index, r.online, r.oracle, r.smooth)),
            ));
        }
    }
    let mut sorted = delay_cosines.clone();
    sorted.sort_by(f64::total_cmp);
    let delay_cosine_median = if sorted.is_empty() { 1.0 } else { sorted[sorted.len() / 2] };
    let weight_pass = if spec.net.recurrent {
        weight_min_pooled_cosine >= spec.recurrent_min_cosine
    } else {
        weight_max_rel <= spec.weight_max_rel && weight_min_cosine >= spec.weight_min_cosine
    };
    Ok(GradCheckOutcome {
        report: first.unwrap_or(GradReport { rows: vec![], groups: vec![] }),
        weight_max_rel,
        weight_min_cosine,
        weight_min_pooled_cosine,
        delay_cosine_median,
        weight_pass,
        delay_pass: delay_cosines.iter().all(|c| *c >= spec.delay_min_cosine),
        delay_cosines,
    })
}
