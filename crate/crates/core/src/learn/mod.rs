//! Three-factor online learning.
//!
//! Every learnable parameter `θ_ji` of hidden neuron `j` carries an
//! eligibility vector `ε` (the reset-detached sensitivity `∂v_j/∂θ_ji`), an
//! eligibility trace `e = ψ_j ε` with `ψ_j` the surrogate derivative, and a
//! readout-filtered trace `F = κ F + e`. At each step the gradient
//! accumulates `L_j F_ji`, where `L_j` is the learning signal fed back from
//! the readout error. For delays, `∂v_j/∂D_ji` comes from the Gaussian
//! kernel slope evaluated over the recent presynaptic history.

mod grads;
mod optim;

use thiserror::Error;

pub use grads::{group_values, group_values_mut, is_live, Gradients, Group};
pub use optim::{apply_updates, Adam, Optimizer, OptimizerKind};

use crate::config::NetworkConfig;
use crate::data::DenseSample;
use crate::dynamics::{DynamicsError, ForwardMode, FrameRing, NetworkState, ReadMode, Reads};
use crate::kernel::{surrogate_pd, SpikeKernel};
use crate::params::{DelayParams, Mask, NetworkParams};
use crate::tensor::Matrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LearnError {
    #[error("label {label} outside {classes} classes")]
    Label { label: usize, classes: usize },
    #[error("non-finite gradient in {group} at index {index}")]
    NonFinite { group: &'static str, index: usize },
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

/// Which parameter groups receive updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Learnable {
    /// Input and recurrent weights.
    pub weights: bool,
    pub readout: bool,
    pub delays_in: bool,
    pub delays_rec: bool,
}

impl Learnable {
    pub const ALL: Learnable = Learnable { weights: true, readout: true, delays_in: true, delays_rec: true };

    pub fn allows(&self, group: Group) -> bool {
        match group {
            Group::WIn | Group::WRec => self.weights,
            Group::WOut => self.readout,
            Group::DIn => self.delays_in,
            Group::DRec => self.delays_rec,
        }
    }
}

impl Default for Learnable {
    fn default() -> Self {
        Self::ALL
    }
}

/// Eligibility vectors and readout-filtered traces for one group.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceGroup {
    pub eps: Matrix,
    pub filt: Matrix,
}

impl TraceGroup {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { eps: Matrix::zeros(rows, cols), filt: Matrix::zeros(rows, cols) }
    }

    pub fn reset(&mut self) {
        self.eps.fill(0.0);
        self.filt.fill(0.0);
    }
}

/// `ε ← decay·ε + drive`, `e = ψ_j ε`, `F ← κ F + e`.
///
/// `drive` is the presynaptic read for weights and `∂v/∂D` for delays.
pub fn trace_step(group: &mut TraceGroup, drive: &Matrix, pd: &[f64], decay: f64, kappa: f64) {
    let cols = group.eps.cols();
    for (j, &psi) in pd.iter().enumerate() {
        let eps = group.eps.row_mut(j);
        let src = drive.row(j);
        for i in 0..cols {
            eps[i] = decay * eps[i] + src[i];
        }
        let eps = group.eps.row(j);
        let filt = group.filt.row_mut(j);
        for i in 0..cols {
            filt[i] = kappa * filt[i] + psi * eps[i];
        }
    }
}

/// Weight eligibility update from presynaptic reads already shifted by their delays.
pub fn weight_eligibility_step(group: &mut TraceGroup, delayed_pre: &Matrix, pd: &[f64], alpha: f64, kappa: f64) {
    trace_step(group, delayed_pre, pd, alpha, kappa);
}

/// `∂v_j/∂D_ji = W_ji Σ_lag x_i(t - lag) G'(lag - s_ji)` over the kernel window.
#[allow(clippy::too_many_arguments)]
pub fn delay_sensitivity(
    ring: &FrameRing,
    delays: &DelayParams,
    weights: &Matrix,
    mask: &Mask,
    kernel: &SpikeKernel,
    bound: f64,
    out: &mut Matrix,
) {
    let max_lag = ring.capacity() - 1;
    let (rows, cols) = out.shape();
    for j in 0..rows {
        for i in 0..cols {
            let w = weights.get(j, i);
            let value = match delays.param(j, i) {
                Some(d) if w != 0.0 && mask.get(j, i) => {
                    let s = d + bound;
                    let mut acc = 0.0;
                    for lag in kernel.lags(s, max_lag) {
                        let x = ring.get(lag, i);
                        if x != 0.0 {
                            acc += x * kernel.slope(lag, s);
                        }
                    }
                    w * acc
                }
                _ => 0.0,
            };
            out.set(j, i, value);
        }
    }
}

/// Delay eligibility update: kernel-based `∂v/∂D`, then the trace recursion.
#[allow(clippy::too_many_arguments)]
pub fn delay_eligibility_step(
    group: &mut TraceGroup,
    ring: &FrameRing,
    delays: &DelayParams,
    weights: &Matrix,
    mask: &Mask,
    pd: &[f64],
    cfg: &NetworkConfig,
    scratch: &mut Matrix,
) {
    let kernel = SpikeKernel::new(cfg.sigma);
    delay_sensitivity(ring, delays, weights, mask, &kernel, cfg.delay_bound(), scratch);
    trace_step(group, scratch, pd, cfg.alpha(), cfg.kappa());
}

/// Top-down signal derived from the per-step cross-entropy.
#[derive(Debug, Clone, PartialEq)]
pub struct LearningSignal {
    /// `L_j = Σ_k B_jk (π̂_k − π_k)`.
    pub l: Vec<f64>,
    /// `π̂_k − π_k`.
    pub out_err: Vec<f64>,
    /// Softmax probabilities `π̂`.
    pub probs: Vec<f64>,
    /// `−ln π̂_label`.
    pub loss: f64,
}

pub fn softmax(y: &[f64]) -> Vec<f64> {
    let m = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = y.iter().map(|v| (v - m).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

fn log_softmax_at(y: &[f64], k: usize) -> f64 {
    let m = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + y.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
    y[k] - lse
}

pub fn learning_signal(y: &[f64], label: usize, b_fb: &Matrix) -> Result<LearningSignal, LearnError> {
    if label >= y.len() {
        return Err(LearnError::Label { label, classes: y.len() });
    }
    let probs = softmax(y);
    let out_err: Vec<f64> = probs.iter().enumerate().map(|(k, p)| p - if k == label { 1.0 } else { 0.0 }).collect();
    let mut l = vec![0.0; b_fb.rows()];
    b_fb.mul_vec_into(&out_err, &mut l);
    Ok(LearningSignal { l, out_err, probs, loss: -log_softmax_at(y, label) })
}

/// All per-sample learning state.
#[derive(Debug, Clone)]
pub struct EligibilityState {
    pub w_in: TraceGroup,
    pub w_rec: Option<TraceGroup>,
    pub d_in: Option<TraceGroup>,
    pub d_rec: Option<TraceGroup>,
    /// κ-filtered propagated spikes for the readout gradient.
    pub out_filt: Vec<f64>,
    pub pd: Vec<f64>,
    pub grad: Gradients,
    /// Scratch `[n_hidden × pre]` buffers for `∂v/∂D`.
    dv_in: Matrix,
    dv_rec: Option<Matrix>,
}

impl EligibilityState {
    pub fn new(params: &NetworkParams, cfg: &NetworkConfig) -> Self {
        let (nh, ni) = (cfg.n_hidden, cfg.n_in);
        let rec = params.w_rec.is_some();
        Self {
            w_in: TraceGroup::zeros(nh, ni),
            w_rec: rec.then(|| TraceGroup::zeros(nh, nh)),
            d_in: (!params.d_in.is_empty()).then(|| TraceGroup::zeros(nh, ni)),
            d_rec: (!params.d_rec.is_empty()).then(|| TraceGroup::zeros(nh, nh)),
            out_filt: vec![0.0; nh],
            pd: vec![0.0; nh],
            grad: Gradients::zeros_like(params),
            dv_in: Matrix::zeros(nh, ni),
            dv_rec: rec.then(|| Matrix::zeros(nh, nh)),
        }
    }

    /// Zero every trace. Gradients are kept.
    pub fn reset_traces(&mut self) {
        self.w_in.reset();
        for g in [&mut self.w_rec, &mut self.d_in, &mut self.d_rec].into_iter().flatten() {
            g.reset();
        }
        self.out_filt.fill(0.0);
        self.pd.fill(0.0);
    }
}

/// `grad_θ += L_j F_θ` for every traced group; axonal delays sum over `j`.
pub fn accumulate_gradients(elig: &mut EligibilityState, signal: &LearningSignal, learn: &Learnable) {
    fn accumulate(grad: &mut [f64], filt: &Matrix, l: &[f64]) {
        let cols = filt.cols();
        for (j, &lj) in l.iter().enumerate() {
            if lj == 0.0 {
                continue;
            }
            for (g, f) in grad[j * cols..(j + 1) * cols].iter_mut().zip(filt.row(j)) {
                *g += lj * f;
            }
        }
    }
    fn accumulate_axonal(grad: &mut [f64], filt: &Matrix, l: &[f64]) {
        for (j, &lj) in l.iter().enumerate() {
            if lj == 0.0 {
                continue;
            }
            for (g, f) in grad.iter_mut().zip(filt.row(j)) {
                *g += lj * f;
            }
        }
    }
    let l = &signal.l;
    if learn.weights {
        accumulate(elig.grad.w_in.as_mut_slice(), &elig.w_in.filt, l);
        if let (Some(g), Some(t)) = (elig.grad.w_rec.as_mut(), elig.w_rec.as_ref()) {
            accumulate(g.as_mut_slice(), &t.filt, l);
        }
    }
    if learn.readout {
        let nh = elig.out_filt.len();
        let g = elig.grad.w_out.as_mut_slice();
        for (k, &err) in signal.out_err.iter().enumerate() {
            for (gk, f) in g[k * nh..(k + 1) * nh].iter_mut().zip(&elig.out_filt) {
                *gk += err * f;
            }
        }
    }
    for (on, trace, grad) in [
        (learn.delays_in, elig.d_in.as_ref(), &mut elig.grad.d_in),
        (learn.delays_rec, elig.d_rec.as_ref(), &mut elig.grad.d_rec),
    ] {
        let Some(trace) = trace.filter(|_| on) else { continue };
        match grad {
            DelayParams::Synaptic(m) => accumulate(m.as_mut_slice(), &trace.filt, l),
            DelayParams::Axonal(v) => accumulate_axonal(v, &trace.filt, l),
            DelayParams::None => {}
        }
    }
}

/// Options for [`OnlineLearner`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearnerOptions {
    pub mode: ForwardMode,
    pub learn: Learnable,
    /// Test hook: replaces `alpha` in the eligibility recursion.
    #[doc(hidden)]
    pub trace_decay_override: Option<f64>,
}

impl Default for LearnerOptions {
    fn default() -> Self {
        Self { mode: ForwardMode::BINARY, learn: Learnable::ALL, trace_decay_override: None }
    }
}

/// Result of running one labelled sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleOutcome {
    /// Cross-entropy summed over steps.
    pub loss: f64,
    /// Softmax outputs summed over steps.
    pub prob_sum: Vec<f64>,
    /// Readout potentials at the last step.
    pub final_y: Vec<f64>,
    /// Largest per-step readout value per class.
    pub max_y: Vec<f64>,
    pub hidden_spikes: usize,
}

/// Streams a sample through the network while accumulating online gradients.
#[derive(Debug, Clone)]
pub struct OnlineLearner {
    pub state: NetworkState,
    pub elig: EligibilityState,
    reads: Reads,
    opts: LearnerOptions,
}

impl OnlineLearner {
    pub fn new(params: &NetworkParams, cfg: &NetworkConfig, opts: LearnerOptions) -> Self {
        Self { state: NetworkState::new(cfg), elig: EligibilityState::new(params, cfg), reads: Reads::new(cfg), opts }
    }

    pub fn gradients(&self) -> &Gradients {
        &self.elig.grad
    }

    pub fn take_gradients(&mut self, params: &NetworkParams) -> Gradients {
        std::mem::replace(&mut self.elig.grad, Gradients::zeros_like(params))
    }

    /// Run `sample` from rest. With `learn = true` the gradient of the summed
    /// loss is added to the accumulators.
    pub fn run(
        &mut self,
        sample: &DenseSample,
        params: &NetworkParams,
        cfg: &NetworkConfig,
        learn: bool,
    ) -> Result<SampleOutcome, LearnError> {
        if !params.matches(cfg) {
            return Err(DynamicsError::Shape.into());
        }
        if sample.label >= cfg.n_out {
            return Err(LearnError::Label { label: sample.label, classes: cfg.n_out });
        }
        self.state.reset();
        self.elig.reset_traces();
        let alpha = self.opts.trace_decay_override.unwrap_or(cfg.alpha());
        let kappa = cfg.kappa();
        let bound = cfg.delay_bound();
        let kernel = match self.opts.mode.read {
            ReadMode::Smoothed(k) => k,
            ReadMode::Binary => SpikeKernel::new(cfg.sigma),
        };
        let flags = self.opts.learn;
        let mut outcome = SampleOutcome {
            loss: 0.0,
            prob_sum: vec![0.0; cfg.n_out],
            final_y: vec![0.0; cfg.n_out],
            max_y: vec![f64::NEG_INFINITY; cfg.n_out],
            hidden_spikes: 0,
        };
        for t in 0..sample.n_frames() {
            // presynaptic history as seen by this step, before the new
            // recurrent spikes are pushed
            self.state.gather_reads(sample.frame(t), params, cfg, &self.opts.mode.read, &mut self.reads)?;
            if learn {
                if flags.delays_in && self.elig.d_in.is_some() {
                    delay_sensitivity(
                        &self.state.in_ring,
                        &params.d_in,
                        &params.w_in,
                        &params.mask_in,
                        &kernel,
                        bound,
                        &mut self.elig.dv_in,
                    );
                }
                if flags.delays_rec {
                    if let (Some(_), Some(dv), Some(w), Some(m)) = (
                        self.elig.d_rec.as_ref(),
                        self.elig.dv_rec.as_mut(),
                        params.w_rec.as_ref(),
                        params.mask_rec.as_ref(),
                    ) {
                        delay_sensitivity(&self.state.rec_ring, &params.d_rec, w, m, &kernel, bound, dv);
                    }
                }
            }
            self.state.integrate(params, cfg, self.opts.mode.spike, &self.reads);
            outcome.hidden_spikes += self.state.s.iter().filter(|&&s| s > 0.0).count();

            let signal = learning_signal(&self.state.y, sample.label, &params.b_fb)?;
            outcome.loss += signal.loss;
            for (acc, p) in outcome.prob_sum.iter_mut().zip(&signal.probs) {
                *acc += p;
            }
            for (m, y) in outcome.max_y.iter_mut().zip(&self.state.y) {
                *m = m.max(*y);
            }
            if !learn {
                continue;
            }

            for (psi, &v) in self.elig.pd.iter_mut().zip(&self.state.v) {
                *psi = surrogate_pd(v, cfg.v_th, cfg.gamma_pd);
            }
            let pd = &self.elig.pd;
            if flags.weights {
                trace_step(&mut self.elig.w_in, &self.reads.input, pd, alpha, kappa);
                if let (Some(g), Some(r)) = (self.elig.w_rec.as_mut(), self.reads.rec.as_ref()) {
                    trace_step(g, r, pd, alpha, kappa);
                }
            }
            if flags.delays_in {
                if let Some(g) = self.elig.d_in.as_mut() {
                    trace_step(g, &self.elig.dv_in, pd, alpha, kappa);
                }
            }
            if flags.delays_rec {
                if let (Some(g), Some(dv)) = (self.elig.d_rec.as_mut(), self.elig.dv_rec.as_ref()) {
                    trace_step(g, dv, pd, alpha, kappa);
                }
            }
            for (f, &z) in self.elig.out_filt.iter_mut().zip(&self.state.z) {
                *f = kappa * *f + z;
            }
            accumulate_gradients(&mut self.elig, &signal, &flags);
        }
        outcome.final_y.copy_from_slice(&self.state.y);
        Ok(outcome)
    }
}

/// Convenience: gradients of one sample from a fresh learner.
pub fn sample_gradients(
    sample: &DenseSample,
    params: &NetworkParams,
    cfg: &NetworkConfig,
    opts: LearnerOptions,
) -> Result<(Gradients, SampleOutcome), LearnError> {
    let mut learner = OnlineLearner::new(params, cfg, opts);
    let outcome = learner.run(sample, params, cfg, true)?;
    Ok((learner.take_gradients(params), outcome))
}
