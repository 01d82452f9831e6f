//! Discrete-time LIF hidden layer with delay lines and a leaky-integrator
//! readout.
//!
//! Step `t` consumes input frame `x^t` and computes
//!
//! ```text
//! v_j^t = alpha v_j^{t-1} + sum_i W^in_ji x_i^{t - e(D^in_ji)}
//!                         + sum_k W^rec_jk z_k^{t-1-e(D^rec_jk)} - v_th s_j^{t-1}
//! s_j^t = H(v_j^t > v_th)
//! y_k^t = kappa y_k^{t-1} + sum_j W^out_kj z_j^t
//! ```
//!
//! where `e(D)` is [`effective_delay`] and `z = s` in the ordinary binary
//! forward pass. Raster row `t` holds `s^t`, the spike emitted from `v^t`.

use thiserror::Error;

use crate::config::{delay_bound, NetworkConfig};
use crate::data::DenseSample;
use crate::kernel::{soft_spike, SpikeKernel};
use crate::params::{DelayParams, NetworkParams};
use crate::tensor::Matrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("input frame has {got} channels, network expects {expected}")]
    FrameWidth { expected: usize, got: usize },
    #[error("delay parameter {value} outside [-{bound}, {bound}]")]
    DelayOutOfRange { value: f64, bound: f64 },
    #[error("parameters do not match the network configuration")]
    Shape,
}

/// Integer buffer offset of a delay parameter:
/// `round(d_param) + (d_max - 1) / 2`, rounding half away from zero.
pub fn effective_delay(d_param: f64, d_max: usize) -> Result<usize, DynamicsError> {
    let bound = delay_bound(d_max);
    if !(d_param.abs() <= bound) {
        return Err(DynamicsError::DelayOutOfRange { value: d_param, bound });
    }
    Ok(lag_of(d_param, bound))
}

#[inline]
fn lag_of(d_param: f64, bound: f64) -> usize {
    debug_assert!(d_param.abs() <= bound, "delay {d_param} escaped the clamp range");
    (d_param.round() + bound).max(0.0) as usize
}

/// Fixed-capacity history of frames; lag 0 is the most recent push.
#[derive(Debug, Clone)]
pub struct FrameRing {
    width: usize,
    capacity: usize,
    head: usize,
    data: Vec<f64>,
}

impl FrameRing {
    pub fn new(width: usize, capacity: usize) -> Self {
        assert!(capacity > 0);
        Self { width, capacity, head: capacity - 1, data: vec![0.0; width * capacity] }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn clear(&mut self) {
        self.data.fill(0.0);
        self.head = self.capacity - 1;
    }

    pub fn push(&mut self, frame: impl IntoIterator<Item = f64>) {
        self.head = (self.head + 1) % self.capacity;
        let slot = &mut self.data[self.head * self.width..(self.head + 1) * self.width];
        let mut n = 0;
        for (dst, src) in slot.iter_mut().zip(frame) {
            *dst = src;
            n += 1;
        }
        debug_assert_eq!(n, self.width);
    }

    /// Value of channel `ch` pushed `lag` pushes ago (zero before the start).
    #[inline]
    pub fn get(&self, lag: usize, ch: usize) -> f64 {
        debug_assert!(lag < self.capacity);
        let slot = (self.head + self.capacity - lag) % self.capacity;
        self.data[slot * self.width + ch]
    }
}

/// How delayed presynaptic activity is read.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReadMode {
    /// Exact frame at the rounded delay. Used for training and inference.
    Binary,
    /// Sum of truncated Gaussian kernels centred on the continuous delay.
    /// Groups without delays still read lag 0 exactly.
    Smoothed(SpikeKernel),
}

/// Value propagated to the readout and to recurrent targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SpikeMode {
    /// `H(v > v_th)`.
    #[default]
    Binary,
    /// Antiderivative of the surrogate; the reset still uses the binary spike.
    Soft,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForwardMode {
    pub read: ReadMode,
    pub spike: SpikeMode,
}

impl ForwardMode {
    pub const BINARY: ForwardMode = ForwardMode { read: ReadMode::Binary, spike: SpikeMode::Binary };

    pub fn smoothed(sigma: f64, spike: SpikeMode) -> Self {
        Self { read: ReadMode::Smoothed(SpikeKernel::new(sigma)), spike }
    }
}

impl Default for ForwardMode {
    fn default() -> Self {
        Self::BINARY
    }
}

/// Delayed read of one connection from a history ring.
#[inline]
pub(crate) fn delayed_read(
    ring: &FrameRing,
    delays: &DelayParams,
    post: usize,
    pre: usize,
    bound: f64,
    read: &ReadMode,
) -> f64 {
    match (delays.param(post, pre), read) {
        (None, _) => ring.get(0, pre),
        (Some(d), ReadMode::Binary) => ring.get(lag_of(d, bound), pre),
        (Some(d), ReadMode::Smoothed(k)) => {
            let s = d + bound;
            k.lags(s, ring.capacity() - 1)
                .map(|lag| {
                    let x = ring.get(lag, pre);
                    if x == 0.0 {
                        0.0
                    } else {
                        x * k.value(lag, s)
                    }
                })
                .sum()
        }
    }
}

/// Per-step presynaptic reads, `[post × pre]`, reused across steps.
#[derive(Debug, Clone)]
pub struct Reads {
    pub input: Matrix,
    pub rec: Option<Matrix>,
}

impl Reads {
    pub fn new(cfg: &NetworkConfig) -> Self {
        Self {
            input: Matrix::zeros(cfg.n_hidden, cfg.n_in),
            rec: cfg.recurrent.then(|| Matrix::zeros(cfg.n_hidden, cfg.n_hidden)),
        }
    }
}

#[derive(Debug, Clone)]
pub struct NetworkState {
    /// Membrane potentials `v^t`.
    pub v: Vec<f64>,
    /// Binary spikes `s^t` emitted from `v`.
    pub s: Vec<f64>,
    /// Propagated spike values (equal to `s` in binary spike mode).
    pub z: Vec<f64>,
    /// Readout potentials.
    pub y: Vec<f64>,
    /// Input frames, lag 0 = current frame.
    pub in_ring: FrameRing,
    /// Propagated hidden spikes, lag 0 = previous step.
    pub rec_ring: FrameRing,
    pub t: usize,
}

impl NetworkState {
    pub fn new(cfg: &NetworkConfig) -> Self {
        let depth = cfg.history_len();
        Self {
            v: vec![0.0; cfg.n_hidden],
            s: vec![0.0; cfg.n_hidden],
            z: vec![0.0; cfg.n_hidden],
            y: vec![0.0; cfg.n_out],
            in_ring: FrameRing::new(cfg.n_in, depth),
            rec_ring: FrameRing::new(cfg.n_hidden, depth + 1),
            t: 0,
        }
    }

    pub fn reset(&mut self) {
        self.v.fill(0.0);
        self.s.fill(0.0);
        self.z.fill(0.0);
        self.y.fill(0.0);
        self.in_ring.clear();
        self.rec_ring.clear();
        self.t = 0;
    }

    /// Push the input frame and fill `reads` with every delayed presynaptic
    /// value visible at this step. Masked connections read 0.
    pub fn gather_reads(
        &mut self,
        frame: &[u8],
        params: &NetworkParams,
        cfg: &NetworkConfig,
        read: &ReadMode,
        reads: &mut Reads,
    ) -> Result<(), DynamicsError> {
        if frame.len() != cfg.n_in {
            return Err(DynamicsError::FrameWidth { expected: cfg.n_in, got: frame.len() });
        }
        self.in_ring.push(frame.iter().map(|&b| b as f64));
        let bound = cfg.delay_bound();
        for j in 0..cfg.n_hidden {
            let row = reads.input.row_mut(j);
            for (i, r) in row.iter_mut().enumerate() {
                *r = if params.mask_in.get(j, i) {
                    delayed_read(&self.in_ring, &params.d_in, j, i, bound, read)
                } else {
                    0.0
                };
            }
        }
        if let (Some(rec), Some(mask)) = (reads.rec.as_mut(), params.mask_rec.as_ref()) {
            for j in 0..cfg.n_hidden {
                let row = rec.row_mut(j);
                for (k, r) in row.iter_mut().enumerate() {
                    *r = if mask.get(j, k) {
                        delayed_read(&self.rec_ring, &params.d_rec, j, k, bound, read)
                    } else {
                        0.0
                    };
                }
            }
        }
        Ok(())
    }

    /// Membrane update, spike generation and readout integration from
    /// previously gathered reads.
    pub fn integrate(&mut self, params: &NetworkParams, cfg: &NetworkConfig, spike: SpikeMode, reads: &Reads) {
        let alpha = cfg.alpha();
        for j in 0..cfg.n_hidden {
            let mut drive: f64 = params.w_in.row(j).iter().zip(reads.input.row(j)).map(|(w, x)| w * x).sum();
            if let (Some(w_rec), Some(rec)) = (params.w_rec.as_ref(), reads.rec.as_ref()) {
                drive += w_rec.row(j).iter().zip(rec.row(j)).map(|(w, z)| w * z).sum::<f64>();
            }
            self.v[j] = alpha * self.v[j] + drive - cfg.v_th * self.s[j];
            self.s[j] = if self.v[j] > cfg.v_th { 1.0 } else { 0.0 };
            self.z[j] = match spike {
                SpikeMode::Binary => self.s[j],
                SpikeMode::Soft => soft_spike(self.v[j], cfg.v_th, cfg.gamma_pd),
            };
        }
        li_readout_step(&mut self.y, &self.z, params, cfg.kappa());
        self.rec_ring.push(self.z.iter().copied());
        self.t += 1;
    }

    /// One step of the given forward mode.
    pub fn step(
        &mut self,
        frame: &[u8],
        params: &NetworkParams,
        cfg: &NetworkConfig,
        mode: &ForwardMode,
        reads: &mut Reads,
    ) -> Result<(), DynamicsError> {
        self.gather_reads(frame, params, cfg, &mode.read, reads)?;
        self.integrate(params, cfg, mode.spike, reads);
        Ok(())
    }

    /// Binary LIF step. Returns the new potentials and spikes.
    pub fn lif_step(
        &mut self,
        frame: &[u8],
        params: &NetworkParams,
        cfg: &NetworkConfig,
    ) -> Result<(&[f64], &[f64]), DynamicsError> {
        let mut reads = Reads::new(cfg);
        self.step(frame, params, cfg, &ForwardMode::BINARY, &mut reads)?;
        Ok((&self.v, &self.s))
    }
}

/// `y_k <- kappa y_k + sum_j W^out_kj z_j`. Never resets.
pub fn li_readout_step(y: &mut [f64], z: &[f64], params: &NetworkParams, kappa: f64) {
    for (k, yk) in y.iter_mut().enumerate() {
        let drive: f64 = params.w_out.row(k).iter().zip(z).map(|(w, s)| w * s).sum();
        *yk = kappa * *yk + drive;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput {
    /// `[T × n_hidden]` binary spikes.
    pub raster: Matrix,
    /// `[T × n_out]` readout potentials.
    pub readout: Matrix,
}

/// Run one sample from rest.
pub fn forward_sample(
    sample: &DenseSample,
    params: &NetworkParams,
    cfg: &NetworkConfig,
) -> Result<ForwardOutput, DynamicsError> {
    forward_sample_with(sample, params, cfg, &ForwardMode::BINARY)
}

pub fn forward_sample_with(
    sample: &DenseSample,
    params: &NetworkParams,
    cfg: &NetworkConfig,
    mode: &ForwardMode,
) -> Result<ForwardOutput, DynamicsError> {
    if !params.matches(cfg) {
        return Err(DynamicsError::Shape);
    }
    let n_frames = sample.n_frames();
    let mut state = NetworkState::new(cfg);
    let mut reads = Reads::new(cfg);
    let mut raster = Matrix::zeros(n_frames, cfg.n_hidden);
    let mut readout = Matrix::zeros(n_frames, cfg.n_out);
    for t in 0..n_frames {
        state.step(sample.frame(t), params, cfg, mode, &mut reads)?;
        raster.row_mut(t).copy_from_slice(&state.s);
        readout.row_mut(t).copy_from_slice(&state.y);
    }
    Ok(ForwardOutput { raster, readout })
}
