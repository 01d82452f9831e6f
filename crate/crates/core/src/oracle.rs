//! Reference gradients for checking the online rules.
//!
//! [`smoothed_forward`] re-implements the network from scratch over the full
//! input history (no ring buffers), reading every delayed connection through
//! the truncated Gaussian kernel so the loss depends smoothly on delays.
//! [`bptt_grad`] differentiates it exactly in reverse mode with the
//! surrogate derivative and a detached reset; [`finite_diff_grad`] takes
//! central differences of the same loss.

use std::fmt::Write as _;
use std::io;
use std::path::Path;

use crate::config::NetworkConfig;
use crate::data::DenseSample;
use crate::dynamics::SpikeMode;
use crate::kernel::{gauss_kernel, gauss_kernel_ddelay, soft_spike, surrogate_pd, surrogate_region};
use crate::learn::{group_values, group_values_mut, is_live, softmax, Gradients, Group};
use crate::params::{DelayParams, NetworkParams};
use crate::tensor::Matrix;

/// Everything recorded by [`smoothed_forward`].
#[derive(Debug, Clone, PartialEq)]
pub struct Tape {
    pub loss: f64,
    /// `[T × n_hidden]` membrane potentials.
    pub v: Matrix,
    /// `[T × n_hidden]` binary spikes (used for the reset).
    pub s: Matrix,
    /// `[T × n_hidden]` propagated spike values.
    pub z: Matrix,
    /// `[T × n_out]` readout potentials.
    pub y: Matrix,
    /// `[T × n_out]` softmax outputs.
    pub probs: Matrix,
    /// Discrete state of the piecewise-smooth loss: spike bits, surrogate
    /// regions and kernel window bounds. Equal regimes on both sides of a
    /// perturbation mean the loss is smooth in between.
    pub regime: Vec<i64>,
}

struct Smoother {
    sigma: f64,
    half_width: f64,
    bound: f64,
}

impl Smoother {
    fn new(cfg: &NetworkConfig) -> Self {
        Self { sigma: cfg.sigma, half_width: (3.0 * cfg.sigma).ceil(), bound: cfg.delay_bound() }
    }

    /// Kernel weight and delay slope for activity `lag` steps old.
    fn weights(&self, lag: usize, shift: f64) -> Option<(f64, f64)> {
        let u = lag as f64 - shift;
        if u.abs() > self.half_width {
            return None;
        }
        Some((
            gauss_kernel(lag as f64, 0.0, shift, self.sigma).expect("sigma validated"),
            gauss_kernel_ddelay(lag as f64, 0.0, shift, self.sigma),
        ))
    }

    /// `(read, ∂read/∂D)` for presynaptic history `hist(τ)` available for
    /// `τ <= newest`, with lag measured from `newest`.
    fn read(
        &self,
        delays: &DelayParams,
        post: usize,
        pre: usize,
        newest: Option<usize>,
        hist: impl Fn(usize) -> f64,
    ) -> (f64, f64) {
        let Some(newest) = newest else { return (0.0, 0.0) };
        match delays.param(post, pre) {
            None => (hist(newest), 0.0),
            Some(d) => {
                let shift = d + self.bound;
                let (mut r, mut dr) = (0.0, 0.0);
                for tau in 0..=newest {
                    let x = hist(tau);
                    if x == 0.0 {
                        continue;
                    }
                    if let Some((g, gd)) = self.weights(newest - tau, shift) {
                        r += x * g;
                        dr += x * gd;
                    }
                }
                (r, dr)
            }
        }
    }

    /// Sensitivity of the read at `newest` to the value at `tau`.
    fn read_weight(&self, delays: &DelayParams, post: usize, pre: usize, newest: usize, tau: usize) -> f64 {
        match delays.param(post, pre) {
            None => (tau == newest) as u8 as f64,
            Some(d) => self.weights(newest - tau, d + self.bound).map_or(0.0, |w| w.0),
        }
    }

    fn window_bounds(&self, delays: &DelayParams, regime: &mut Vec<i64>) {
        for &d in delays.values() {
            let shift = d + self.bound;
            regime.push((shift - self.half_width).ceil() as i64);
            regime.push((shift + self.half_width).floor() as i64);
        }
    }
}

fn log_softmax_at(y: &[f64], k: usize) -> f64 {
    let m = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    y[k] - (m + y.iter().map(|v| (v - m).exp()).sum::<f64>().ln())
}

/// Full-history forward pass with Gaussian-smoothed delayed reads.
pub fn smoothed_forward(sample: &DenseSample, params: &NetworkParams, cfg: &NetworkConfig, spike: SpikeMode) -> Tape {
    let (nh, ni, no) = (cfg.n_hidden, cfg.n_in, cfg.n_out);
    let big_t = sample.n_frames();
    let sm = Smoother::new(cfg);
    let alpha = cfg.alpha();
    let kappa = cfg.kappa();
    let mut v = Matrix::zeros(big_t, nh);
    let mut s = Matrix::zeros(big_t, nh);
    let mut z = Matrix::zeros(big_t, nh);
    let mut y = Matrix::zeros(big_t, no);
    let mut probs = Matrix::zeros(big_t, no);
    let mut regime = Vec::with_capacity(big_t * nh * 2);
    sm.window_bounds(&params.d_in, &mut regime);
    sm.window_bounds(&params.d_rec, &mut regime);
    let mut loss = 0.0;

    for t in 0..big_t {
        for j in 0..nh {
            let mut drive = 0.0;
            for i in 0..ni {
                if !params.mask_in.get(j, i) {
                    continue;
                }
                let (r, _) = sm.read(&params.d_in, j, i, Some(t), |tau| sample.get(tau, i) as u8 as f64);
                drive += params.w_in.get(j, i) * r;
            }
            if let (Some(w_rec), Some(mask)) = (&params.w_rec, &params.mask_rec) {
                for k in 0..nh {
                    if !mask.get(j, k) {
                        continue;
                    }
                    let (r, _) = sm.read(&params.d_rec, j, k, t.checked_sub(1), |tau| z.get(tau, k));
                    drive += w_rec.get(j, k) * r;
                }
            }
            let (v_prev, s_prev) = if t > 0 { (v.get(t - 1, j), s.get(t - 1, j)) } else { (0.0, 0.0) };
            let vj = alpha * v_prev + drive - cfg.v_th * s_prev;
            let sj = if vj > cfg.v_th { 1.0 } else { 0.0 };
            v.set(t, j, vj);
            s.set(t, j, sj);
            z.set(
                t,
                j,
                match spike {
                    SpikeMode::Binary => sj,
                    SpikeMode::Soft => soft_spike(vj, cfg.v_th, cfg.gamma_pd),
                },
            );
            regime.push(sj as i64);
            regime.push(surrogate_region(vj, cfg.v_th) as i64);
        }
        for k in 0..no {
            let prev = if t > 0 { y.get(t - 1, k) } else { 0.0 };
            let drive: f64 = (0..nh).map(|j| params.w_out.get(k, j) * z.get(t, j)).sum();
            y.set(t, k, kappa * prev + drive);
        }
        let p = softmax(y.row(t));
        probs.row_mut(t).copy_from_slice(&p);
        loss -= log_softmax_at(y.row(t), sample.label);
    }
    Tape { loss, v, s, z, y, probs, regime }
}

/// Reverse-mode gradient of the summed cross-entropy through the unrolled
/// smoothed network.
pub fn bptt_grad(sample: &DenseSample, params: &NetworkParams, cfg: &NetworkConfig, spike: SpikeMode) -> Gradients {
    let tape = smoothed_forward(sample, params, cfg, spike);
    let (nh, ni, no) = (cfg.n_hidden, cfg.n_in, cfg.n_out);
    let big_t = sample.n_frames();
    let sm = Smoother::new(cfg);
    let alpha = cfg.alpha();
    let kappa = cfg.kappa();
    let mut grad = Gradients::zeros_like(params);
    let mut gz = Matrix::zeros(big_t, nh);
    let mut gy = vec![0.0; no];
    let mut gv_next = vec![0.0; nh];

    for t in (0..big_t).rev() {
        for k in 0..no {
            let target = if k == sample.label { 1.0 } else { 0.0 };
            gy[k] = tape.probs.get(t, k) - target + kappa * gy[k];
        }
        for k in 0..no {
            for j in 0..nh {
                grad.w_out.add_at(k, j, gy[k] * tape.z.get(t, j));
                gz.add_at(t, j, params.w_out.get(k, j) * gy[k]);
            }
        }
        let mut gv = vec![0.0; nh];
        for j in 0..nh {
            gv[j] = gz.get(t, j) * surrogate_pd(tape.v.get(t, j), cfg.v_th, cfg.gamma_pd) + alpha * gv_next[j];
        }
        for j in 0..nh {
            let g = gv[j];
            if g == 0.0 {
                continue;
            }
            for i in 0..ni {
                if !params.mask_in.get(j, i) {
                    continue;
                }
                let (r, dr) = sm.read(&params.d_in, j, i, Some(t), |tau| sample.get(tau, i) as u8 as f64);
                grad.w_in.add_at(j, i, g * r);
                let w = params.w_in.get(j, i);
                match &mut grad.d_in {
                    DelayParams::Synaptic(m) => m.add_at(j, i, g * w * dr),
                    DelayParams::Axonal(d) => d[i] += g * w * dr,
                    DelayParams::None => {}
                }
            }
            let (Some(w_rec), Some(mask), Some(g_rec)) = (&params.w_rec, &params.mask_rec, grad.w_rec.as_mut()) else {
                continue;
            };
            let Some(newest) = t.checked_sub(1) else { continue };
            for k in 0..nh {
                if !mask.get(j, k) {
                    continue;
                }
                let (r, dr) = sm.read(&params.d_rec, j, k, Some(newest), |tau| tape.z.get(tau, k));
                let w = w_rec.get(j, k);
                g_rec.add_at(j, k, g * r);
                match &mut grad.d_rec {
                    DelayParams::Synaptic(m) => m.add_at(j, k, g * w * dr),
                    DelayParams::Axonal(d) => d[k] += g * w * dr,
                    DelayParams::None => {}
                }
                for tau in 0..=newest {
                    let c = sm.read_weight(&params.d_rec, j, k, newest, tau);
                    if c != 0.0 {
                        gz.add_at(tau, k, g * w * c);
                    }
                }
            }
        }
        gv_next = gv;
    }
    grad
}

/// `(f(θ + h) − f(θ − h)) / 2h`.
pub fn central_difference(mut f: impl FnMut(f64) -> f64, theta: f64, h: f64) -> f64 {
    (f(theta + h) - f(theta - h)) / (2.0 * h)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdEstimate {
    pub group: Group,
    pub index: usize,
    pub value: f64,
    /// False when the loss regime differs between `θ − h` and `θ + h`.
    pub smooth: bool,
}

/// Every live parameter of the given groups, in flat order.
pub fn live_params(params: &NetworkParams, groups: &[Group]) -> Vec<(Group, usize)> {
    groups
        .iter()
        .flat_map(|&g| (0..group_values(params, g).len()).filter(move |&i| is_live(params, g, i)).map(move |i| (g, i)))
        .collect()
}

/// Central differences of the smoothed loss for each selected parameter.
pub fn finite_diff_grad(
    sample: &DenseSample,
    params: &NetworkParams,
    cfg: &NetworkConfig,
    spike: SpikeMode,
    selected: &[(Group, usize)],
    h: f64,
) -> Vec<FdEstimate> {
    assert!(h > 0.0, "finite-difference step must be positive");
    let mut work = params.clone();
    selected
        .iter()
        .map(|&(group, index)| {
            let theta = group_values(params, group)[index];
            group_values_mut(&mut work, group)[index] = theta + h;
            let up = smoothed_forward(sample, &work, cfg, spike);
            group_values_mut(&mut work, group)[index] = theta - h;
            let dn = smoothed_forward(sample, &work, cfg, spike);
            group_values_mut(&mut work, group)[index] = theta;
            FdEstimate { group, index, value: (up.loss - dn.loss) / (2.0 * h), smooth: up.regime == dn.regime }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradRow {
    pub group: Group,
    pub index: usize,
    /// `(row, col)` for matrices, `(index, 0)` for vectors.
    pub coord: (usize, usize),
    pub online: f64,
    pub oracle: f64,
    pub abs_err: f64,
    pub rel_err: f64,
    pub smooth: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupStats {
    pub group: Group,
    pub count: usize,
    pub non_smooth: usize,
    pub cosine: f64,
    pub max_rel_err: f64,
    pub mean_rel_err: f64,
}

/// Online vs oracle comparison over every live parameter of a set of groups.
#[derive(Debug, Clone, PartialEq)]
pub struct GradReport {
    pub rows: Vec<GradRow>,
    pub groups: Vec<GroupStats>,
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    match (na == 0.0, nb == 0.0) {
        (true, true) => 1.0,
        (true, false) | (false, true) => 0.0,
        _ => (dot / (na * nb)).clamp(-1.0, 1.0),
    }
}

fn coord(params: &NetworkParams, group: Group, index: usize) -> (usize, usize) {
    let cols = match group {
        Group::WIn => params.w_in.cols(),
        Group::WRec => params.w_rec.as_ref().map_or(1, |m| m.cols()),
        Group::WOut => params.w_out.cols(),
        Group::DIn => match &params.d_in {
            DelayParams::Synaptic(m) => m.cols(),
            _ => usize::MAX,
        },
        Group::DRec => match &params.d_rec {
            DelayParams::Synaptic(m) => m.cols(),
            _ => usize::MAX,
        },
    };
    if cols == usize::MAX {
        (index, 0)
    } else {
        (index / cols, index % cols)
    }
}

impl GradReport {
    /// Build from `(group, index, online, oracle, smooth)` tuples.
    pub fn from_pairs(params: &NetworkParams, pairs: impl IntoIterator<Item = (Group, usize, f64, f64, bool)>) -> Self {
        let pairs: Vec<_> = pairs.into_iter().collect();
        let mut groups = Vec::new();
        let mut rows = Vec::with_capacity(pairs.len());
        for group in Group::ALL {
            let members: Vec<_> = pairs.iter().filter(|p| p.0 == group).collect();
            if members.is_empty() {
                continue;
            }
            let scale = members.iter().filter(|p| p.4).map(|p| p.3.abs()).fold(0.0, f64::max);
            let floor = (1e-6 * scale).max(1e-12);
            let mut on = Vec::new();
            let mut or = Vec::new();
            let mut rels = Vec::new();
            for &&(g, index, online, oracle, smooth) in &members {
                let abs_err = (online - oracle).abs();
                let rel_err = abs_err / oracle.abs().max(floor);
                rows.push(GradRow {
                    group: g,
                    index,
                    coord: coord(params, g, index),
                    online,
                    oracle,
                    abs_err,
                    rel_err,
                    smooth,
                });
                if smooth {
                    on.push(online);
                    or.push(oracle);
                    rels.push(rel_err);
                }
            }
            groups.push(GroupStats {
                group,
                count: members.len(),
                non_smooth: members.len() - rels.len(),
                cosine: cosine(&on, &or),
                max_rel_err: rels.iter().copied().fold(0.0, f64::max),
                mean_rel_err: if rels.is_empty() { 0.0 } else { rels.iter().sum::<f64>() / rels.len() as f64 },
            });
        }
        Self { rows, groups }
    }

    /// Compare full gradient sets over every live parameter of `groups`.
    pub fn compare(params: &NetworkParams, online: &Gradients, oracle: &Gradients, groups: &[Group]) -> Self {
        Self::from_pairs(
            params,
            live_params(params, groups).into_iter().map(|(g, i)| (g, i, online.get(g)[i], oracle.get(g)[i], true)),
        )
    }

    pub fn compare_fd(params: &NetworkParams, online: &Gradients, fd: &[FdEstimate]) -> Self {
        Self::from_pairs(params, fd.iter().map(|e| (e.group, e.index, online.get(e.group)[e.index], e.value, e.smooth)))
    }

    pub fn stats(&self, group: Group) -> Option<&GroupStats> {
        self.groups.iter().find(|s| s.group == group)
    }

    /// Cosine over all smooth rows of the given groups pooled together.
    pub fn pooled_cosine(&self, groups: &[Group]) -> f64 {
        let (a, b): (Vec<f64>, Vec<f64>) =
            self.rows.iter().filter(|r| r.smooth && groups.contains(&r.group)).map(|r| (r.online, r.oracle)).unzip();
        cosine(&a, &b)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("param,online,oracle,abs_err,rel_err,smooth\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{}[{},{}],{:.12e},{:.12e},{:.6e},{:.6e},{}",
                r.group.name(),
                r.coord.0,
                r.coord.1,
                r.online,
                r.oracle,
                r.abs_err,
                r.rel_err,
                r.smooth
            );
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> io::Result<()> {
        std::fs::write(path, self.to_csv())
    }
}
