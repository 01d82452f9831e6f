use serde::{Deserialize, Serialize};

use super::grads::{group_values_mut, is_live, Gradients, Group};
use super::{LearnError, Learnable};
use crate::config::{Feedback, NetworkConfig};
use crate::params::NetworkParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    #[default]
    Sgd,
    Adam,
}

/// First/second moment estimates per group, in flat parameter order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl Adam {
    fn new(grads: &Gradients) -> Self {
        let shapes: Vec<Vec<f64>> = Group::ALL.iter().map(|g| vec![0.0; grads.get(*g).len()]).collect();
        Self { beta1: 0.9, beta2: 0.999, eps: 1e-8, step: 0, m: shapes.clone(), v: shapes }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Optimizer {
    pub kind: OptimizerKind,
    pub adam: Option<Adam>,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind) -> Self {
        Self { kind, adam: None }
    }
}

/// One optimizer step with `lr_w` on weights and `lr_d` on delays, followed
/// by delay clamping and a feedback refresh. Masked and frozen entries are
/// left untouched. The accumulators are zeroed afterwards.
pub fn apply_updates(
    params: &mut NetworkParams,
    grads: &mut Gradients,
    cfg: &NetworkConfig,
    learn: &Learnable,
    opt: &mut Optimizer,
) -> Result<(), LearnError> {
    if let Some((group, index)) = grads.first_non_finite() {
        return Err(LearnError::NonFinite { group: group.name(), index });
    }
    if opt.kind == OptimizerKind::Adam && opt.adam.is_none() {
        opt.adam = Some(Adam::new(grads));
    }
    let (bc1, bc2) = match opt.adam.as_mut() {
        Some(a) if opt.kind == OptimizerKind::Adam => {
            a.step += 1;
            (1.0 - a.beta1.powi(a.step as i32), 1.0 - a.beta2.powi(a.step as i32))
        }
        _ => (1.0, 1.0),
    };

    for (gi, group) in Group::ALL.into_iter().enumerate() {
        if !learn.allows(group) {
            continue;
        }
        let lr = if group.is_delay() { cfg.lr_d } else { cfg.lr_w };
        let live: Vec<bool> = (0..grads.get(group).len()).map(|i| is_live(params, group, i)).collect();
        let g = grads.get(group);
        let values = group_values_mut(params, group);
        match (opt.kind, opt.adam.as_mut()) {
            (OptimizerKind::Adam, Some(a)) => {
                let (m, v) = (&mut a.m[gi], &mut a.v[gi]);
                for i in 0..values.len() {
                    if !live[i] {
                        continue;
                    }
                    m[i] = a.beta1 * m[i] + (1.0 - a.beta1) * g[i];
                    v[i] = a.beta2 * v[i] + (1.0 - a.beta2) * g[i] * g[i];
                    let mh = m[i] / bc1;
                    let vh = v[i] / bc2;
                    values[i] -= lr * mh / (vh.sqrt() + a.eps);
                }
            }
            _ => {
                for i in 0..values.len() {
                    if live[i] {
                        values[i] -= lr * g[i];
                    }
                }
            }
        }
    }
    params.clamp_delays(cfg.delay_bound());
    if cfg.feedback == Feedback::Symmetric {
        params.b_fb = params.w_out.transpose();
    }
    grads.zero();
    Ok(())
}
