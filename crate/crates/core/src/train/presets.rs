//! Ready-made run configurations.

use super::{PredictionRule, RunConfig};
use crate::config::{DelayInit, DelayMode, NetworkConfig};
use crate::data::Preprocess;
use crate::learn::{Learnable, OptimizerKind};

/// Two-channel coincidence task with a 4-unit hidden layer.
///
/// The readout time constant is far beyond the sequence length, so the
/// readout counts hidden spikes and its final value carries no information
/// about spike order. A short membrane time constant keeps a spike from
/// leaving any residue across the gap. Without delays the two classes are
/// then indistinguishable from the final readout.
pub fn coincidence() -> RunConfig {
    RunConfig {
        net: NetworkConfig {
            n_in: 2,
            n_hidden: 4,
            n_out: 2,
            delay_in: DelayMode::Synaptic,
            delay_init: DelayInit::Zero,
            dt: 10.0,
            tau_m: 5.0,
            tau_out: 1e9,
            sigma: 2.0,
            d_max: 11,
            lr_w: 0.01,
            lr_d: 0.1,
            ..Default::default()
        },
        epochs: 50,
        batch_size: 16,
        learn: Learnable::ALL,
        repeats: 5,
        experiment: "coincidence".into(),
        optimizer: OptimizerKind::Adam,
        prediction: PredictionRule::Final,
        single_stream: false,
    }
}

/// Preprocessing for [`crate::data::synth_coincidence`] data on a 10 ms grid.
pub fn coincidence_preprocess() -> Preprocess {
    Preprocess { bin_factor: 1, frame_ms: 10.0, source_channels: 2 }
}

/// Single-hidden-layer network on binned SHD (116 inputs, 20 classes) with
/// the given width and input delay mode.
pub fn shd(n_hidden: usize, delay_in: DelayMode) -> RunConfig {
    RunConfig {
        net: NetworkConfig { n_hidden, delay_in, ..Default::default() },
        epochs: 60,
        batch_size: 16,
        experiment: format!("shd-fc{n_hidden}-{}", delay_in.name()),
        optimizer: OptimizerKind::Adam,
        ..Default::default()
    }
}
