//! Online learning of weights, synaptic delays and axonal delays in
//! leaky integrate-and-fire networks.
//!
//! The forward pass ([`dynamics`]) runs binary spikes through integer delay
//! lines. Learning ([`learn`]) keeps recursive eligibility traces for every
//! weight and delay and combines them with a readout-error learning signal
//! each timestep; delay sensitivities come from a Gaussian spike kernel.
//! [`oracle`] holds independent reverse-mode and finite-difference gradients
//! used to check the online rules, and [`train`] the batched training loop
//! and experiment protocols.

// `!(x > 0.0)` deliberately rejects NaN; index loops mirror the update equations.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod config;
pub mod data;
pub mod dynamics;
pub mod footprint;
pub mod gradcheck;
pub mod kernel;
pub mod learn;
pub mod oracle;
pub mod params;
pub mod tensor;
pub mod train;

pub use config::{DelayInit, DelayMode, Feedback, NetworkConfig};
pub use data::{DenseSample, EventSample};
pub use dynamics::{forward_sample, ForwardMode, NetworkState, SpikeMode};
pub use learn::{Gradients, Group, Learnable, OnlineLearner};
pub use params::NetworkParams;
pub use tensor::Matrix;
