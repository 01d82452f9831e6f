//! Memory accounting under fixed-point quantization.
//!
//! Storage covers parameters, neuron state and the delay lines needed for
//! inference. Learning adds one eligibility vector and one filtered trace per
//! learnable parameter, the readout trace filter, and the extra history the
//! Gaussian kernel window needs beyond the delay line.

use std::fmt;

use crate::config::NetworkConfig;
use crate::learn::{group_values, is_live, Group, Learnable};
use crate::params::{DelayParams, NetworkParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Quantization {
    pub weight_bits: u32,
    pub delay_bits: u32,
    pub state_bits: u32,
}

impl Default for Quantization {
    fn default() -> Self {
        Self { weight_bits: 8, delay_bits: 5, state_bits: 16 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FootprintRow {
    pub name: String,
    pub count: usize,
    pub bits: u32,
    /// Needed only while learning.
    pub learning: bool,
}

impl FootprintRow {
    pub fn bytes(&self) -> usize {
        (self.count * self.bits as usize).div_ceil(8)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Footprint {
    pub rows: Vec<FootprintRow>,
}

impl Footprint {
    pub fn row(&self, name: &str) -> Option<&FootprintRow> {
        self.rows.iter().find(|r| r.name == name)
    }

    pub fn bytes_of(&self, name: &str) -> usize {
        self.row(name).map_or(0, FootprintRow::bytes)
    }

    pub fn storage_bytes(&self) -> usize {
        self.rows.iter().filter(|r| !r.learning).map(FootprintRow::bytes).sum()
    }

    pub fn learning_bytes(&self) -> usize {
        self.rows.iter().filter(|r| r.learning).map(FootprintRow::bytes).sum()
    }

    pub fn delay_bytes(&self) -> usize {
        self.bytes_of("d_in") + self.bytes_of("d_rec")
    }
}

impl fmt::Display for Footprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<22} {:>9} {:>5} {:>10}  kind", "buffer", "count", "bits", "bytes")?;
        for r in &self.rows {
            writeln!(
                f,
                "{:<22} {:>9} {:>5} {:>10}  {}",
                r.name,
                r.count,
                r.bits,
                r.bytes(),
                if r.learning { "learning" } else { "storage" }
            )?;
        }
        writeln!(f, "storage total  {} bytes", self.storage_bytes())?;
        write!(f, "learning total {} bytes", self.learning_bytes())
    }
}

fn live_count(params: &NetworkParams, group: Group) -> usize {
    (0..group_values(params, group).len()).filter(|&i| is_live(params, group, i)).count()
}

pub fn footprint(params: &NetworkParams, cfg: &NetworkConfig, learn: &Learnable, q: Quantization) -> Footprint {
    let mut rows = Vec::new();
    let mut push = |name: &str, count: usize, bits: u32, learning: bool| {
        if count > 0 {
            rows.push(FootprintRow { name: name.into(), count, bits, learning });
        }
    };
    let (ni, nh, no) = (cfg.n_in, cfg.n_hidden, cfg.n_out);
    for group in [Group::WIn, Group::WRec, Group::WOut] {
        push(group.name(), live_count(params, group), q.weight_bits, false);
    }
    for group in [Group::DIn, Group::DRec] {
        push(group.name(), live_count(params, group), q.delay_bits, false);
    }
    push("v_hidden", nh, q.state_bits, false);
    push("y_readout", no, q.state_bits, false);
    // Binary spikes, one bit per channel per slot.
    let has_in = !matches!(params.d_in, DelayParams::None);
    let has_rec = !matches!(params.d_rec, DelayParams::None);
    if has_in {
        push("delay_line_in", ni * cfg.d_max, 1, false);
    }
    if params.w_rec.is_some() {
        push("delay_line_rec", nh * if has_rec { cfg.d_max + 1 } else { 1 }, 1, false);
    }

    let learn_delays_in = learn.delays_in && has_in;
    let learn_delays_rec = learn.delays_rec && has_rec;
    for (group, on) in [
        (Group::WIn, learn.weights),
        (Group::WRec, learn.weights),
        (Group::DIn, learn_delays_in),
        (Group::DRec, learn_delays_rec),
    ] {
        if !on {
            continue;
        }
        // Axonal delays still need a per-connection trace.
        let traces = match (group, &params.d_in, &params.d_rec) {
            (Group::DIn, DelayParams::Axonal(_), _) => nh * ni,
            (Group::DRec, _, DelayParams::Axonal(_)) => nh * nh,
            _ => live_count(params, group),
        };
        push(&format!("elig_{}", group.name()), 2 * traces, q.state_bits, true);
    }
    if learn.readout {
        push("elig_w_out", nh, q.state_bits, true);
    }
    let extra = cfg.kernel_half_width() as usize + 1;
    if learn_delays_in {
        push("kernel_history_in", ni * extra, 1, true);
    }
    if learn_delays_rec {
        push("kernel_history_rec", nh * extra, 1, true);
    }
    Footprint { rows }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::DelayMode;

    #[test]
    fn fc16_synaptic_bytes() {
        let cfg =
            NetworkConfig { n_in: 116, n_hidden: 16, n_out: 20, delay_in: DelayMode::Synaptic, ..Default::default() };
        let p = NetworkParams::init(&cfg).unwrap();
        let fp = footprint(&p, &cfg, &Learnable::ALL, Quantization::default());
        assert_eq!(fp.bytes_of("w_in"), 1856);
        assert_eq!(fp.bytes_of("d_in"), 1160);
    }

    #[test]
    fn no_delay_model() {
        let cfg = NetworkConfig { delay_in: DelayMode::None, ..Default::default() };
        let p = NetworkParams::init(&cfg).unwrap();
        let fp = footprint(&p, &cfg, &Learnable::ALL, Quantization::default());
        assert_eq!(fp.delay_bytes(), 0);
        assert!(fp.row("delay_line_in").is_none());
    }

    #[test]
    fn axonal_vs_synaptic_counts() {
        for (mode, expected) in [(DelayMode::Axonal, 116), (DelayMode::Synaptic, 14848)] {
            let cfg = NetworkConfig { n_hidden: 128, delay_in: mode, ..Default::default() };
            let p = NetworkParams::init(&cfg).unwrap();
            let fp = footprint(&p, &cfg, &Learnable::ALL, Quantization::default());
            assert_eq!(fp.row("d_in").unwrap().count, expected);
        }
    }
}
