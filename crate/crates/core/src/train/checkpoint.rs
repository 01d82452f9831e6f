//! Versioned binary checkpoints.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! b"SNNC"  u32 version  u64 header_len  header (UTF-8 JSON)
//! f64 arrays: w_in, w_rec, w_out, b_fb, d_in, d_rec   (row-major, absent groups empty)
//! u8 arrays:  mask_in, mask_rec                        (0/1, absent mask empty)
//! if the header says so, Adam moments: m then v for each of w_in, w_rec, w_out, d_in, d_rec
//! ```
//!
//! The header carries the network configuration, the optimizer settings and
//! the per-epoch metrics so far; array lengths follow from the configuration.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::EpochMetrics;
use crate::config::{ConfigError, NetworkConfig};
use crate::learn::{group_values, group_values_mut, Adam, Group, Optimizer, OptimizerKind};
use crate::params::{Mask, NetworkParams};
use crate::tensor::Matrix;

pub const MAGIC: &[u8; 4] = b"SNNC";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("not a checkpoint (bad magic)")]
    BadMagic,
    #[error("checkpoint version {found} is not supported (expected {VERSION})")]
    Version { found: u32 },
    #[error("checkpoint truncated at byte {0}")]
    Truncated(usize),
    #[error("{0} trailing bytes after checkpoint payload")]
    Trailing(usize),
    #[error("bad checkpoint header: {0}")]
    Header(String),
    #[error("checkpoint shape mismatch: {0}")]
    Shape(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub net: NetworkConfig,
    pub params: NetworkParams,
    pub optimizer: Optimizer,
    /// Metrics of the completed epochs.
    pub epochs: Vec<EpochMetrics>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    net: NetworkConfig,
    optimizer: OptimizerKind,
    adam: Option<AdamHeader>,
    epochs: Vec<EpochMetrics>,
}

#[derive(Serialize, Deserialize)]
struct AdamHeader {
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: u64,
}

const ADAM_GROUPS: [Group; 5] = Group::ALL;

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        let end =
            self.pos.checked_add(n).filter(|e| *e <= self.bytes.len()).ok_or(CheckpointError::Truncated(self.pos))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s_into(&mut self, out: &mut [f64]) -> Result<(), CheckpointError> {
        let raw = self.take(out.len() * 8)?;
        for (o, c) in out.iter_mut().zip(raw.chunks_exact(8)) {
            *o = f64::from_le_bytes(c.try_into().unwrap());
        }
        Ok(())
    }

    fn mask(&mut self, rows: usize, cols: usize) -> Result<Mask, CheckpointError> {
        let at = self.pos;
        let raw = self.take(rows * cols)?;
        if raw.iter().any(|b| *b > 1) {
            return Err(CheckpointError::Header(format!("mask byte other than 0/1 near offset {at}")));
        }
        Ok(Mask::from_bits(rows, cols, raw.iter().map(|b| *b == 1).collect()))
    }
}

fn put_f64s(out: &mut Vec<u8>, values: &[f64]) {
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

impl Checkpoint {
    pub fn encode(&self) -> Vec<u8> {
        let adam = self.optimizer.adam.as_ref();
        let header = Header {
            net: self.net.clone(),
            optimizer: self.optimizer.kind,
            adam: adam.map(|a| AdamHeader { beta1: a.beta1, beta2: a.beta2, eps: a.eps, step: a.step }),
            epochs: self.epochs.clone(),
        };
        let json = serde_json::to_vec(&header).expect("header serializes");
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        let p = &self.params;
        put_f64s(&mut out, p.w_in.as_slice());
        put_f64s(&mut out, p.w_rec.as_ref().map_or(&[], Matrix::as_slice));
        put_f64s(&mut out, p.w_out.as_slice());
        put_f64s(&mut out, p.b_fb.as_slice());
        put_f64s(&mut out, p.d_in.values());
        put_f64s(&mut out, p.d_rec.values());
        for mask in std::iter::once(&p.mask_in).chain(&p.mask_rec) {
            out.extend(mask.bits().iter().map(|b| u8::from(*b)));
        }
        if let Some(a) = adam {
            for (m, v) in a.m.iter().zip(&a.v) {
                put_f64s(&mut out, m);
                put_f64s(&mut out, v);
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, CheckpointError> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4).map_err(|_| CheckpointError::BadMagic)? != MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(CheckpointError::Version { found: version });
        }
        let len = usize::try_from(r.u64()?).map_err(|_| CheckpointError::Truncated(r.pos))?;
        let header: Header =
            serde_json::from_slice(r.take(len)?).map_err(|e| CheckpointError::Header(e.to_string()))?;
        let net = header.net;
        // Fresh parameters supply every shape; the payload overwrites them.
        let mut params = NetworkParams::init(&net)?;
        for part in ["w_in", "w_rec", "w_out", "b_fb", "d_in", "d_rec"] {
            let values: &mut [f64] = match part {
                "w_in" => group_values_mut(&mut params, Group::WIn),
                "w_rec" => group_values_mut(&mut params, Group::WRec),
                "w_out" => group_values_mut(&mut params, Group::WOut),
                "b_fb" => params.b_fb.as_mut_slice(),
                "d_in" => group_values_mut(&mut params, Group::DIn),
                _ => group_values_mut(&mut params, Group::DRec),
            };
            r.f64s_into(values)?;
        }
        params.mask_in = r.mask(net.n_hidden, net.n_in)?;
        if params.mask_rec.is_some() {
            params.mask_rec = Some(r.mask(net.n_hidden, net.n_hidden)?);
        }
        let adam = match header.adam {
            None => None,
            Some(h) => {
                let mut m = Vec::new();
                let mut v = Vec::new();
                for g in ADAM_GROUPS {
                    let n = group_values(&params, g).len();
                    let (mut mg, mut vg) = (vec![0.0; n], vec![0.0; n]);
                    r.f64s_into(&mut mg)?;
                    r.f64s_into(&mut vg)?;
                    m.push(mg);
                    v.push(vg);
                }
                Some(Adam { beta1: h.beta1, beta2: h.beta2, eps: h.eps, step: h.step, m, v })
            }
        };
        if r.pos != bytes.len() {
            return Err(CheckpointError::Trailing(bytes.len() - r.pos));
        }
        Ok(Self { net, params, optimizer: Optimizer { kind: header.optimizer, adam }, epochs: header.epochs })
    }

    /// Write atomically: a temporary sibling is renamed over `path`, so an
    /// existing checkpoint survives a failed write.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), CheckpointError> {
        let path = path.as_ref();
        let tmp = path.with_extension("tmp");
        let io = |source| CheckpointError::Io { path: path.into(), source };
        fs::write(&tmp, self.encode()).map_err(io)?;
        fs::rename(&tmp, path).map_err(io)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CheckpointError> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|source| CheckpointError::Io { path: path.into(), source })?;
        Self::decode(&bytes)
    }

    /// Error unless the stored network has the shapes `cfg` describes.
    pub fn check_compatible(&self, cfg: &NetworkConfig) -> Result<(), CheckpointError> {
        let a = &self.net;
        let mut diffs = Vec::new();
        macro_rules! cmp {
            ($($f:ident),*) => {$(
                if a.$f != cfg.$f {
                    diffs.push(format!("{} {:?} vs {:?}", stringify!($f), a.$f, cfg.$f));
                }
            )*};
        }
        cmp!(n_in, n_hidden, n_out, recurrent, delay_in, delay_rec, d_max);
        if diffs.is_empty() {
            Ok(())
        } else {
            Err(CheckpointError::Shape(format!("checkpoint vs config: {}", diffs.join(", "))))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::DelayMode;
    use crate::learn::{apply_updates, Gradients, Learnable};

    fn sample_checkpoint(kind: OptimizerKind) -> Checkpoint {
        let net = NetworkConfig {
            n_in: 5,
            n_hidden: 3,
            n_out: 2,
            recurrent: true,
            delay_in: DelayMode::Synaptic,
            delay_rec: DelayMode::Axonal,
            sparsity: 0.4,
            seed: 9,
            ..Default::default()
        };
        let mut params = NetworkParams::init(&net).unwrap();
        let mut optimizer = Optimizer::new(kind);
        let mut g = Gradients::zeros_like(&params);
        for grp in Group::ALL {
            g.get_mut(grp).iter_mut().enumerate().for_each(|(i, x)| *x = (i as f64 * 0.37).sin());
        }
        apply_updates(&mut params, &mut g, &net, &Learnable::ALL, &mut optimizer).unwrap();
        let epochs = vec![EpochMetrics {
            epoch: 1,
            train_loss: 0.1 + 0.2,
            train_accuracy: 1.0 / 3.0,
            test_loss: None,
            test_accuracy: Some(2.0 / 7.0),
            seconds: 0.123456789,
        }];
        Checkpoint { net, params, optimizer, epochs }
    }

    #[test]
    fn round_trip_is_bit_identical() {
        for kind in [OptimizerKind::Sgd, OptimizerKind::Adam] {
            let c = sample_checkpoint(kind);
            let back = Checkpoint::decode(&c.encode()).unwrap();
            assert_eq!(back, c);
        }
    }

    #[test]
    fn save_and_load() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.ckpt");
        let c = sample_checkpoint(OptimizerKind::Adam);
        c.save(&path).unwrap();
        assert_eq!(Checkpoint::load(&path).unwrap(), c);
        assert!(!path.with_extension("tmp").exists());
    }

    #[test]
    fn corrupt_inputs_rejected() {
        let bytes = sample_checkpoint(OptimizerKind::Sgd).encode();
        assert!(matches!(Checkpoint::decode(b"NOPE"), Err(CheckpointError::BadMagic)));
        assert!(matches!(Checkpoint::decode(&bytes[..2]), Err(CheckpointError::BadMagic)));
        let mut v2 = bytes.clone();
        v2[4] = 2;
        assert!(matches!(Checkpoint::decode(&v2), Err(CheckpointError::Version { found: 2 })));
        assert!(matches!(Checkpoint::decode(&bytes[..bytes.len() - 1]), Err(CheckpointError::Truncated(_))));
        let mut long = bytes.clone();
        long.push(0);
        assert!(matches!(Checkpoint::decode(&long), Err(CheckpointError::Trailing(1))));
        let mut bad_header = bytes;
        bad_header[16] = b'#';
        assert!(matches!(Checkpoint::decode(&bad_header), Err(CheckpointError::Header(_))));
    }

    #[test]
    fn mismatched_config_is_a_shape_error() {
        let c = sample_checkpoint(OptimizerKind::Sgd);
        assert!(c.check_compatible(&c.net).is_ok());
        let other = NetworkConfig { n_hidden: 4, ..c.net.clone() };
        let err = c.check_compatible(&other).unwrap_err();
        assert!(matches!(err, CheckpointError::Shape(ref m) if m.contains("n_hidden")), "{err}");
    }
}
