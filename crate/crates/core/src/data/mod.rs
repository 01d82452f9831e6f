//! Event-stream samples, their on-disk format, and conversion to the binary
//! frame tensors consumed by the network.

pub mod format;
pub mod manifest;
pub mod mask;
pub mod preprocess;
pub mod synth;

use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub use format::{read_sample, write_sample};
pub use manifest::{Dataset, DatasetManifest, ManifestEntry};
pub use mask::gen_sparsity_mask;
pub use preprocess::{bin_spatial, subsample_temporal, Preprocess};
pub use synth::synth_coincidence;

/// Channel count of the SHD/SSC cochlear front end.
pub const SOURCE_CHANNELS: usize = 700;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("bad magic at byte {offset}")]
    BadMagic { offset: usize },
    #[error("unsupported version {found} at byte {offset}")]
    Version { found: u16, offset: usize },
    #[error("truncated payload: needed {needed} bytes at byte {offset}")]
    Truncated { offset: usize, needed: usize },
    #[error("event {index} at byte {offset} is earlier than its predecessor")]
    Unsorted { index: usize, offset: usize },
    #[error("{extra} trailing bytes after payload at byte {offset}")]
    Trailing { offset: usize, extra: usize },
    #[error("unit {unit} outside {channels} channels")]
    UnitOutOfRange { unit: usize, channels: usize },
    #[error("label {label} outside {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("manifest: {0}")]
    Manifest(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    /// Spike time in ms.
    pub time_ms: f32,
    pub unit: u16,
}

/// One labelled recording as a time-sorted list of events.
#[derive(Debug, Clone, PartialEq)]
pub struct EventSample {
    pub events: Vec<Event>,
    pub label: u16,
    pub duration_ms: f32,
}

impl EventSample {
    pub fn is_sorted(&self) -> bool {
        self.events.windows(2).all(|w| w[0].time_ms <= w[1].time_ms)
    }
}

/// Binary `[T × n_channels]` frame tensor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DenseSample {
    n_channels: usize,
    frames: Vec<u8>,
    pub label: usize,
}

impl DenseSample {
    pub fn new(n_channels: usize, frames: Vec<u8>, label: usize) -> Self {
        assert!(n_channels > 0, "dense sample needs at least one channel");
        assert_eq!(frames.len() % n_channels, 0, "frame data not a multiple of the width");
        debug_assert!(frames.iter().all(|&b| b <= 1));
        Self { n_channels, frames, label }
    }

    pub fn zeros(n_channels: usize, n_frames: usize, label: usize) -> Self {
        Self::new(n_channels, vec![0; n_channels * n_frames], label)
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    pub fn n_frames(&self) -> usize {
        self.frames.len() / self.n_channels
    }

    #[inline]
    pub fn frame(&self, t: usize) -> &[u8] {
        &self.frames[t * self.n_channels..(t + 1) * self.n_channels]
    }

    pub fn set(&mut self, t: usize, ch: usize, on: bool) {
        self.frames[t * self.n_channels + ch] = on as u8;
    }

    pub fn get(&self, t: usize, ch: usize) -> bool {
        self.frames[t * self.n_channels + ch] != 0
    }

    pub fn spike_count(&self) -> usize {
        self.frames.iter().map(|&b| b as usize).sum()
    }

    /// Re-express as events at the start of each active frame.
    pub fn to_events(&self, frame_ms: f32) -> EventSample {
        let mut events = Vec::new();
        for t in 0..self.n_frames() {
            for (ch, &b) in self.frame(t).iter().enumerate() {
                if b != 0 {
                    events.push(Event { time_ms: t as f32 * frame_ms, unit: ch as u16 });
                }
            }
        }
        EventSample { events, label: self.label as u16, duration_ms: self.n_frames() as f32 * frame_ms }
    }

    /// Copy with every frame moved `k` steps later; the tail grows by `k`.
    pub fn shifted(&self, k: usize) -> DenseSample {
        let mut frames = vec![0u8; k * self.n_channels];
        frames.extend_from_slice(&self.frames);
        DenseSample::new(self.n_channels, frames, self.label)
    }
}
