use super::{DataError, DenseSample, Event, EventSample, SOURCE_CHANNELS};

/// Map channel `u` to `min(u / factor, n_bins - 1)` with
/// `n_bins = source_channels / factor`, so 700 channels at factor 6 give 116.
/// Returns the binned sample and `n_bins`.
pub fn bin_spatial(sample: &EventSample, factor: usize, source_channels: usize) -> (EventSample, usize) {
    assert!(factor >= 1, "binning factor must be >= 1");
    let n_bins = (source_channels / factor).max(1);
    let events = sample
        .events
        .iter()
        .map(|ev| Event { time_ms: ev.time_ms, unit: ((ev.unit as usize / factor).min(n_bins - 1)) as u16 })
        .collect();
    (EventSample { events, label: sample.label, duration_ms: sample.duration_ms }, n_bins)
}

/// Binary OR of events into `ceil(duration / frame_ms)` frames. Frame `f`
/// covers `[f·frame_ms, (f+1)·frame_ms)`; an event at exactly `duration`
/// lands in the last frame.
pub fn subsample_temporal(sample: &EventSample, frame_ms: f32, n_channels: usize) -> Result<DenseSample, DataError> {
    assert!(frame_ms > 0.0, "frame length must be positive");
    let n_frames = (sample.duration_ms / frame_ms).ceil().max(0.0) as usize;
    let mut dense = DenseSample::zeros(n_channels, n_frames, sample.label as usize);
    for ev in &sample.events {
        let unit = ev.unit as usize;
        if unit >= n_channels {
            return Err(DataError::UnitOutOfRange { unit, channels: n_channels });
        }
        if n_frames == 0 {
            continue;
        }
        let f = ((ev.time_ms / frame_ms).floor().max(0.0) as usize).min(n_frames - 1);
        dense.set(f, unit, true);
    }
    Ok(dense)
}

/// Binning + subsampling settings for a dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Preprocess {
    pub bin_factor: usize,
    pub frame_ms: f32,
    pub source_channels: usize,
}

impl Default for Preprocess {
    fn default() -> Self {
        Self { bin_factor: 6, frame_ms: 10.0, source_channels: SOURCE_CHANNELS }
    }
}

impl Preprocess {
    pub fn n_inputs(&self) -> usize {
        (self.source_channels / self.bin_factor).max(1)
    }

    pub fn apply(&self, sample: &EventSample) -> Result<DenseSample, DataError> {
        if let Some(ev) = sample.events.iter().find(|e| e.unit as usize >= self.source_channels) {
            return Err(DataError::UnitOutOfRange { unit: ev.unit as usize, channels: self.source_channels });
        }
        let (binned, n_bins) = bin_spatial(sample, self.bin_factor, self.source_channels);
        subsample_temporal(&binned, self.frame_ms, n_bins)
    }
}
