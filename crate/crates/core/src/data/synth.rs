//! Two-channel coincidence task.
//!
//! Class 1: channel 0 fires at `t1`, channel 1 at `t1 + gap`.
//! Class 0: channel 1 fires at `t1`, channel 0 at `t1 + gap`.
//!
//! Without delays both classes present two isolated spikes `gap` steps
//! apart. Delaying channel 0 by `gap` makes the class-1 spikes coincide
//! while pushing the class-0 spikes `2·gap` apart, so a coincidence
//! detector separates the classes only after the delay is learned.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Dataset, Event, EventSample};

/// `n_pairs` samples of each class, interleaved, on a `dt_ms` grid of
/// `t_total` frames. Onsets are uniform over the range that keeps both
/// spikes and a `gap`-delayed channel 0 inside the sequence.
pub fn synth_coincidence(n_pairs: usize, gap: usize, t_total: usize, dt_ms: f32, seed: u64) -> Dataset {
    assert!(t_total > 2 * gap + 2, "sequence too short for the requested gap");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let last_onset = t_total - 2 * gap - 2;
    let mut samples = Vec::with_capacity(2 * n_pairs);
    for _ in 0..n_pairs {
        for label in [0u16, 1] {
            let t1 = rng.gen_range(1..=last_onset.max(1));
            let (first, second) = if label == 1 { (0, 1) } else { (1, 0) };
            let mut events = vec![
                Event { time_ms: t1 as f32 * dt_ms, unit: first },
                Event { time_ms: (t1 + gap) as f32 * dt_ms, unit: second },
            ];
            events.sort_by(|a, b| a.time_ms.total_cmp(&b.time_ms).then(a.unit.cmp(&b.unit)));
            samples.push(EventSample { events, label, duration_ms: t_total as f32 * dt_ms });
        }
    }
    Dataset { name: format!("coincidence-gap{gap}"), split: "train".into(), n_classes: 2, n_channels: 2, samples }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::subsample_temporal;

    #[test]
    fn layout() {
        let ds = synth_coincidence(20, 5, 30, 10.0, 1);
        assert_eq!(ds.samples.len(), 40);
        for s in &ds.samples {
            let d = subsample_temporal(s, 10.0, 2).unwrap();
            assert_eq!(d.n_frames(), 30);
            let t0 = (0..30).find(|&t| d.get(t, 0)).unwrap();
            let t1 = (0..30).find(|&t| d.get(t, 1)).unwrap();
            if s.label == 1 {
                assert_eq!(t1, t0 + 5);
            } else {
                assert_eq!(t0, t1 + 5);
            }
            assert!(t0 + 5 < 30);
        }
        assert_eq!(ds, synth_coincidence(20, 5, 30, 10.0, 1));
    }

    #[test]
    fn zero_gap_classes_identical() {
        let ds = synth_coincidence(10, 0, 20, 10.0, 4);
        for pair in ds.samples.chunks(2) {
            let a = subsample_temporal(&pair[0], 10.0, 2).unwrap();
            let b = subsample_temporal(&pair[1], 10.0, 2).unwrap();
            // both channels coincide regardless of label
            for d in [&a, &b] {
                let t0 = (0..20).find(|&t| d.get(t, 0)).unwrap();
                assert!(d.get(t0, 1));
            }
        }
    }
}
