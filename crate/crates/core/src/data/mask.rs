use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::params::Mask;

/// Fixed random connectivity with exactly `round(rows·cols·density)` ones.
pub fn gen_sparsity_mask(rows: usize, cols: usize, density: f64, seed: u64) -> Mask {
    assert!(density > 0.0 && density <= 1.0, "density must lie in (0, 1]");
    let n = rows * cols;
    let ones = ((n as f64) * density).round() as usize;
    let mut bits = vec![false; n];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for idx in sample(&mut rng, n, ones.min(n)) {
        bits[idx] = true;
    }
    Mask::from_bits(rows, cols, bits)
}
