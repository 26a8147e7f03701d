//! Counter-based Gaussian noise source.
//!
//! Every draw is addressed by the triple (seed, replicate, coordinate): the
//! seed keys a ChaCha8 stream cipher, the replicate selects the stream, and
//! the coordinate selects a fixed word position inside the stream. Draws are
//! therefore reproducible and independent of evaluation order or of how a
//! Monte Carlo loop is partitioned across workers.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// Words of ChaCha output consumed per standard normal coordinate
/// (two u64 uniforms for the Box-Muller transform).
const WORDS_PER_COORD: u128 = 4;

/// Addressable source of standard normal draws.
///
/// Distinct roles (data sampling, quantile simulation, prior draws) must use
/// distinct seeds; within one seed, streams are indexed by replicate and word
/// positions by coordinate.
#[derive(Debug, Clone, Copy)]
pub struct NoiseSource {
    seed: u64,
}

impl NoiseSource {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn stream(&self, replicate: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(replicate);
        rng
    }

    /// Standard normal draw for 1-based coordinate `index` of `replicate`.
    pub fn standard_normal(&self, replicate: u64, index: usize) -> f64 {
        debug_assert!(index >= 1);
        let mut rng = self.stream(replicate);
        rng.set_word_pos((index as u128 - 1) * WORDS_PER_COORD);
        normal_from(&mut rng)
    }

    /// Standard normal draws for coordinates 1..=n of `replicate`.
    /// Identical values to n calls of [`standard_normal`], amortizing the
    /// cipher block work.
    pub fn normal_row(&self, replicate: u64, n: usize) -> Vec<f64> {
        let mut rng = self.stream(replicate);
        (0..n).map(|_| normal_from(&mut rng)).collect()
    }

    /// Raw sequential generator for replicate-scoped auxiliary randomness
    /// (subset draws, Rademacher signs). Word positions here overlap the
    /// coordinate addressing, so callers must use a seed dedicated to them.
    pub fn replicate_rng(&self, replicate: u64) -> ChaCha8Rng {
        self.stream(replicate)
    }
}

/// Uniform in the open interval (0,1) from a full 64-bit word.
pub fn unit_open(word: u64) -> f64 {
    ((word >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// One Box-Muller normal, consuming exactly two u64 words.
pub fn normal_from<R: RngCore>(rng: &mut R) -> f64 {
    let u1 = unit_open(rng.next_u64());
    let u2 = unit_open(rng.next_u64());
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Fair ±1 draw.
pub fn rademacher_sign<R: RngCore>(rng: &mut R) -> f64 {
    if rng.next_u64() & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Uniform draw in {lo, ..., hi} inclusive, by rejection on the top bits.
pub fn uniform_range<R: RngCore>(rng: &mut R, lo: usize, hi: usize) -> usize {
    debug_assert!(lo <= hi);
    let span = (hi - lo + 1) as u64;
    // Lemire-style bounded draw with rejection to stay unbiased.
    let zone = u64::MAX - u64::MAX % span;
    loop {
        let w = rng.next_u64();
        if w < zone {
            return lo + (w % span) as usize;
        }
    }
}
