//! Counter-based seed derivation: the seed for (particle, step, site) is a pure
//! function of the master seed, independent of evaluation order and thread count.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Lane reserved for resampling draws.
pub(crate) const RESAMPLE_LANE: u32 = u32::MAX;

#[derive(Debug, Clone)]
pub struct SeedGen {
    key: [u8; 32],
}

/// Maps 64 random bits to a uniform in `[0, 1)` with 53-bit resolution.
pub fn unit(x: u64) -> f64 {
    (x >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

pub(crate) fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child master seed, e.g. for a nested `infer` at state offset `site`.
pub fn mix(master: u64, site: u64) -> u64 {
    splitmix(master ^ splitmix(site))
}

impl SeedGen {
    pub fn new(master: u64) -> Self {
        SeedGen { key: ChaCha8Rng::seed_from_u64(master).get_seed() }
    }

    /// Stream for `(lane, t)`; word `j` of the stream is seed `j`.
    pub fn stream(&self, lane: u32, t: u64) -> ChaCha8Rng {
        let mut r = ChaCha8Rng::from_seed(self.key);
        r.set_stream(((lane as u64) << 32) | (t & 0xffff_ffff));
        r
    }

    pub fn fill(&self, i: usize, t: u64, out: &mut [f64]) {
        let mut r = self.stream(i as u32, t);
        for x in out {
            *x = unit(r.next_u64());
        }
    }

    pub fn at(&self, i: usize, t: u64, j: usize) -> f64 {
        let mut r = self.stream(i as u32, t);
        r.set_word_pos(2 * j as u128);
        unit(r.next_u64())
    }
}

/// Seed `j` of particle `i` at step `t`.
pub fn seeds_for(master: u64, i: usize, t: u64, j: usize) -> f64 {
    SeedGen::new(master).at(i, t, j)
}
