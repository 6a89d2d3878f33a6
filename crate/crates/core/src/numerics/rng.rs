//! Seed derivation. Every random draw in the pipeline comes from a ChaCha
//! stream whose seed is derived from the single configuration seed plus a
//! stable label, so results do not depend on call order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from `seed`, a text label and an index.
pub fn substream(seed: u64, label: &str, index: u64) -> u64 {
    // FNV-1a over the label keeps the mapping stable across toolchains.
    let mut h: u64 = 0xCBF2_9CE4_8422_2325;
    for b in label.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0100_0000_01B3);
    }
    splitmix64(splitmix64(seed ^ h).wrapping_add(index))
}

pub fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn stream(seed: u64, label: &str, index: u64) -> ChaCha8Rng {
    rng_from(substream(seed, label, index))
}

/// A uniform draw strictly inside (0, 1).
pub fn open_uniform<R: rand::Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}
