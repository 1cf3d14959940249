//! Seeded random streams.
//!
//! Every random draw in the crate goes through [`ChaCha8Rng`] handles that are
//! derived from an explicit seed, so results only depend on configuration.

use rand::SeedableRng;
pub use rand_chacha::ChaCha8Rng;

/// Stream identifiers keep independent consumers of one seed apart.
pub mod stream {
    pub const DATA: u64 = 0;
    pub const INIT: u64 = 1;
    pub const PILOTS: u64 = 2;
    pub const LDPC: u64 = 3;
    pub const SURGERY: u64 = 4;
    pub const EVAL: u64 = 1 << 40;
}

/// Returns a generator for `(seed, stream)`.
pub fn seeded(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Generator for block `block` of evaluation point `point`.
///
/// Two receivers evaluated with the same seed see exactly the same blocks.
pub fn eval_block(seed: u64, point: usize, block: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (point as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream(stream::EVAL + block);
    rng
}
