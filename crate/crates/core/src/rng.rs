use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Generator for an independent, numbered substream of `seed`.
pub fn stream(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// FNV-1a over `bytes`, keyed by `seed`.
pub fn fnv1a(seed: u64, bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in seed.to_le_bytes().iter().chain(bytes) {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

// Named substreams so independent consumers of one seed never overlap.
pub(crate) mod streams {
    pub const SPLIT: u64 = 1;
    pub const SYNTH: u64 = 2;
    pub const TRAIN_SET: u64 = 3;
    pub const INIT: u64 = 4;
    pub const TASKS: u64 = 5;
    pub const BASELINE: u64 = 6;
    pub const VALIDATION: u64 = 7;
    pub const GRADCHECK: u64 = 8;
    /// Epoch shuffles use `EPOCH_BASE + epoch`.
    pub const EPOCH_BASE: u64 = 1 << 32;
    /// Evaluation runs use `RUN_BASE + run`.
    pub const RUN_BASE: u64 = 2 << 32;
}
