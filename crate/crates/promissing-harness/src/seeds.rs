//! Deterministic seed derivation.
//!
//! Every random stage of an experiment (simulation, corruption, splitting,
//! training, removal orders) gets its seed from the master seed by one rule:
//! start from `splitmix64(master)` and fold in each component word with
//! `state = splitmix64(state XOR word)`. String components are FNV-1a
//! hashed into words first. The rule is pure arithmetic, so re-running any
//! subset of repetitions reproduces their seeds (and therefore their rows)
//! exactly, on any platform.

/// One splitmix64 step (Steele, Lea, Flood 2014); bijective on u64.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// FNV-1a hash of a label, for mixing strings into the seed stream.
pub fn label(s: &str) -> u64 {
    let mut h: u64 = 0xCBF2_9CE4_8422_2325;
    for b in s.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

/// Derives a stage seed from the master seed and component words.
pub fn derive(master: u64, words: &[u64]) -> u64 {
    words
        .iter()
        .fold(splitmix64(master), |state, &w| splitmix64(state ^ w))
}

/// Convenience for the common (stage label, index) pattern.
pub fn derive_for(master: u64, stage: &str, index: u64) -> u64 {
    derive(master, &[label(stage), index])
}
