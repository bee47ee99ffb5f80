//! Deterministic seed derivation for independent RNG streams.

/// Derive a child seed from a base seed and a purpose tag (FNV-1a over the
/// tag bytes, mixed with the base). Distinct tags give independent streams;
/// the same (base, tag) pair always gives the same seed.
pub(crate) fn derive_seed(base: u64, tag: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in tag.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h ^ base.wrapping_mul(0x9e37_79b9_7f4a_7c15)
}
