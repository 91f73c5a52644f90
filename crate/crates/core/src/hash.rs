//! Stable 64-bit FNV-1a, used wherever a hash must not change across runs or platforms.

const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(PRIME))
}

/// FNV-1a over `bytes` with a seed folded into the offset basis.
pub fn fnv1a64_seeded(bytes: &[u8], seed: u64) -> u64 {
    let start = fnv1a64(&seed.to_le_bytes());
    bytes
        .iter()
        .fold(start, |h, &b| (h ^ u64::from(b)).wrapping_mul(PRIME))
}
