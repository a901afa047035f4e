//! Deterministic seed derivation.
//!
//! One root seed per experiment; per-replica streams come from a counter-based
//! SplitMix64 split, so replicas are independent of each other and of the
//! order in which they are scheduled. Per-edge random draws use the same
//! mixer keyed by the canonical (sorted) endpoint pair, which makes edge
//! weights independent of graph construction and query order.

const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer (Steele, Lea, Flood 2014).
#[inline]
pub fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for replica stream `stream` of the experiment rooted at `root`.
#[inline]
pub fn derive(root: u64, stream: u64) -> u64 {
    splitmix64(splitmix64(root) ^ stream.wrapping_mul(GAMMA))
}

/// Mixes an edge key `(u, v)` into the weight-assignment seed. The endpoints
/// are canonicalized so that `edge_key(s, u, v) == edge_key(s, v, u)`.
#[inline]
pub fn edge_key(seed: u64, u: usize, v: usize) -> u64 {
    let (a, b) = if u <= v { (u, v) } else { (v, u) };
    let h = splitmix64(seed ^ (a as u64).wrapping_mul(GAMMA));
    splitmix64(h ^ (b as u64).wrapping_add(GAMMA))
}

/// Maps 64 random bits to a uniform double in `[0, 1)` (53-bit resolution).
#[inline]
pub fn unit_f64(bits: u64) -> f64 {
    (bits >> 11) as f64 / (1u64 << 53) as f64
}
