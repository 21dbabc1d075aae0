//! Counter-based deterministic random draws.
//!
//! Every stochastic operation in this crate derives its randomness from a
//! stateless hash of `(seed, site ids)`. A draw for a given site does not
//! depend on traversal order, so parallel schedules and worker counts never
//! change the output.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer. Good avalanche, cheap, stable across platforms.
#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hash a seed and four site identifiers into a 64-bit value.
#[inline]
pub fn site_hash(seed: u64, ids: [u64; 4]) -> u64 {
    let mut state = mix(seed ^ 0xD6E8_FEB8_6659_FD93);
    for id in ids {
        state = mix(state.wrapping_add(GOLDEN) ^ id);
    }
    state
}

/// Uniform draw in `[0, 1)` for a site.
#[inline]
pub fn unit_f64(seed: u64, ids: [u64; 4]) -> f64 {
    // 53 mantissa bits of the hash; exactly representable, never 1.0.
    (site_hash(seed, ids) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Standard normal draw for a site (Box-Muller, two sub-draws).
///
/// The second sub-draw perturbs `ids[3]`, so a site must not reuse the
/// same ids for an independent uniform draw.
#[inline]
pub fn normal_f64(seed: u64, ids: [u64; 4]) -> f64 {
    let u1 = unit_f64(seed, [ids[0], ids[1], ids[2], ids[3]]);
    let u2 = unit_f64(seed, [ids[0], ids[1], ids[2], ids[3] ^ 0x5A5A_5A5A]);
    // Map u1 into (0, 1] so the log is finite.
    let u1 = 1.0 - u1;
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// First `k` entries of a seeded Fisher-Yates shuffle of `0..n`.
///
/// Used to pick distinct indices (sampling without replacement).
pub fn sample_distinct(seed: u64, ids: [u64; 2], n: usize, k: usize) -> Vec<usize> {
    debug_assert!(k <= n);
    let mut idx: Vec<usize> = (0..n).collect();
    for step in 0..k {
        let span = (n - step) as u64;
        let j = step + (site_hash(seed, [ids[0], ids[1], step as u64, 0]) % span) as usize;
        idx.swap(step, j);
    }
    idx.truncate(k);
    idx
}
