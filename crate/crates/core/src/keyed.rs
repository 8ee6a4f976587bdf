//! Counter-based keyed randomness. Every lazily generated quantity (child
//! counts, edge uniforms) is a pure function of a 64-bit key, so the order in
//! which a map is explored never changes what it contains.

/// 64-bit finalizer with full avalanche (the SplitMix64 output function).
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[inline]
pub fn hash2(a: u64, b: u64) -> u64 {
    mix64(mix64(a ^ 0x9e37_79b9_7f4a_7c15).wrapping_add(b))
}

#[inline]
pub fn hash3(a: u64, b: u64, c: u64) -> u64 {
    hash2(hash2(a, b), c)
}

/// Uniform in [0, 1) from the top 53 bits.
#[inline]
pub fn unit(x: u64) -> f64 {
    (x >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Geometric count with P(K ≥ k) = β^k, i.e. law μ_β, by inversion.
#[inline]
pub fn geometric_from_bits(bits: u64, ln_beta: f64) -> u32 {
    // 1 − unit ∈ (0, 1], so the logarithm is finite.
    let u = 1.0 - unit(bits);
    let k = (u.ln() / ln_beta).floor();
    if k >= u32::MAX as f64 {
        u32::MAX
    } else {
        k as u32
    }
}

pub(crate) const TAG_ROOT: u64 = 0x726f_6f74;
pub(crate) const TAG_ASC: u64 = 0x0061_7363;
pub(crate) const TAG_DESC: u64 = 0x6465_7363;
pub(crate) const TAG_COUNT_ASC: u64 = 0x636e_7461;
pub(crate) const TAG_COUNT_DESC: u64 = 0x636e_7464;
pub(crate) const TAG_EDGE: u64 = 0x6564_6765;

#[inline]
pub fn asc_child_key(parent: u64, i: u32) -> u64 {
    hash3(parent, TAG_ASC, i as u64)
}

#[inline]
pub fn desc_child_key(parent: u64, i: u32) -> u64 {
    hash3(parent, TAG_DESC, i as u64)
}

#[inline]
pub fn asc_count(key: u64, ln_alpha: f64) -> u32 {
    geometric_from_bits(hash2(key, TAG_COUNT_ASC), ln_alpha)
}

#[inline]
pub fn desc_count(key: u64, ln_one_minus_alpha: f64) -> u32 {
    geometric_from_bits(hash2(key, TAG_COUNT_DESC), ln_one_minus_alpha)
}
