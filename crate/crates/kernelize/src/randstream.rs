//! Deterministic counter-keyed random variates.
//!
//! Every feature map in this crate draws its randomness as a pure function
//! of a [`StreamKey`]: master seed, sample index `j`, dimension index `i`,
//! and a slot separating the different variates a method needs for one
//! `(j, i)` pair. The draws are fixed per run, not per vector: two files
//! featurized with the same seed see identical projections for each
//! `(j, i)`, which is what makes the inner-product estimators valid across
//! train/test splits. Because a draw is a pure function of its key, rows
//! can be featurized lazily, out of order, or in parallel and the values
//! never change.
//!
//! Keys are mixed to 64 uniform bits with a splitmix64-style finalizer.
//! Integer mixing is bit-exact on every platform; samplers that go through
//! `ln`/`cos`/`tan` are bit-exact for a given build and expected to agree
//! within 1 ulp across conforming math libraries.

/// Addresses a single variate in the keyed stream.
///
/// `dim` is the 1-based dimension index (0 is used for per-sample draws
/// that involve no dimension, such as the Fourier phase). `slot` separates
/// the variates a method needs per `(sample, dim)` pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub seed: u64,
    pub sample: u64,
    pub dim: u64,
    pub slot: u32,
}

impl StreamKey {
    pub fn new(seed: u64, sample: u64, dim: u64, slot: u32) -> Self {
        Self {
            seed,
            sample,
            dim,
            slot,
        }
    }
}

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// 64 uniform bits for `key`. `lane` separates the internal sub-draws of
/// samplers that consume more than one uniform.
///
/// Each component is spread by its own large odd stride before the
/// avalanche rounds; the finalizer's diffusion is weak on unit-stride
/// counters, so raw indices must never be absorbed directly.
#[inline]
fn bits(key: StreamKey, lane: u32) -> u64 {
    let mut h = key.seed ^ 0x243f_6a88_85a3_08d3;
    h = mix64(h ^ key.sample.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    h = mix64(h ^ key.dim.wrapping_mul(0xc2b2_ae3d_27d4_eb4f));
    h = mix64(h ^ (((key.slot as u64) << 32) | lane as u64).wrapping_mul(0x1656_67b1_9e37_79f9));
    h
}

#[inline]
fn uniform01_lane(key: StreamKey, lane: u32) -> f64 {
    // Top 53 bits offset by half a step: strictly inside (0, 1), so the
    // logarithm of any draw is finite. Every operation here is exact in f64.
    const SCALE: f64 = 1.0 / 9_007_199_254_740_992.0; // 2^-53
    ((bits(key, lane) >> 11) as f64 + 0.5) * SCALE
}

/// Uniform draw in the open interval (0, 1).
#[inline]
pub fn uniform01(key: StreamKey) -> f64 {
    uniform01_lane(key, 0)
}

/// Standard normal draw (Box-Muller over two keyed uniforms).
#[inline]
pub fn gaussian(key: StreamKey) -> f64 {
    let u1 = uniform01_lane(key, 0);
    let u2 = uniform01_lane(key, 1);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Standard Cauchy draw: tan(pi (U - 1/2)).
#[inline]
pub fn cauchy(key: StreamKey) -> f64 {
    (std::f64::consts::PI * (uniform01_lane(key, 0) - 0.5)).tan()
}

/// Gamma(2, 1) draw: -ln U1 - ln U2.
#[inline]
pub fn gamma21(key: StreamKey) -> f64 {
    -uniform01_lane(key, 0).ln() - uniform01_lane(key, 1).ln()
}

/// Uniform draw in [0, 2pi).
#[inline]
pub fn uniform_0_2pi(key: StreamKey) -> f64 {
    std::f64::consts::TAU * uniform01_lane(key, 0)
}
