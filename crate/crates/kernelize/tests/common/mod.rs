//! Shared fixtures and independent dense-vector reference kernels for the
//! integration suites. The references are written straight from the kernel
//! definitions over dense arrays, independent of the sparse merge paths in
//! the library.

use kernelize::data::SparseVector;
use kernelize::randstream::{uniform01, StreamKey};

const VALUE_SLOT: u32 = 40;

pub fn fixture_value(seed: u64, row: u64, index: u32, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * uniform01(StreamKey::new(seed, row, index as u64, VALUE_SLOT))
}

/// A pair of vectors with `shared` overlapping coordinates plus private
/// coordinates on each side, values in (0.05, 1.05).
pub fn overlap_pair(
    dim: u32,
    shared: u32,
    only_u: u32,
    only_v: u32,
    seed: u64,
) -> (SparseVector, SparseVector) {
    assert!(shared + only_u + only_v <= dim);
    let mut u = Vec::new();
    let mut v = Vec::new();
    for i in 1..=shared {
        u.push((i, fixture_value(seed, 0, i, 0.05, 1.05)));
        v.push((i, fixture_value(seed, 1, i, 0.05, 1.05)));
    }
    for i in (shared + 1)..=(shared + only_u) {
        u.push((i, fixture_value(seed, 0, i, 0.05, 1.05)));
    }
    for i in (shared + only_u + 1)..=(shared + only_u + only_v) {
        v.push((i, fixture_value(seed, 1, i, 0.05, 1.05)));
    }
    (
        SparseVector::new(dim, u).unwrap(),
        SparseVector::new(dim, v).unwrap(),
    )
}

/// Like [`overlap_pair`], but shared coordinates of `v` are jittered copies
/// of `u` (ratio in `(ratio_lo, ratio_hi)`), the way two genuinely similar
/// histograms relate. Keeps the min-max similarity moderate-to-high.
pub fn correlated_pair(
    dim: u32,
    shared: u32,
    only_u: u32,
    only_v: u32,
    ratio_lo: f64,
    ratio_hi: f64,
    seed: u64,
) -> (SparseVector, SparseVector) {
    assert!(shared + only_u + only_v <= dim);
    let mut u = Vec::new();
    let mut v = Vec::new();
    for i in 1..=shared {
        let base = fixture_value(seed, 0, i, 0.1, 1.1);
        let ratio = fixture_value(seed, 1, i, ratio_lo, ratio_hi);
        u.push((i, base));
        v.push((i, base * ratio));
    }
    for i in (shared + 1)..=(shared + only_u) {
        u.push((i, fixture_value(seed, 0, i, 0.1, 1.1)));
    }
    for i in (shared + only_u + 1)..=(shared + only_u + only_v) {
        v.push((i, fixture_value(seed, 1, i, 0.1, 1.1)));
    }
    (
        SparseVector::new(dim, u).unwrap(),
        SparseVector::new(dim, v).unwrap(),
    )
}

/// Like [`correlated_pair`] but with flat values in (0.5, 1.5): a dense
/// balanced histogram, the regime where the Cauchy sign approximation of
/// the acos-chi2 kernel is tight.
pub fn dense_histogram_pair(
    dim: u32,
    shared: u32,
    only_u: u32,
    only_v: u32,
    ratio_lo: f64,
    ratio_hi: f64,
    seed: u64,
) -> (SparseVector, SparseVector) {
    assert!(shared + only_u + only_v <= dim);
    let mut u = Vec::new();
    let mut v = Vec::new();
    for i in 1..=shared {
        let base = fixture_value(seed, 0, i, 0.5, 1.5);
        let ratio = fixture_value(seed, 1, i, ratio_lo, ratio_hi);
        u.push((i, base));
        v.push((i, base * ratio));
    }
    for i in (shared + 1)..=(shared + only_u) {
        u.push((i, fixture_value(seed, 0, i, 0.5, 1.5)));
    }
    for i in (shared + only_u + 1)..=(shared + only_u + only_v) {
        v.push((i, fixture_value(seed, 1, i, 0.5, 1.5)));
    }
    (
        SparseVector::new(dim, u).unwrap(),
        SparseVector::new(dim, v).unwrap(),
    )
}

pub fn dense(v: &SparseVector) -> Vec<f64> {
    let mut out = vec![0.0; v.dim() as usize];
    for &(i, x) in v.entries() {
        out[i as usize - 1] = x;
    }
    out
}

pub fn ref_rho(u: &[f64], v: &[f64]) -> f64 {
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu: f64 = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv: f64 = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    dot / (nu * nv)
}

pub fn ref_acos(u: &[f64], v: &[f64]) -> f64 {
    1.0 - ref_rho(u, v).clamp(-1.0, 1.0).acos() / std::f64::consts::PI
}

pub fn ref_chi2(u: &[f64], v: &[f64]) -> f64 {
    u.iter()
        .zip(v)
        .map(|(&a, &b)| {
            if a + b > 0.0 {
                2.0 * a * b / (a + b)
            } else {
                0.0
            }
        })
        .sum()
}

pub fn ref_acos_chi2(u: &[f64], v: &[f64]) -> f64 {
    1.0 - ref_chi2(u, v).clamp(-1.0, 1.0).acos() / std::f64::consts::PI
}

pub fn ref_minmax(u: &[f64], v: &[f64]) -> f64 {
    let smin: f64 = u.iter().zip(v).map(|(&a, &b)| a.min(b)).sum();
    let smax: f64 = u.iter().zip(v).map(|(&a, &b)| a.max(b)).sum();
    smin / smax
}

pub fn ref_rbf(u: &[f64], v: &[f64], gamma: f64) -> f64 {
    (-gamma * (1.0 - ref_rho(u, v))).exp()
}

pub fn ref_frbf(u: &[f64], v: &[f64], gamma: f64) -> f64 {
    let r = ref_rho(u, v);
    0.5 * (-gamma * (1.0 - r)).exp() + 0.5 * (-gamma * (1.0 + r)).exp()
}

pub fn ref_l1(u: &[f64]) -> Vec<f64> {
    let s: f64 = u.iter().sum();
    u.iter().map(|&a| a / s).collect()
}

/// Mean and sample standard deviation.
pub fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, var.sqrt())
}
