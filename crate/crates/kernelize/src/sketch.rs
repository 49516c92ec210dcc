//! Randomized feature maps that linearize the nonlinear kernels.
//!
//! Each method turns a sparse vector into an [`EncodedVector`] with exactly
//! `k` nonzeros, built so that `dot(enc(u), enc(v)) / k` estimates the
//! corresponding kernel:
//!
//! * sign projections (Gaussian draws) -> acos kernel, as a 2k-wide one-hot
//!   encoding of the k signs;
//! * sign projections (Cauchy draws) -> acos-chi2 kernel (approximately);
//! * consistent weighted sampling with 0-bit bucketing -> min-max kernel;
//! * random Fourier features -> RBF kernel; the phase-free variant ->
//!   folded RBF;
//! * combined encodings that pair a CWS bucket with a sign or a Fourier
//!   value per sample -> the min-max product kernels.
//!
//! All randomness comes from [`crate::randstream`] keyed by
//! `(seed, sample, dim, slot)`, so two datasets featurized with the same
//! plan share their projections and the estimators stay valid across
//! train/test splits.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use thiserror::Error;

use crate::data::{fmt_sig, normalize, DataError, Dataset, NormMode, SparseVector};
use crate::randstream::{cauchy, gamma21, gaussian, uniform01, uniform_0_2pi, StreamKey};

// Slot layout for the keyed stream. CWS draws (group A) and the
// projection/phase draws (group B) are disjoint so the two factors of a
// combined sketch are independent.
const SLOT_PROJ: u32 = 0;
const SLOT_RFF_PHASE: u32 = 1;
const SLOT_CWS_R: u32 = 2;
const SLOT_CWS_C: u32 = 3;
const SLOT_CWS_BETA: u32 = 4;

const SQRT_2: f64 = std::f64::consts::SQRT_2;

#[derive(Debug, Error)]
pub enum SketchError {
    #[error("zero vector cannot be sketched")]
    ZeroVector,
    #[error("vector is not unit l2 norm (norm = {0}); normalize with l2 first")]
    NotUnitNorm(f64),
    #[error("gamma must be a positive real, got {0}")]
    InvalidGamma(f64),
    #[error("method {0} requires gamma")]
    MissingGamma(SketchMethod),
    #[error("method {0} does not take gamma")]
    UnexpectedGamma(SketchMethod),
    #[error("method {0} requires bucket bits b")]
    MissingBits(SketchMethod),
    #[error("method {0} does not take bucket bits")]
    UnexpectedBits(SketchMethod),
    #[error("bucket bits must lie in 1..=16, got {0}")]
    InvalidBits(u8),
    #[error("sample count k must be at least 1")]
    InvalidK,
    #[error("row {row}: {source}")]
    AtRow {
        row: usize,
        source: Box<SketchError>,
    },
    #[error("line {line}: {msg}")]
    Encoded { line: usize, msg: String },
    #[error("{0}")]
    Shape(String),
    #[error("encoded input has no data rows")]
    EmptyEncoded,
    #[error(transparent)]
    Data(#[from] DataError),
}

/// A linearization method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SketchMethod {
    SignGauss,
    SignCauchy,
    Rff,
    Frff,
    Cws0Bit,
    MmAcos,
    MmAcosChi2,
    MmRbf,
}

impl SketchMethod {
    pub fn needs_gamma(self) -> bool {
        matches!(
            self,
            SketchMethod::Rff | SketchMethod::Frff | SketchMethod::MmRbf
        )
    }

    pub fn needs_bits(self) -> bool {
        matches!(
            self,
            SketchMethod::Cws0Bit
                | SketchMethod::MmAcos
                | SketchMethod::MmAcosChi2
                | SketchMethod::MmRbf
        )
    }

    pub const ALL: [SketchMethod; 8] = [
        SketchMethod::SignGauss,
        SketchMethod::SignCauchy,
        SketchMethod::Rff,
        SketchMethod::Frff,
        SketchMethod::Cws0Bit,
        SketchMethod::MmAcos,
        SketchMethod::MmAcosChi2,
        SketchMethod::MmRbf,
    ];
}

impl fmt::Display for SketchMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SketchMethod::SignGauss => "signgauss",
            SketchMethod::SignCauchy => "signcauchy",
            SketchMethod::Rff => "rff",
            SketchMethod::Frff => "frff",
            SketchMethod::Cws0Bit => "cws0",
            SketchMethod::MmAcos => "mmacos",
            SketchMethod::MmAcosChi2 => "mmacoschi2",
            SketchMethod::MmRbf => "mmrbf",
        })
    }
}

impl FromStr for SketchMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "signgauss" => Ok(SketchMethod::SignGauss),
            "signcauchy" => Ok(SketchMethod::SignCauchy),
            "rff" => Ok(SketchMethod::Rff),
            "frff" => Ok(SketchMethod::Frff),
            "cws0" => Ok(SketchMethod::Cws0Bit),
            "mmacos" => Ok(SketchMethod::MmAcos),
            "mmacoschi2" => Ok(SketchMethod::MmAcosChi2),
            "mmrbf" => Ok(SketchMethod::MmRbf),
            other => Err(format!("unknown method `{other}`")),
        }
    }
}

/// Everything that determines a feature map: method, sample count, bucket
/// bits, gamma, master seed, and the normalization applied before sketching.
#[derive(Debug, Clone, PartialEq)]
pub struct SketchPlan {
    pub method: SketchMethod,
    pub k: usize,
    pub b: Option<u8>,
    pub gamma: Option<f64>,
    pub seed: u64,
    pub norm: NormMode,
}

impl SketchPlan {
    pub fn new(
        method: SketchMethod,
        k: usize,
        b: Option<u8>,
        gamma: Option<f64>,
        seed: u64,
        norm: NormMode,
    ) -> Result<Self, SketchError> {
        if k == 0 {
            return Err(SketchError::InvalidK);
        }
        match (method.needs_bits(), b) {
            (true, None) => return Err(SketchError::MissingBits(method)),
            (false, Some(_)) => return Err(SketchError::UnexpectedBits(method)),
            (true, Some(bits)) if !(1..=16).contains(&bits) => {
                return Err(SketchError::InvalidBits(bits))
            }
            _ => {}
        }
        match (method.needs_gamma(), gamma) {
            (true, None) => return Err(SketchError::MissingGamma(method)),
            (false, Some(_)) => return Err(SketchError::UnexpectedGamma(method)),
            (true, Some(g)) if !(g.is_finite() && g > 0.0) => {
                return Err(SketchError::InvalidGamma(g))
            }
            _ => {}
        }
        Ok(Self {
            method,
            k,
            b,
            gamma,
            seed,
            norm,
        })
    }

    /// Total dimension of the encoded vectors this plan produces.
    pub fn output_dim(&self) -> usize {
        match self.method {
            SketchMethod::SignGauss | SketchMethod::SignCauchy => 2 * self.k,
            SketchMethod::Rff | SketchMethod::Frff => self.k,
            SketchMethod::Cws0Bit | SketchMethod::MmRbf => self.k << self.b.unwrap(),
            SketchMethod::MmAcos | SketchMethod::MmAcosChi2 => self.k << (self.b.unwrap() + 1),
        }
    }

    /// One-line `key=value` header recording the full plan.
    pub fn header(&self) -> String {
        format!(
            "# method={} k={} b={} gamma={} seed={} norm={}",
            self.method,
            self.k,
            self.b.map_or_else(|| "-".to_string(), |b| b.to_string()),
            self.gamma
                .map_or_else(|| "-".to_string(), |g| fmt_sig(g, 12)),
            self.seed,
            self.norm,
        )
    }
}

/// Projection distribution for sign sketches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProjDist {
    Gaussian,
    Cauchy,
}

/// Inner kernel of a combined min-max sign sketch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CombinedInner {
    Acos,
    AcosChi2,
}

/// x_j = sum over the support of v_i * r_ij, with r_ij drawn per
/// (seed, j, i) from the given distribution. Linear in v.
pub fn project(v: &SparseVector, j: usize, dist: ProjDist, seed: u64) -> f64 {
    let mut sum = 0.0;
    for &(i, value) in v.entries() {
        let key = StreamKey::new(seed, j as u64, i as u64, SLOT_PROJ);
        let r = match dist {
            ProjDist::Gaussian => gaussian(key),
            ProjDist::Cauchy => cauchy(key),
        };
        sum += value * r;
    }
    sum
}

/// k projection signs, +1 for x_j >= 0 and -1 otherwise.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitSketch {
    bits: Vec<i8>,
}

impl BitSketch {
    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// Sign values in {-1, +1}, one per sample.
    pub fn bits(&self) -> &[i8] {
        &self.bits
    }

    /// Fraction of positions where both sketches carry the same sign.
    pub fn match_fraction(&self, other: &BitSketch) -> f64 {
        assert_eq!(self.len(), other.len());
        let same = self
            .bits
            .iter()
            .zip(&other.bits)
            .filter(|(a, b)| a == b)
            .count();
        same as f64 / self.len() as f64
    }
}

/// `bits[j] = sign(project(v, j))`, with sign(0) = +1.
pub fn sign_sketch(v: &SparseVector, k: usize, dist: ProjDist, seed: u64) -> BitSketch {
    let bits = (0..k)
        .map(|j| {
            if project(v, j, dist, seed) >= 0.0 {
                1
            } else {
                -1
            }
        })
        .collect();
    BitSketch { bits }
}

#[inline]
fn sign_block_index(j: usize, positive: bool) -> usize {
    2 * j + positive as usize
}

#[inline]
fn cws_block_index(j: usize, b: u8, bucket: usize) -> usize {
    (j << b) + bucket
}

#[inline]
fn combined_sign_index(j: usize, b: u8, bucket: usize, positive: bool) -> usize {
    (j << (b + 1)) + 2 * bucket + positive as usize
}

/// Sparse encoded feature vector. Entries are `(index, value)` pairs with
/// 0-based ascending indices; the nonzero count is exactly the plan's k for
/// every method (Fourier features store all k values, signs and buckets
/// store a single 1 per block).
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedVector {
    total_dim: usize,
    entries: Vec<(usize, f64)>,
}

impl EncodedVector {
    pub fn new(total_dim: usize, entries: Vec<(usize, f64)>) -> Result<Self, SketchError> {
        let mut prev: Option<usize> = None;
        for &(i, v) in &entries {
            if i >= total_dim {
                return Err(SketchError::Shape(format!(
                    "entry index {i} out of range for dimension {total_dim}"
                )));
            }
            if prev.is_some_and(|p| i <= p) {
                return Err(SketchError::Shape(format!(
                    "entry indices not strictly increasing at {i}"
                )));
            }
            if !v.is_finite() {
                return Err(SketchError::Shape(format!("non-finite value at index {i}")));
            }
            prev = Some(i);
        }
        Ok(Self { total_dim, entries })
    }

    fn from_sorted_unchecked(total_dim: usize, entries: Vec<(usize, f64)>) -> Self {
        Self { total_dim, entries }
    }

    pub fn total_dim(&self) -> usize {
        self.total_dim
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    /// Sparse dot product (merge over ascending indices).
    pub fn dot(&self, other: &EncodedVector) -> f64 {
        let (a, b) = (&self.entries, &other.entries);
        let (mut ia, mut ib) = (0, 0);
        let mut sum = 0.0;
        while ia < a.len() && ib < b.len() {
            match a[ia].0.cmp(&b[ib].0) {
                std::cmp::Ordering::Less => ia += 1,
                std::cmp::Ordering::Greater => ib += 1,
                std::cmp::Ordering::Equal => {
                    sum += a[ia].1 * b[ib].1;
                    ia += 1;
                    ib += 1;
                }
            }
        }
        sum
    }

    pub fn squared_norm(&self) -> f64 {
        self.entries.iter().map(|&(_, v)| v * v).sum()
    }
}

/// One-hot expansion of a sign sketch: block j of width 2 holds a single 1,
/// at offset 2j for a negative sign and 2j+1 otherwise. dot/k of two
/// encodings equals their sign match fraction.
pub fn encode_signs(s: &BitSketch) -> EncodedVector {
    let entries = s
        .bits
        .iter()
        .enumerate()
        .map(|(j, &bit)| (sign_block_index(j, bit > 0), 1.0))
        .collect();
    EncodedVector::from_sorted_unchecked(2 * s.len(), entries)
}

/// One consistent weighted sample: the winning dimension index and its
/// integer level. Collisions of the full tuple across two vectors happen
/// with probability exactly minmax(u, v).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CwsSample {
    pub i_star: u32,
    pub t_star: i64,
}

/// Draw CWS sample j for v. Only the support is visited: a zero coordinate
/// has log u_i = -inf and can never attain the argmin. Draws are keyed per
/// (seed, j, i), so the same (j, i) sees the same (r, c, beta) in every
/// vector. Ties break toward the lowest dimension index.
pub fn cws_sample(v: &SparseVector, j: usize, seed: u64) -> Result<CwsSample, SketchError> {
    if v.is_zero() {
        return Err(SketchError::ZeroVector);
    }
    let mut best: Option<(f64, u32, i64)> = None;
    for &(i, value) in v.entries() {
        let r = gamma21(StreamKey::new(seed, j as u64, i as u64, SLOT_CWS_R));
        let c = gamma21(StreamKey::new(seed, j as u64, i as u64, SLOT_CWS_C));
        let beta = uniform01(StreamKey::new(seed, j as u64, i as u64, SLOT_CWS_BETA));
        let t = (value.ln() / r + beta).floor();
        // a_i = c / (y * e^r) with y = exp(r (t - beta)); compared in log
        // domain, which preserves the argmin and cannot overflow.
        let ln_a = c.ln() - r * (t - beta) - r;
        if best.is_none_or(|(champ, _, _)| ln_a < champ) {
            best = Some((ln_a, i, t as i64));
        }
    }
    let (_, i_star, t_star) = best.unwrap();
    Ok(CwsSample { i_star, t_star })
}

/// 0-bit encoding: keep bucket = (i* - 1) mod 2^b per sample; block j of
/// width 2^b holds a single 1 at that bucket.
pub fn encode_zero_bit_cws(samples: &[CwsSample], b: u8) -> EncodedVector {
    assert!((1..=16).contains(&b), "bucket bits must lie in 1..=16");
    let width = 1usize << b;
    let entries = samples
        .iter()
        .enumerate()
        .map(|(j, s)| (cws_block_index(j, b, (s.i_star as usize - 1) % width), 1.0))
        .collect();
    EncodedVector::from_sorted_unchecked(samples.len() * width, entries)
}

fn check_unit_l2(v: &SparseVector) -> Result<(), SketchError> {
    let norm = v.l2_norm();
    if (norm - 1.0).abs() > 1e-6 {
        return Err(SketchError::NotUnitNorm(norm));
    }
    Ok(())
}

fn gamma_checked(gamma: f64) -> Result<f64, SketchError> {
    if gamma.is_finite() && gamma > 0.0 {
        Ok(gamma)
    } else {
        Err(SketchError::InvalidGamma(gamma))
    }
}

/// Random Fourier features for the RBF kernel: feature j is
/// sqrt(2) cos(sqrt(gamma) x_j + w_j) with a Gaussian projection x_j and a
/// uniform phase w_j. Requires unit l2 norm. dot/k of two feature vectors
/// estimates exp(-gamma (1 - rho)); the sqrt(2) factor cancels the 1/2
/// that averaging over the phase introduces.
pub fn rff_features(
    v: &SparseVector,
    k: usize,
    gamma: f64,
    seed: u64,
) -> Result<EncodedVector, SketchError> {
    let gamma = gamma_checked(gamma)?;
    check_unit_l2(v)?;
    let root = gamma.sqrt();
    let entries = (0..k)
        .map(|j| {
            let x = project(v, j, ProjDist::Gaussian, seed);
            let w = uniform_0_2pi(StreamKey::new(seed, j as u64, 0, SLOT_RFF_PHASE));
            (j, SQRT_2 * (root * x + w).cos())
        })
        .collect();
    Ok(EncodedVector::from_sorted_unchecked(k, entries))
}

/// Phase-free Fourier features: feature j is cos(sqrt(gamma) x_j), no
/// scaling. dot/k estimates the folded RBF kernel, whose own 1/2 terms
/// account for the phase-free average.
pub fn frff_features(
    v: &SparseVector,
    k: usize,
    gamma: f64,
    seed: u64,
) -> Result<EncodedVector, SketchError> {
    let gamma = gamma_checked(gamma)?;
    check_unit_l2(v)?;
    let root = gamma.sqrt();
    let entries = (0..k)
        .map(|j| (j, (root * project(v, j, ProjDist::Gaussian, seed)).cos()))
        .collect();
    Ok(EncodedVector::from_sorted_unchecked(k, entries))
}

/// Combined min-max x sign encoding. Per sample j, a CWS bucket c and an
/// independent projection sign s are drawn (disjoint key slots); block j of
/// width 2^(b+1) holds a single 1 at offset 2c + (s positive). dot/k
/// estimates minmax * acos (Gaussian signs) or minmax * acos-chi2 (Cauchy
/// signs on the L1-normalized vector).
pub fn combined_mm_sign_sketch(
    v: &SparseVector,
    k: usize,
    b: u8,
    inner: CombinedInner,
    seed: u64,
) -> Result<EncodedVector, SketchError> {
    if !(1..=16).contains(&b) {
        return Err(SketchError::InvalidBits(b));
    }
    let (dist, sign_input) = match inner {
        CombinedInner::Acos => (ProjDist::Gaussian, v.clone()),
        CombinedInner::AcosChi2 => (
            ProjDist::Cauchy,
            normalize(v, NormMode::L1).map_err(|_| SketchError::ZeroVector)?,
        ),
    };
    let width = 1usize << b;
    let mut entries = Vec::with_capacity(k);
    for j in 0..k {
        let bucket = (cws_sample(v, j, seed)?.i_star as usize - 1) % width;
        let positive = project(&sign_input, j, dist, seed) >= 0.0;
        entries.push((combined_sign_index(j, b, bucket, positive), 1.0));
    }
    Ok(EncodedVector::from_sorted_unchecked(k << (b + 1), entries))
}

/// Combined min-max x RBF encoding: block j of width 2^b holds the Fourier
/// feature value at the CWS bucket offset. dot/k estimates minmax * rbf.
/// The Fourier stream uses the L2-normalized vector.
pub fn combined_mm_rbf_sketch(
    v: &SparseVector,
    k: usize,
    b: u8,
    gamma: f64,
    seed: u64,
) -> Result<EncodedVector, SketchError> {
    if !(1..=16).contains(&b) {
        return Err(SketchError::InvalidBits(b));
    }
    let gamma = gamma_checked(gamma)?;
    let unit = normalize(v, NormMode::L2).map_err(|_| SketchError::ZeroVector)?;
    let root = gamma.sqrt();
    let width = 1usize << b;
    let mut entries = Vec::with_capacity(k);
    for j in 0..k {
        let bucket = (cws_sample(v, j, seed)?.i_star as usize - 1) % width;
        let x = project(&unit, j, ProjDist::Gaussian, seed);
        let w = uniform_0_2pi(StreamKey::new(seed, j as u64, 0, SLOT_RFF_PHASE));
        entries.push((cws_block_index(j, b, bucket), SQRT_2 * (root * x + w).cos()));
    }
    Ok(EncodedVector::from_sorted_unchecked(k << b, entries))
}

/// Encode one vector under a plan (after the plan's normalization).
pub fn encode_vector(v: &SparseVector, plan: &SketchPlan) -> Result<EncodedVector, SketchError> {
    let w = normalize(v, plan.norm)?;
    match plan.method {
        SketchMethod::SignGauss => Ok(encode_signs(&sign_sketch(
            &w,
            plan.k,
            ProjDist::Gaussian,
            plan.seed,
        ))),
        SketchMethod::SignCauchy => Ok(encode_signs(&sign_sketch(
            &w,
            plan.k,
            ProjDist::Cauchy,
            plan.seed,
        ))),
        SketchMethod::Rff => rff_features(&w, plan.k, plan.gamma.unwrap(), plan.seed),
        SketchMethod::Frff => frff_features(&w, plan.k, plan.gamma.unwrap(), plan.seed),
        SketchMethod::Cws0Bit => {
            let samples: Vec<CwsSample> = (0..plan.k)
                .map(|j| cws_sample(&w, j, plan.seed))
                .collect::<Result<_, _>>()?;
            Ok(encode_zero_bit_cws(&samples, plan.b.unwrap()))
        }
        SketchMethod::MmAcos => {
            combined_mm_sign_sketch(&w, plan.k, plan.b.unwrap(), CombinedInner::Acos, plan.seed)
        }
        SketchMethod::MmAcosChi2 => combined_mm_sign_sketch(
            &w,
            plan.k,
            plan.b.unwrap(),
            CombinedInner::AcosChi2,
            plan.seed,
        ),
        SketchMethod::MmRbf => {
            combined_mm_rbf_sketch(&w, plan.k, plan.b.unwrap(), plan.gamma.unwrap(), plan.seed)
        }
    }
}

/// Labeled collection of encoded vectors sharing one total dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedDataset {
    dim: usize,
    rows: Vec<(i32, EncodedVector)>,
}

impl EncodedDataset {
    pub fn new(dim: usize, rows: Vec<(i32, EncodedVector)>) -> Result<Self, SketchError> {
        for (row, (_, v)) in rows.iter().enumerate() {
            if v.total_dim() != dim {
                return Err(SketchError::AtRow {
                    row,
                    source: Box::new(SketchError::Shape(format!(
                        "row dimension {} != dataset dimension {dim}",
                        v.total_dim()
                    ))),
                });
            }
        }
        Ok(Self { dim, rows })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> &[(i32, EncodedVector)] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn labels(&self) -> Vec<i32> {
        self.rows.iter().map(|(l, _)| *l).collect()
    }
}

/// Featurize every row of a dataset under one plan. Rows are processed in
/// parallel; output order and labels follow the input. Identical plan and
/// input give identical output.
pub fn featurize_dataset(d: &Dataset, plan: &SketchPlan) -> Result<EncodedDataset, SketchError> {
    let rows = d
        .rows()
        .par_iter()
        .enumerate()
        .map(|(row, (label, v))| {
            encode_vector(v, plan)
                .map(|e| (*label, e))
                .map_err(|e| SketchError::AtRow {
                    row,
                    source: Box::new(e),
                })
        })
        .collect::<Result<Vec<_>, _>>()?;
    EncodedDataset::new(plan.output_dim(), rows)
}

/// Write an encoded dataset as svmlight text (1-based indices on disk),
/// with a comment header recording the full plan.
pub fn write_encoded_svmlight(d: &EncodedDataset, plan: &SketchPlan) -> String {
    let mut out = plan.header();
    out.push('\n');
    for (label, v) in d.rows() {
        out.push_str(&label.to_string());
        for &(i, val) in v.entries() {
            out.push(' ');
            out.push_str(&(i + 1).to_string());
            out.push(':');
            out.push_str(&fmt_sig(val, 9));
        }
        out.push('\n');
    }
    out
}

fn parse_plan_header(line: usize, content: &str) -> Result<SketchPlan, SketchError> {
    let err = |msg: String| SketchError::Encoded { line, msg };
    let mut method = None;
    let mut k = None;
    let mut b = None;
    let mut gamma = None;
    let mut seed = None;
    let mut norm = None;
    for tok in content.split_whitespace() {
        let (key, value) = tok
            .split_once('=')
            .ok_or_else(|| err(format!("bad header token `{tok}`")))?;
        match key {
            "method" => {
                method = Some(value.parse::<SketchMethod>().map_err(&err)?);
            }
            "k" => {
                k = Some(
                    value
                        .parse::<usize>()
                        .map_err(|_| err(format!("bad k `{value}`")))?,
                );
            }
            "b" => {
                if value != "-" {
                    b = Some(
                        value
                            .parse::<u8>()
                            .map_err(|_| err(format!("bad b `{value}`")))?,
                    );
                }
            }
            "gamma" => {
                if value != "-" {
                    gamma = Some(
                        value
                            .parse::<f64>()
                            .map_err(|_| err(format!("bad gamma `{value}`")))?,
                    );
                }
            }
            "seed" => {
                seed = Some(
                    value
                        .parse::<u64>()
                        .map_err(|_| err(format!("bad seed `{value}`")))?,
                );
            }
            "norm" => {
                norm = Some(value.parse::<NormMode>().map_err(&err)?);
            }
            other => return Err(err(format!("unknown header key `{other}`"))),
        }
    }
    let method = method.ok_or_else(|| err("header missing method".into()))?;
    let k = k.ok_or_else(|| err("header missing k".into()))?;
    let seed = seed.ok_or_else(|| err("header missing seed".into()))?;
    let norm = norm.ok_or_else(|| err("header missing norm".into()))?;
    SketchPlan::new(method, k, b, gamma, seed, norm)
}

/// Read encoded svmlight text. Values may be negative (Fourier features).
/// If a `# method=...` header is present, the plan is returned and fixes
/// the total dimension; otherwise the largest index seen is used.
pub fn read_encoded_svmlight(
    text: &str,
) -> Result<(EncodedDataset, Option<SketchPlan>), SketchError> {
    let mut plan: Option<SketchPlan> = None;
    let mut rows: Vec<(i32, Vec<(usize, f64)>)> = Vec::new();
    let mut max_index = 0usize;

    for (line_idx, raw) in text.lines().enumerate() {
        let line = line_idx + 1;
        let trimmed = raw.trim();
        if let Some(comment) = trimmed.strip_prefix('#') {
            let comment = comment.trim();
            if plan.is_none() && comment.starts_with("method=") {
                plan = Some(parse_plan_header(line, comment)?);
            }
            continue;
        }
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut tokens = content.split_whitespace();
        let label_tok = tokens.next().unwrap();
        let label: i32 = label_tok.parse().map_err(|_| SketchError::Encoded {
            line,
            msg: format!("invalid label `{label_tok}`"),
        })?;
        let mut entries: Vec<(usize, f64)> = Vec::new();
        let mut prev = 0usize;
        for tok in tokens {
            let (idx_s, val_s) = tok.split_once(':').ok_or_else(|| SketchError::Encoded {
                line,
                msg: format!("expected `index:value`, got `{tok}`"),
            })?;
            let index: usize = idx_s.parse().map_err(|_| SketchError::Encoded {
                line,
                msg: format!("invalid index `{idx_s}`"),
            })?;
            if index == 0 {
                return Err(SketchError::Encoded {
                    line,
                    msg: "indices are 1-based".into(),
                });
            }
            let value: f64 = val_s.parse().map_err(|_| SketchError::Encoded {
                line,
                msg: format!("invalid value `{val_s}`"),
            })?;
            if !value.is_finite() {
                return Err(SketchError::Encoded {
                    line,
                    msg: format!("non-finite value `{val_s}`"),
                });
            }
            if index <= prev {
                return Err(SketchError::Encoded {
                    line,
                    msg: format!("index {index} does not increase (previous {prev})"),
                });
            }
            prev = index;
            max_index = max_index.max(index);
            entries.push((index - 1, value));
        }
        rows.push((label, entries));
    }

    if rows.is_empty() {
        return Err(SketchError::EmptyEncoded);
    }
    let dim = match &plan {
        Some(p) => p.output_dim(),
        None => max_index,
    };
    if max_index > dim {
        return Err(SketchError::Shape(format!(
            "index {max_index} exceeds the plan dimension {dim}"
        )));
    }
    let rows = rows
        .into_iter()
        .map(|(label, entries)| (label, EncodedVector::from_sorted_unchecked(dim, entries)))
        .collect();
    Ok((EncodedDataset::new(dim, rows)?, plan))
}
