//! Kernel estimators from encoded vectors, a convergence harness for the
//! estimator error as the sample count grows, and a Monte Carlo oracle for
//! the folded-RBF cosine identity.

use rayon::prelude::*;
use thiserror::Error;

use crate::data::{normalize, SparseVector};
use crate::kernels::{KernelError, KernelSpec};
use crate::randstream::{gaussian, StreamKey};
use crate::sketch::{encode_vector, EncodedVector, SketchError, SketchPlan};

const SLOT_ORACLE_X: u32 = 6;
const SLOT_ORACLE_Z: u32 = 7;

#[derive(Debug, Error)]
pub enum EstimateError {
    #[error("encoded dimensions differ: {0} vs {1}")]
    DimMismatch(usize, usize),
    #[error("rho must lie in [0, 1], got {0}")]
    InvalidRho(f64),
    #[error("sample count must be at least 1")]
    InvalidN,
    #[error("k grid must be nonempty and strictly increasing")]
    InvalidKGrid,
    #[error("reps must be at least 1")]
    InvalidReps,
    #[error("no pairs supplied")]
    NoPairs,
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Sketch(#[from] SketchError),
}

/// dot(eu, ev) / k: the kernel estimate carried by two encodings of the
/// same plan.
pub fn estimate_pair(
    eu: &EncodedVector,
    ev: &EncodedVector,
    k: usize,
) -> Result<f64, EstimateError> {
    if eu.total_dim() != ev.total_dim() {
        return Err(EstimateError::DimMismatch(eu.total_dim(), ev.total_dim()));
    }
    Ok(eu.dot(ev) / k as f64)
}

/// Estimator error summary at one sample count.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub k: usize,
    pub mean_abs_error: f64,
    pub std_error: f64,
    pub reps: u32,
}

/// Per-k error rows for one (method, kernel) pairing.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub method: String,
    pub kernel: String,
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceReport {
    /// CSV with header `method,kernel,k,reps,mean_abs_err,std_err`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,kernel,k,reps,mean_abs_err,std_err\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{:.6e},{:.6e}\n",
                self.method, self.kernel, row.k, row.reps, row.mean_abs_error, row.std_error
            ));
        }
        out
    }
}

/// Measure |dot/k - exact kernel| over pairs, repetitions, and a grid of
/// sample counts.
///
/// `plan` is a template: its `k` is replaced by each grid entry and
/// repetition r shifts the seed to `plan.seed + r`. Vectors are normalized
/// per `plan.norm` before both the exact kernel and the feature maps, so
/// the two sides see the same inputs. Deterministic given the plan seed.
pub fn convergence_study(
    pairs: &[(SparseVector, SparseVector)],
    kspec: &KernelSpec,
    plan: &SketchPlan,
    k_grid: &[usize],
    reps: u32,
) -> Result<ConvergenceReport, EstimateError> {
    if k_grid.is_empty() || k_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(EstimateError::InvalidKGrid);
    }
    if reps == 0 {
        return Err(EstimateError::InvalidReps);
    }
    if pairs.is_empty() {
        return Err(EstimateError::NoPairs);
    }

    let normalized: Vec<(SparseVector, SparseVector)> = pairs
        .iter()
        .map(|(u, v)| {
            Ok((
                normalize(u, plan.norm).map_err(SketchError::from)?,
                normalize(v, plan.norm).map_err(SketchError::from)?,
            ))
        })
        .collect::<Result<_, EstimateError>>()?;
    let exact: Vec<f64> = normalized
        .iter()
        .map(|(u, v)| kspec.evaluate(u, v))
        .collect::<Result<_, _>>()?;

    let mut rows = Vec::with_capacity(k_grid.len());
    for &k in k_grid {
        let cells: Vec<f64> = (0..reps)
            .into_par_iter()
            .flat_map_iter(|rep| {
                let seed = plan.seed.wrapping_add(rep as u64);
                let rep_plan = SketchPlan {
                    k,
                    seed,
                    norm: crate::data::NormMode::None, // inputs already normalized
                    ..plan.clone()
                };
                normalized.iter().zip(&exact).map(move |((u, v), &target)| {
                    let eu = encode_vector(u, &rep_plan).expect("pair satisfies preconditions");
                    let ev = encode_vector(v, &rep_plan).expect("pair satisfies preconditions");
                    (eu.dot(&ev) / k as f64 - target).abs()
                })
            })
            .collect();
        let n = cells.len() as f64;
        let mean = cells.iter().sum::<f64>() / n;
        let var = cells.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / (n - 1.0).max(1.0);
        rows.push(ConvergenceRow {
            k,
            mean_abs_error: mean,
            std_error: (var / n).sqrt(),
            reps,
        });
    }

    Ok(ConvergenceReport {
        method: plan.method.to_string(),
        kernel: kspec.kind().to_string(),
        rows,
    })
}

/// Monte Carlo check of the identity
/// E[cos(sqrt(g) x) cos(sqrt(g) y)] = (exp(-g(1-rho)) + exp(-g(1+rho))) / 2
/// for (x, y) standard bivariate normal with correlation rho. Returns the
/// sample mean over n draws.
pub fn frbf_oracle(rho: f64, gamma: f64, n: usize, seed: u64) -> Result<f64, EstimateError> {
    frbf_oracle_with_se(rho, gamma, n, seed).map(|(mean, _)| mean)
}

/// Same draw as [`frbf_oracle`], also returning the empirical standard
/// error of the mean.
pub fn frbf_oracle_with_se(
    rho: f64,
    gamma: f64,
    n: usize,
    seed: u64,
) -> Result<(f64, f64), EstimateError> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(EstimateError::InvalidRho(rho));
    }
    if n == 0 {
        return Err(EstimateError::InvalidN);
    }
    let root = gamma.sqrt();
    let tail = (1.0 - rho * rho).sqrt();
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for t in 0..n {
        let x = gaussian(StreamKey::new(seed, t as u64, 1, SLOT_ORACLE_X));
        let z = gaussian(StreamKey::new(seed, t as u64, 1, SLOT_ORACLE_Z));
        let y = rho * x + tail * z;
        let c = (root * x).cos() * (root * y).cos();
        sum += c;
        sum_sq += c * c;
    }
    let mean = sum / n as f64;
    let var = (sum_sq / n as f64 - mean * mean).max(0.0);
    Ok((mean, (var / n as f64).sqrt()))
}

/// Closed form the oracle converges to.
pub fn frbf_closed_form(rho: f64, gamma: f64) -> f64 {
    0.5 * (-gamma * (1.0 - rho)).exp() + 0.5 * (-gamma * (1.0 + rho)).exp()
}
