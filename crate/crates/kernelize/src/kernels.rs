//! Exact kernel evaluation and precomputed kernel-matrix export.
//!
//! All kernels are defined on sparse nonnegative vectors and return values
//! in [0, 1]. The correlation-based kernels (acos, RBF, fRBF) are invariant
//! under positive rescaling of either argument; the min-max kernel is not.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use thiserror::Error;

use crate::data::{fmt_sig, normalize, Dataset, NormMode, SparseVector};

#[derive(Debug, Error)]
pub enum KernelError {
    #[error("{which} vector is all-zero")]
    ZeroVector { which: &'static str },
    #[error("{which} vector is not L1-normalized (sum = {sum})")]
    NotL1Normalized { which: &'static str, sum: f64 },
    #[error("gamma must be a positive real, got {0}")]
    InvalidGamma(f64),
    #[error("kernel {0} requires gamma")]
    MissingGamma(KernelKind),
    #[error("kernel {0} does not take gamma")]
    UnexpectedGamma(KernelKind),
    #[error("dataset dimensions differ: {0} vs {1}")]
    DimMismatch(u32, u32),
    #[error("row {row}, col {col}: {source}")]
    AtCell {
        row: usize,
        col: usize,
        source: Box<KernelError>,
    },
}

/// The kernels this crate evaluates exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelKind {
    /// Normalized linear kernel (correlation).
    LinearRho,
    Acos,
    Chi2,
    AcosChi2,
    MinMax,
    Rbf,
    Frbf,
    MmAcos,
    MmAcosChi2,
    MmRbf,
}

impl KernelKind {
    pub fn needs_gamma(self) -> bool {
        matches!(self, KernelKind::Rbf | KernelKind::Frbf | KernelKind::MmRbf)
    }
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KernelKind::LinearRho => "rho",
            KernelKind::Acos => "acos",
            KernelKind::Chi2 => "chi2",
            KernelKind::AcosChi2 => "acoschi2",
            KernelKind::MinMax => "minmax",
            KernelKind::Rbf => "rbf",
            KernelKind::Frbf => "frbf",
            KernelKind::MmAcos => "mmacos",
            KernelKind::MmAcosChi2 => "mmacoschi2",
            KernelKind::MmRbf => "mmrbf",
        })
    }
}

impl FromStr for KernelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rho" | "linear" => Ok(KernelKind::LinearRho),
            "acos" => Ok(KernelKind::Acos),
            "chi2" => Ok(KernelKind::Chi2),
            "acoschi2" => Ok(KernelKind::AcosChi2),
            "minmax" => Ok(KernelKind::MinMax),
            "rbf" => Ok(KernelKind::Rbf),
            "frbf" => Ok(KernelKind::Frbf),
            "mmacos" => Ok(KernelKind::MmAcos),
            "mmacoschi2" => Ok(KernelKind::MmAcosChi2),
            "mmrbf" => Ok(KernelKind::MmRbf),
            other => Err(format!("unknown kernel `{other}`")),
        }
    }
}

/// A kernel choice plus its gamma parameter where one applies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    kind: KernelKind,
    gamma: Option<f64>,
}

impl KernelSpec {
    pub fn new(kind: KernelKind, gamma: Option<f64>) -> Result<Self, KernelError> {
        match (kind.needs_gamma(), gamma) {
            (true, None) => Err(KernelError::MissingGamma(kind)),
            (false, Some(_)) => Err(KernelError::UnexpectedGamma(kind)),
            (true, Some(g)) if !(g.is_finite() && g > 0.0) => Err(KernelError::InvalidGamma(g)),
            _ => Ok(Self { kind, gamma }),
        }
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn gamma(&self) -> Option<f64> {
        self.gamma
    }

    /// Evaluate K(u, v).
    pub fn evaluate(&self, u: &SparseVector, v: &SparseVector) -> Result<f64, KernelError> {
        match self.kind {
            KernelKind::LinearRho => rho(u, v),
            KernelKind::Acos => acos_kernel(u, v),
            KernelKind::Chi2 => chi2(u, v),
            KernelKind::AcosChi2 => acos_chi2(u, v),
            KernelKind::MinMax => minmax(u, v),
            KernelKind::Rbf => rbf(u, v, self.gamma.unwrap()),
            KernelKind::Frbf => frbf(u, v, self.gamma.unwrap()),
            KernelKind::MmAcos => mm_acos(u, v),
            KernelKind::MmAcosChi2 => mm_acos_chi2(u, v),
            KernelKind::MmRbf => mm_rbf(u, v, self.gamma.unwrap()),
        }
    }
}

// ---- scalar kernels ------------------------------------------------------

fn check_nonzero(u: &SparseVector, v: &SparseVector) -> Result<(), KernelError> {
    if u.is_zero() {
        return Err(KernelError::ZeroVector { which: "first" });
    }
    if v.is_zero() {
        return Err(KernelError::ZeroVector { which: "second" });
    }
    Ok(())
}

/// Dot product over the shared support of two index-sorted vectors.
fn sparse_dot(u: &SparseVector, v: &SparseVector) -> f64 {
    let (a, b) = (u.entries(), v.entries());
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

#[inline]
fn clamp01(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

/// 1 - acos(x)/pi, with x clamped into [-1, 1] before the arccosine
/// (rounding can push a correlation a few ulp past the boundary).
#[inline]
fn acos_transform(x: f64) -> f64 {
    1.0 - x.clamp(-1.0, 1.0).acos() / std::f64::consts::PI
}

fn gamma_checked(gamma: f64) -> Result<f64, KernelError> {
    if gamma.is_finite() && gamma > 0.0 {
        Ok(gamma)
    } else {
        Err(KernelError::InvalidGamma(gamma))
    }
}

/// Correlation: dot(u, v) / (|u| |v|). In [0, 1] for nonnegative data and
/// invariant under positive rescaling of either argument.
pub fn rho(u: &SparseVector, v: &SparseVector) -> Result<f64, KernelError> {
    check_nonzero(u, v)?;
    Ok(clamp01(sparse_dot(u, v) / (u.l2_norm() * v.l2_norm())))
}

/// 1 - acos(rho)/pi. In [0.5, 1] for nonnegative data.
pub fn acos_kernel(u: &SparseVector, v: &SparseVector) -> Result<f64, KernelError> {
    Ok(acos_transform(rho(u, v)?))
}

fn check_l1(u: &SparseVector, which: &'static str) -> Result<(), KernelError> {
    let sum = u.l1_norm();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(KernelError::NotL1Normalized { which, sum });
    }
    Ok(())
}

/// Chi-squared histogram similarity: sum of 2 u_i v_i / (u_i + v_i) over the
/// shared support. Both inputs must sum to 1.
pub fn chi2(u: &SparseVector, v: &SparseVector) -> Result<f64, KernelError> {
    check_l1(u, "first")?;
    check_l1(v, "second")?;
    let (a, b) = (u.entries(), v.entries());
    let (mut ia, mut ib) = (0, 0);
    let mut sum = 0.0;
    while ia < a.len() && ib < b.len() {
        match a[ia].0.cmp(&b[ib].0) {
            std::cmp::Ordering::Less => ia += 1,
            std::cmp::Ordering::Greater => ib += 1,
            std::cmp::Ordering::Equal => {
                let (x, y) = (a[ia].1, b[ib].1);
                sum += 2.0 * x * y / (x + y);
                ia += 1;
                ib += 1;
            }
        }
    }
    Ok(clamp01(sum))
}

/// 1 - acos(chi2)/pi on L1-normalized histograms.
pub fn acos_chi2(u: &SparseVector, v: &SparseVector) -> Result<f64, KernelError> {
    Ok(acos_transform(chi2(u, v)?))
}

/// Min-max similarity: sum(min) / sum(max) over the union of supports.
/// Not scale-invariant.
pub fn minmax(u: &SparseVector, v: &SparseVector) -> Result<f64, KernelError> {
    if u.is_zero() && v.is_zero() {
        return Err(KernelError::ZeroVector { which: "both" });
    }
    let (a, b) = (u.entries(), v.entries());
    let (mut ia, mut ib) = (0, 0);
    let mut smin = 0.0;
    let mut smax = 0.0;
    while ia < a.len() && ib < b.len() {
        match a[ia].0.cmp(&b[ib].0) {
            std::cmp::Ordering::Less => {
                smax += a[ia].1;
                ia += 1;
            }
            std::cmp::Ordering::Greater => {
                smax += b[ib].1;
                ib += 1;
            }
            std::cmp::Ordering::Equal => {
                smin += a[ia].1.min(b[ib].1);
                smax += a[ia].1.max(b[ib].1);
                ia += 1;
                ib += 1;
            }
        }
    }
    smax += a[ia..].iter().map(|&(_, x)| x).sum::<f64>();
    smax += b[ib..].iter().map(|&(_, x)| x).sum::<f64>();
    Ok(smin / smax)
}

/// exp(-gamma (1 - rho)).
pub fn rbf(u: &SparseVector, v: &SparseVector, gamma: f64) -> Result<f64, KernelError> {
    let gamma = gamma_checked(gamma)?;
    Ok((-gamma * (1.0 - rho(u, v)?)).exp())
}

/// Folded RBF: exp(-gamma(1-rho))/2 + exp(-gamma(1+rho))/2. Monotone in
/// rho >= 0; note the self-similarity is (1 + exp(-2 gamma))/2, not 1.
pub fn frbf(u: &SparseVector, v: &SparseVector, gamma: f64) -> Result<f64, KernelError> {
    let gamma = gamma_checked(gamma)?;
    let r = rho(u, v)?;
    Ok(0.5 * (-gamma * (1.0 - r)).exp() + 0.5 * (-gamma * (1.0 + r)).exp())
}

/// Product kernel: minmax * acos. Positive definite as a product of
/// positive definite kernels.
pub fn mm_acos(u: &SparseVector, v: &SparseVector) -> Result<f64, KernelError> {
    Ok(minmax(u, v)? * acos_kernel(u, v)?)
}

/// Product kernel: minmax * acos-chi2. The min-max factor uses the vectors
/// as given; the chi-squared factor uses L1-normalized copies.
pub fn mm_acos_chi2(u: &SparseVector, v: &SparseVector) -> Result<f64, KernelError> {
    let mm = minmax(u, v)?;
    let lu = normalize(u, NormMode::L1).map_err(|_| KernelError::ZeroVector { which: "first" })?;
    let lv = normalize(v, NormMode::L1).map_err(|_| KernelError::ZeroVector { which: "second" })?;
    Ok(mm * acos_chi2(&lu, &lv)?)
}

/// Product kernel: minmax * rbf.
pub fn mm_rbf(u: &SparseVector, v: &SparseVector, gamma: f64) -> Result<f64, KernelError> {
    Ok(minmax(u, v)? * rbf(u, v, gamma)?)
}

// ---- kernel matrices -----------------------------------------------------

/// Dense row-major kernel matrix with row/column labels.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    n_rows: usize,
    n_cols: usize,
    values: Vec<f64>,
    row_labels: Vec<i32>,
    col_labels: Vec<i32>,
}

impl KernelMatrix {
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.n_cols + col]
    }

    pub fn row_labels(&self) -> &[i32] {
        &self.row_labels
    }

    pub fn col_labels(&self) -> &[i32] {
        &self.col_labels
    }
}

/// `values[i][j] = K(a.rows[i], b.rows[j])`. Rows are evaluated in parallel;
/// the result does not depend on the schedule.
pub fn kernel_matrix(
    a: &Dataset,
    b: &Dataset,
    spec: &KernelSpec,
) -> Result<KernelMatrix, KernelError> {
    if a.dim() != b.dim() {
        return Err(KernelError::DimMismatch(a.dim(), b.dim()));
    }
    let rows: Vec<Vec<f64>> = a
        .rows()
        .par_iter()
        .enumerate()
        .map(|(i, (_, u))| {
            b.rows()
                .iter()
                .enumerate()
                .map(|(j, (_, v))| {
                    spec.evaluate(u, v).map_err(|e| KernelError::AtCell {
                        row: i,
                        col: j,
                        source: Box::new(e),
                    })
                })
                .collect::<Result<Vec<f64>, KernelError>>()
        })
        .collect::<Result<Vec<_>, _>>()?;

    Ok(KernelMatrix {
        n_rows: a.len(),
        n_cols: b.len(),
        values: rows.into_iter().flatten().collect(),
        row_labels: a.rows().iter().map(|(l, _)| *l).collect(),
        col_labels: b.rows().iter().map(|(l, _)| *l).collect(),
    })
}

/// Precomputed-kernel text: row i is
/// `<label> 0:<i+1> 1:<K_i1> ... m:<K_im>` with a 1-based serial in
/// feature 0 and 9 significant digits per value.
pub fn export_precomputed(m: &KernelMatrix) -> String {
    let mut out = String::new();
    for i in 0..m.n_rows() {
        out.push_str(&m.row_labels[i].to_string());
        out.push_str(" 0:");
        out.push_str(&(i + 1).to_string());
        for j in 0..m.n_cols() {
            out.push(' ');
            out.push_str(&(j + 1).to_string());
            out.push(':');
            out.push_str(&fmt_sig(m.get(i, j), 9));
        }
        out.push('\n');
    }
    out
}

/// The 58-value gamma grid used when tuning the RBF-family kernels:
/// {0.001, 0.01, 0.1:0.1:2, 2.5, 3:1:20, 25:5:50, 60:10:100, 120, 150,
/// 200, 300, 500, 1000}, ranges inclusive at both ends.
pub fn gamma_grid() -> Vec<f64> {
    let mut g = vec![0.001, 0.01];
    g.extend((1..=20).map(|i| i as f64 / 10.0));
    g.push(2.5);
    g.extend((3..=20).map(|i| i as f64));
    g.extend((5..=10).map(|i| (i * 5) as f64));
    g.extend((6..=10).map(|i| (i * 10) as f64));
    g.extend([120.0, 150.0, 200.0, 300.0, 500.0, 1000.0]);
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sv(pairs: &[(u32, f64)]) -> SparseVector {
        SparseVector::new(32, pairs.to_vec()).unwrap()
    }

    #[test]
    fn rho_examples() {
        let u = sv(&[(1, 2.0), (5, 3.0)]);
        assert!((rho(&u, &u).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(rho(&sv(&[(1, 1.0)]), &sv(&[(2, 1.0)])).unwrap(), 0.0);
        let r = rho(&sv(&[(1, 1.0), (2, 1.0)]), &sv(&[(1, 1.0)])).unwrap();
        assert!((r - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn rho_rejects_zero_vectors() {
        let z = sv(&[]);
        let u = sv(&[(1, 1.0)]);
        assert!(matches!(
            rho(&z, &u),
            Err(KernelError::ZeroVector { which: "first" })
        ));
        assert!(matches!(
            rho(&u, &z),
            Err(KernelError::ZeroVector { which: "second" })
        ));
    }

    #[test]
    fn acos_examples() {
        let u = sv(&[(1, 1.0), (2, 1.0)]);
        // rho(u, u) can sit 1 ulp under 1, which arccos amplifies to ~1e-8.
        assert!((acos_kernel(&u, &u).unwrap() - 1.0).abs() < 1e-7);
        // rho = 0 -> 1 - (pi/2)/pi = 0.5
        assert!((acos_kernel(&sv(&[(1, 1.0)]), &sv(&[(2, 1.0)])).unwrap() - 0.5).abs() < 1e-15);
        // rho = 1/sqrt(2) -> arccos = pi/4 -> 0.75
        let k = acos_kernel(&sv(&[(1, 1.0), (2, 1.0)]), &sv(&[(1, 1.0)])).unwrap();
        assert!((k - 0.75).abs() < 1e-12);
    }

    #[test]
    fn chi2_examples() {
        let u = sv(&[(1, 0.5), (2, 0.5)]);
        assert!((chi2(&u, &u).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(chi2(&sv(&[(1, 1.0)]), &sv(&[(2, 1.0)])).unwrap(), 0.0);
        // 2 * 0.5 * 1 / 1.5 = 2/3
        let k = chi2(&u, &sv(&[(1, 1.0)])).unwrap();
        assert!((k - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn chi2_requires_l1_and_names_the_vector() {
        let bad = sv(&[(1, 2.0)]);
        let good = sv(&[(1, 1.0)]);
        match chi2(&bad, &good) {
            Err(KernelError::NotL1Normalized {
                which: "first",
                sum,
            }) => {
                assert!((sum - 2.0).abs() < 1e-12)
            }
            other => panic!("expected L1 error, got {other:?}"),
        }
        assert!(matches!(
            chi2(&good, &bad),
            Err(KernelError::NotL1Normalized {
                which: "second",
                ..
            })
        ));
    }

    #[test]
    fn acos_chi2_examples() {
        let u = sv(&[(1, 0.5), (2, 0.5)]);
        assert!((acos_chi2(&u, &u).unwrap() - 1.0).abs() < 1e-7);
        assert!((acos_chi2(&sv(&[(1, 1.0)]), &sv(&[(2, 1.0)])).unwrap() - 0.5).abs() < 1e-15);
        // chi2 = 2/3 -> 1 - arccos(2/3)/pi = 0.7322795271987699
        let k = acos_chi2(&u, &sv(&[(1, 1.0)])).unwrap();
        assert!((k - 0.7322795271987699).abs() < 1e-9);
        assert!((k - (1.0 - (2.0f64 / 3.0).acos() / std::f64::consts::PI)).abs() < 1e-12);
    }

    #[test]
    fn minmax_examples() {
        let u = sv(&[(1, 1.0), (2, 2.0)]);
        assert_eq!(minmax(&u, &u).unwrap(), 1.0);
        assert_eq!(minmax(&sv(&[(1, 1.0)]), &sv(&[(2, 1.0)])).unwrap(), 0.0);
        // min sums to 2, max sums to 4
        let k = minmax(&u, &sv(&[(1, 2.0), (2, 1.0)])).unwrap();
        assert!((k - 0.5).abs() < 1e-15);
        assert!(matches!(
            minmax(&sv(&[]), &sv(&[])),
            Err(KernelError::ZeroVector { .. })
        ));
        // One zero vector is fine: similarity 0.
        assert_eq!(minmax(&sv(&[]), &u).unwrap(), 0.0);
    }

    #[test]
    fn rbf_examples() {
        let u = sv(&[(1, 3.0)]);
        assert!((rbf(&u, &u, 7.0).unwrap() - 1.0).abs() < 1e-12);
        let e1 = (-1.0f64).exp();
        assert!((rbf(&sv(&[(1, 1.0)]), &sv(&[(2, 1.0)]), 1.0).unwrap() - e1).abs() < 1e-12);
        // gamma (1 - rho) = 5 * 0.2 = 1 for rho = 0.8
        let u2 = sv(&[(1, 2.0), (2, 1.0)]);
        let v2 = sv(&[(1, 1.0), (2, 2.0)]);
        assert!((rho(&u2, &v2).unwrap() - 0.8).abs() < 1e-12);
        assert!((rbf(&u2, &v2, 5.0).unwrap() - e1).abs() < 1e-12);
    }

    #[test]
    fn frbf_examples() {
        let u = sv(&[(1, 1.0)]);
        let v = sv(&[(2, 1.0)]);
        // rho = 0: both halves equal exp(-gamma).
        assert!((frbf(&u, &v, 1.5).unwrap() - (-1.5f64).exp()).abs() < 1e-12);
        // rho = 1: (1 + exp(-2 gamma))/2, not 1.
        let self_sim = frbf(&u, &u, 1.0).unwrap();
        assert!((self_sim - 0.5 * (1.0 + (-2.0f64).exp())).abs() < 1e-12);
        // gamma -> 0 limit is 1.
        assert!((frbf(&u, &v, 1e-12).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn product_kernels() {
        let u = sv(&[(1, 1.0), (2, 2.0)]);
        let v = sv(&[(1, 2.0), (2, 1.0)]);
        assert!((mm_acos(&u, &u).unwrap() - 1.0).abs() < 1e-7);
        // Bit-for-bit product structure.
        assert_eq!(
            mm_acos(&u, &v).unwrap(),
            minmax(&u, &v).unwrap() * acos_kernel(&u, &v).unwrap()
        );
        assert_eq!(mm_acos(&sv(&[(1, 1.0)]), &sv(&[(2, 1.0)])).unwrap(), 0.0);

        let lu = normalize(&u, NormMode::L1).unwrap();
        let lv = normalize(&v, NormMode::L1).unwrap();
        assert_eq!(
            mm_acos_chi2(&u, &v).unwrap(),
            minmax(&u, &v).unwrap() * acos_chi2(&lu, &lv).unwrap()
        );
        assert!((mm_acos_chi2(&u, &u).unwrap() - 1.0).abs() < 1e-7);
        assert_eq!(
            mm_acos_chi2(&sv(&[(1, 1.0)]), &sv(&[(2, 1.0)])).unwrap(),
            0.0
        );

        assert_eq!(
            mm_rbf(&u, &v, 2.0).unwrap(),
            minmax(&u, &v).unwrap() * rbf(&u, &v, 2.0).unwrap()
        );
        assert!((mm_rbf(&u, &u, 2.0).unwrap() - 1.0).abs() < 1e-12);
        // MM = 0.5, RBF = e^-1 -> 0.18393972
        let k = mm_rbf(&u, &v, 5.0).unwrap();
        assert!((k - 0.5 * (-1.0f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn spec_validates_gamma() {
        assert!(KernelSpec::new(KernelKind::Rbf, None).is_err());
        assert!(KernelSpec::new(KernelKind::Rbf, Some(-1.0)).is_err());
        assert!(KernelSpec::new(KernelKind::MinMax, Some(1.0)).is_err());
        assert!(KernelSpec::new(KernelKind::MinMax, None).is_ok());
        assert!(KernelSpec::new(KernelKind::MmRbf, Some(2.0)).is_ok());
    }

    fn tiny_dataset() -> Dataset {
        Dataset::new(
            4,
            vec![
                (1, SparseVector::new(4, vec![(1, 1.0), (2, 2.0)]).unwrap()),
                (2, SparseVector::new(4, vec![(2, 1.0), (3, 1.0)]).unwrap()),
                (1, SparseVector::new(4, vec![(1, 0.5), (4, 2.5)]).unwrap()),
            ],
        )
        .unwrap()
    }

    #[test]
    fn kernel_matrix_matches_scalar_and_is_symmetric() {
        let d = tiny_dataset();
        let spec = KernelSpec::new(KernelKind::MinMax, None).unwrap();
        let m = kernel_matrix(&d, &d, &spec).unwrap();
        assert_eq!(m.n_rows(), 3);
        assert_eq!(m.n_cols(), 3);
        for i in 0..3 {
            for j in 0..3 {
                let direct = minmax(&d.rows()[i].1, &d.rows()[j].1).unwrap();
                assert_eq!(m.get(i, j), direct);
                assert_eq!(m.get(i, j), m.get(j, i));
            }
        }
    }

    #[test]
    fn kernel_matrix_one_by_one() {
        let v = SparseVector::new(2, vec![(1, 3.0)]).unwrap();
        let d = Dataset::new(2, vec![(7, v)]).unwrap();
        let spec = KernelSpec::new(KernelKind::MinMax, None).unwrap();
        let m = kernel_matrix(&d, &d, &spec).unwrap();
        assert_eq!(m.get(0, 0), 1.0);
    }

    #[test]
    fn kernel_matrix_cell_errors_carry_position() {
        let rows = vec![
            (1, SparseVector::new(2, vec![(1, 1.0)]).unwrap()),
            (2, SparseVector::new(2, vec![]).unwrap()),
        ];
        let d = Dataset::new(2, rows).unwrap();
        let spec = KernelSpec::new(KernelKind::Acos, None).unwrap();
        match kernel_matrix(&d, &d, &spec) {
            // Rows run in parallel, so either offending cell may surface.
            Err(KernelError::AtCell { row, col, source }) => {
                assert!(matches!(*source, KernelError::ZeroVector { .. }));
                assert!(
                    (row == 0 && col == 1) || row == 1,
                    "unexpected cell ({row}, {col})"
                );
            }
            other => panic!("expected cell error, got {other:?}"),
        }
    }

    #[test]
    fn export_single_cell() {
        let v = SparseVector::new(2, vec![(1, 3.0)]).unwrap();
        let d = Dataset::new(2, vec![(2, v)]).unwrap();
        let spec = KernelSpec::new(KernelKind::MinMax, None).unwrap();
        let m = kernel_matrix(&d, &d, &spec).unwrap();
        assert_eq!(export_precomputed(&m), "2 0:1 1:1\n");
    }

    #[test]
    fn export_serials_count_rows() {
        let d = tiny_dataset();
        let spec = KernelSpec::new(KernelKind::MinMax, None).unwrap();
        let m = kernel_matrix(&d, &d, &spec).unwrap();
        let text = export_precomputed(&m);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        for (i, line) in lines.iter().enumerate() {
            let serial = format!("0:{}", i + 1);
            assert!(line.contains(&serial), "line {line} missing {serial}");
        }
    }

    #[test]
    fn export_roundtrip_values() {
        let d = Dataset::new(
            6,
            (0..5)
                .map(|r| {
                    let entries = vec![(r as u32 + 1, 1.0 + r as f64 * 0.3), (6, 0.7)];
                    (r, SparseVector::new(6, entries).unwrap())
                })
                .collect(),
        )
        .unwrap();
        let spec = KernelSpec::new(KernelKind::Rbf, Some(2.0)).unwrap();
        let m = kernel_matrix(&d, &d, &spec).unwrap();
        let text = export_precomputed(&m);
        for (i, line) in text.lines().enumerate() {
            let mut toks = line.split_whitespace();
            let label: i32 = toks.next().unwrap().parse().unwrap();
            assert_eq!(label, m.row_labels()[i]);
            for tok in toks {
                let (idx, val) = tok.split_once(':').unwrap();
                let idx: usize = idx.parse().unwrap();
                let val: f64 = val.parse().unwrap();
                if idx == 0 {
                    assert_eq!(val, (i + 1) as f64);
                } else {
                    assert!((val - m.get(i, idx - 1)).abs() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn gamma_grid_shape() {
        let g = gamma_grid();
        assert_eq!(g.len(), 58);
        assert_eq!(g[0], 0.001);
        assert_eq!(g[1], 0.01);
        assert_eq!(g[2], 0.1);
        assert_eq!(*g.last().unwrap(), 1000.0);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }

    fn arb_vec() -> impl Strategy<Value = SparseVector> {
        prop::collection::btree_map(1u32..=12, 0.01f64..10.0, 1..8)
            .prop_map(|m| SparseVector::new(12, m.into_iter().collect()).unwrap())
    }

    proptest! {
        #[test]
        fn symmetry_all_kernels(u in arb_vec(), v in arb_vec(), g in 0.1f64..10.0) {
            prop_assert_eq!(rho(&u, &v).unwrap(), rho(&v, &u).unwrap());
            prop_assert_eq!(acos_kernel(&u, &v).unwrap(), acos_kernel(&v, &u).unwrap());
            prop_assert_eq!(minmax(&u, &v).unwrap(), minmax(&v, &u).unwrap());
            prop_assert_eq!(rbf(&u, &v, g).unwrap(), rbf(&v, &u, g).unwrap());
            prop_assert_eq!(frbf(&u, &v, g).unwrap(), frbf(&v, &u, g).unwrap());
            prop_assert_eq!(mm_acos(&u, &v).unwrap(), mm_acos(&v, &u).unwrap());
            prop_assert_eq!(mm_acos_chi2(&u, &v).unwrap(), mm_acos_chi2(&v, &u).unwrap());
            prop_assert_eq!(mm_rbf(&u, &v, g).unwrap(), mm_rbf(&v, &u, g).unwrap());
            let lu = normalize(&u, NormMode::L1).unwrap();
            let lv = normalize(&v, NormMode::L1).unwrap();
            prop_assert_eq!(chi2(&lu, &lv).unwrap(), chi2(&lv, &lu).unwrap());
            prop_assert_eq!(acos_chi2(&lu, &lv).unwrap(), acos_chi2(&lv, &lu).unwrap());
        }

        #[test]
        fn ranges(u in arb_vec(), v in arb_vec(), g in 0.1f64..10.0) {
            for k in [
                rho(&u, &v).unwrap(),
                acos_kernel(&u, &v).unwrap(),
                minmax(&u, &v).unwrap(),
                mm_acos(&u, &v).unwrap(),
                mm_acos_chi2(&u, &v).unwrap(),
            ] {
                prop_assert!((0.0..=1.0).contains(&k));
            }
            let r = rbf(&u, &v, g).unwrap();
            let f = frbf(&u, &v, g).unwrap();
            prop_assert!(r > 0.0 && r <= 1.0);
            prop_assert!(f > 0.0 && f <= 1.0);
        }

        #[test]
        fn scale_invariance(u in arb_vec(), v in arb_vec(), c in 0.1f64..50.0, g in 0.1f64..10.0) {
            let cu = u.scaled(c);
            prop_assert!((rho(&cu, &v).unwrap() - rho(&u, &v).unwrap()).abs() < 1e-12);
            prop_assert!((acos_kernel(&cu, &v).unwrap() - acos_kernel(&u, &v).unwrap()).abs() < 1e-12);
            prop_assert!((rbf(&cu, &v, g).unwrap() - rbf(&u, &v, g).unwrap()).abs() < 1e-12);
            prop_assert!((frbf(&cu, &v, g).unwrap() - frbf(&u, &v, g).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn minmax_not_scale_invariant(u in arb_vec()) {
            let doubled = u.scaled(2.0);
            prop_assert!((minmax(&u, &doubled).unwrap() - 0.5).abs() < 1e-12);
        }

        #[test]
        fn rbf_family_monotone_in_rho(g in 0.1f64..10.0, t in 0.05f64..20.0) {
            // v_t = (1, t) against u = (1, 0): rho decreases as t grows, so
            // comparing t and 2t gives a strictly ordered pair of rho values.
            let u = sv(&[(1, 1.0)]);
            let near = sv(&[(1, 1.0), (2, t)]);
            let far = sv(&[(1, 1.0), (2, 2.0 * t)]);
            prop_assert!(rho(&near, &u).unwrap() > rho(&far, &u).unwrap());
            prop_assert!(rbf(&near, &u, g).unwrap() > rbf(&far, &u, g).unwrap());
            prop_assert!(frbf(&near, &u, g).unwrap() > frbf(&far, &u, g).unwrap());
        }
    }
}
