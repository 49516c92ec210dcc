//! Sparse vectors, labeled datasets, svmlight text I/O, and normalization.
//!
//! Input data is nonnegative: a [`SparseVector`] stores only strictly
//! positive values at strictly increasing 1-based indices. Zeros are never
//! stored (they are dropped on parse and on construction).

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("line {line}: negative value {value} at index {index}")]
    NegativeValue { line: usize, index: u32, value: f64 },
    #[error("line {line}: index {index} does not increase (previous index {prev})")]
    NonAscendingIndex { line: usize, index: u32, prev: u32 },
    #[error("empty input: no data rows")]
    EmptyInput,
    #[error("cannot infer dimension: no nonzero feature indices (use an explicit dimension)")]
    NoDimension,
    #[error("declared dimension {dim} is smaller than the largest index {max_index}")]
    DimTooSmall { dim: u32, max_index: u32 },
    #[error("dimension must be positive")]
    ZeroDim,
    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: u32, dim: u32 },
    #[error("indices must be strictly increasing ({index} follows {prev})")]
    UnsortedEntries { index: u32, prev: u32 },
    #[error("value at index {index} is not a finite nonnegative real: {value}")]
    BadValue { index: u32, value: f64 },
    #[error("zero vector cannot be normalized")]
    ZeroVector,
    #[error("dataset must contain at least one row")]
    EmptyDataset,
    #[error("row {row} has dimension {found}, dataset declares {expected}")]
    RowDimMismatch {
        row: usize,
        expected: u32,
        found: u32,
    },
}

/// Normalization applied to a vector before kernel evaluation or sketching.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NormMode {
    /// Rescale so the values sum to 1.
    L1,
    /// Rescale to unit Euclidean norm.
    L2,
    /// Leave the vector as is.
    #[default]
    None,
}

impl fmt::Display for NormMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NormMode::L1 => "l1",
            NormMode::L2 => "l2",
            NormMode::None => "none",
        })
    }
}

impl FromStr for NormMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "l1" => Ok(NormMode::L1),
            "l2" => Ok(NormMode::L2),
            "none" => Ok(NormMode::None),
            other => Err(format!(
                "unknown normalization `{other}` (expected l1, l2, or none)"
            )),
        }
    }
}

/// Sparse nonnegative vector over a declared ambient dimension.
///
/// Entries are `(index, value)` pairs with 1-based indices, strictly
/// increasing, and every stored value strictly positive.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseVector {
    dim: u32,
    entries: Vec<(u32, f64)>,
}

impl SparseVector {
    /// Build a vector, validating the entry invariants. Zero values are
    /// dropped; negative or non-finite values are rejected.
    pub fn new(dim: u32, entries: Vec<(u32, f64)>) -> Result<Self, DataError> {
        if dim == 0 {
            return Err(DataError::ZeroDim);
        }
        let mut prev = 0u32;
        for &(index, value) in &entries {
            if index == 0 || index > dim {
                return Err(DataError::IndexOutOfRange { index, dim });
            }
            if index <= prev {
                return Err(DataError::UnsortedEntries { index, prev });
            }
            prev = index;
            if !value.is_finite() || value < 0.0 {
                return Err(DataError::BadValue { index, value });
            }
        }
        let mut entries = entries;
        entries.retain(|&(_, v)| v != 0.0);
        Ok(Self { dim, entries })
    }

    /// Entries already validated by the caller (parser internals).
    pub(crate) fn from_sorted_unchecked(dim: u32, entries: Vec<(u32, f64)>) -> Self {
        Self { dim, entries }
    }

    pub fn dim(&self) -> u32 {
        self.dim
    }

    /// `(index, value)` pairs, ascending by index, values > 0.
    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn l1_norm(&self) -> f64 {
        self.entries.iter().map(|&(_, v)| v).sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.entries.iter().map(|&(_, v)| v * v).sum::<f64>().sqrt()
    }

    /// Multiply every stored value by `c > 0`.
    pub fn scaled(&self, c: f64) -> SparseVector {
        SparseVector {
            dim: self.dim,
            entries: self.entries.iter().map(|&(i, v)| (i, v * c)).collect(),
        }
    }
}

/// Rescale a vector per `mode`. The support never changes.
pub fn normalize(v: &SparseVector, mode: NormMode) -> Result<SparseVector, DataError> {
    let norm = match mode {
        NormMode::None => return Ok(v.clone()),
        NormMode::L1 => v.l1_norm(),
        NormMode::L2 => v.l2_norm(),
    };
    if norm == 0.0 {
        return Err(DataError::ZeroVector);
    }
    Ok(v.scaled(1.0 / norm))
}

/// Labeled collection of sparse vectors sharing one ambient dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    dim: u32,
    rows: Vec<(i32, SparseVector)>,
}

impl Dataset {
    pub fn new(dim: u32, rows: Vec<(i32, SparseVector)>) -> Result<Self, DataError> {
        if dim == 0 {
            return Err(DataError::ZeroDim);
        }
        if rows.is_empty() {
            return Err(DataError::EmptyDataset);
        }
        for (row, (_, v)) in rows.iter().enumerate() {
            if v.dim() != dim {
                return Err(DataError::RowDimMismatch {
                    row,
                    expected: dim,
                    found: v.dim(),
                });
            }
        }
        Ok(Self { dim, rows })
    }

    pub fn dim(&self) -> u32 {
        self.dim
    }

    pub fn rows(&self) -> &[(i32, SparseVector)] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Apply `mode` to every row.
    pub fn normalized(&self, mode: NormMode) -> Result<Dataset, DataError> {
        let rows = self
            .rows
            .iter()
            .map(|(label, v)| normalize(v, mode).map(|nv| (*label, nv)))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Dataset {
            dim: self.dim,
            rows,
        })
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ParseOptions {
    /// Use this ambient dimension instead of the largest index seen. Lets
    /// train and test files share one dimension.
    pub dim_override: Option<u32>,
}

/// Parse svmlight text: one `<label> <idx>:<val> ...` row per line,
/// ascending 1-based indices, `#` starts a comment, blank lines skipped.
pub fn parse_svmlight(text: &str) -> Result<Dataset, DataError> {
    parse_svmlight_with(text, &ParseOptions::default())
}

pub fn parse_svmlight_with(text: &str, opts: &ParseOptions) -> Result<Dataset, DataError> {
    let mut rows: Vec<(i32, Vec<(u32, f64)>)> = Vec::new();
    let mut max_index = 0u32;

    for (line_idx, raw) in text.lines().enumerate() {
        let line = line_idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut tokens = content.split_whitespace();
        let label_tok = tokens.next().unwrap();
        let label: i32 = label_tok.parse().map_err(|_| DataError::Malformed {
            line,
            msg: format!("invalid label `{label_tok}`"),
        })?;

        let mut entries: Vec<(u32, f64)> = Vec::new();
        let mut prev = 0u32;
        for tok in tokens {
            let (idx_s, val_s) = tok.split_once(':').ok_or_else(|| DataError::Malformed {
                line,
                msg: format!("expected `index:value`, got `{tok}`"),
            })?;
            let index: u32 = idx_s.parse().map_err(|_| DataError::Malformed {
                line,
                msg: format!("invalid index `{idx_s}`"),
            })?;
            if index == 0 {
                return Err(DataError::Malformed {
                    line,
                    msg: "indices are 1-based".into(),
                });
            }
            let value: f64 = val_s.parse().map_err(|_| DataError::Malformed {
                line,
                msg: format!("invalid value `{val_s}`"),
            })?;
            if !value.is_finite() {
                return Err(DataError::Malformed {
                    line,
                    msg: format!("non-finite value `{val_s}`"),
                });
            }
            if value < 0.0 {
                return Err(DataError::NegativeValue { line, index, value });
            }
            if index <= prev {
                return Err(DataError::NonAscendingIndex { line, index, prev });
            }
            prev = index;
            max_index = max_index.max(index);
            if value != 0.0 {
                entries.push((index, value));
            }
        }
        rows.push((label, entries));
    }

    if rows.is_empty() {
        return Err(DataError::EmptyInput);
    }
    let dim = match opts.dim_override {
        Some(d) => {
            if d == 0 {
                return Err(DataError::ZeroDim);
            }
            if d < max_index {
                return Err(DataError::DimTooSmall { dim: d, max_index });
            }
            d
        }
        None => {
            if max_index == 0 {
                return Err(DataError::NoDimension);
            }
            max_index
        }
    };
    let rows = rows
        .into_iter()
        .map(|(label, entries)| (label, SparseVector::from_sorted_unchecked(dim, entries)))
        .collect();
    Dataset::new(dim, rows)
}

/// Format `v` with at most `digits` significant digits, shortest form.
pub(crate) fn fmt_sig(v: f64, digits: usize) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    let rounded: f64 = format!("{:.*e}", digits.saturating_sub(1), v)
        .parse()
        .unwrap();
    format!("{rounded}")
}

/// Emit svmlight text with LF line endings. `parse_svmlight` recovers the
/// dataset up to `sig_digits` of value precision (default call sites use 9).
pub fn write_svmlight(d: &Dataset, sig_digits: usize) -> String {
    let mut out = String::new();
    for (label, v) in d.rows() {
        out.push_str(&label.to_string());
        for &(i, val) in v.entries() {
            out.push(' ');
            out.push_str(&i.to_string());
            out.push(':');
            out.push_str(&fmt_sig(val, sig_digits));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::randstream::{uniform01, StreamKey};
    use proptest::prelude::*;

    #[test]
    fn parse_basic_line() {
        let d = parse_svmlight("1 1:0.5 3:2.0").unwrap();
        assert_eq!(d.dim(), 3);
        assert_eq!(d.len(), 1);
        assert_eq!(d.rows()[0].0, 1);
        assert_eq!(d.rows()[0].1.entries(), &[(1, 0.5), (3, 2.0)]);
    }

    #[test]
    fn parse_two_rows() {
        let d = parse_svmlight("0 2:1\n1 1:1").unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.dim(), 2);
    }

    #[test]
    fn parse_rejects_negative_value() {
        match parse_svmlight("1 1:-3") {
            Err(DataError::NegativeValue {
                line: 1, index: 1, ..
            }) => {}
            other => panic!("expected negative-value error, got {other:?}"),
        }
    }

    #[test]
    fn parse_rejects_non_ascending_index() {
        match parse_svmlight("1 2:1 2:1") {
            Err(DataError::NonAscendingIndex {
                line: 1,
                index: 2,
                prev: 2,
            }) => {}
            other => panic!("expected non-ascending error, got {other:?}"),
        }
    }

    #[test]
    fn parse_rejects_empty_input() {
        assert!(matches!(parse_svmlight(""), Err(DataError::EmptyInput)));
        assert!(matches!(
            parse_svmlight("# only a comment\n\n"),
            Err(DataError::EmptyInput)
        ));
    }

    #[test]
    fn parse_reports_line_numbers() {
        match parse_svmlight("1 1:1\n2 nonsense") {
            Err(DataError::Malformed { line: 2, .. }) => {}
            other => panic!("expected malformed line 2, got {other:?}"),
        }
    }

    #[test]
    fn parse_drops_explicit_zeros() {
        let d = parse_svmlight("1 1:0 2:3").unwrap();
        assert_eq!(d.rows()[0].1.entries(), &[(2, 3.0)]);
        // The zero still counts toward the inferred dimension.
        assert_eq!(d.dim(), 2);
    }

    #[test]
    fn parse_handles_comments_and_crlf() {
        let d = parse_svmlight("# header\r\n1 1:1 # trailing\r\n\r\n2 2:1\r\n").unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.dim(), 2);
    }

    #[test]
    fn dim_override() {
        let opts = ParseOptions {
            dim_override: Some(10),
        };
        let d = parse_svmlight_with("1 1:1", &opts).unwrap();
        assert_eq!(d.dim(), 10);
        let too_small = ParseOptions {
            dim_override: Some(2),
        };
        assert!(matches!(
            parse_svmlight_with("1 3:1", &too_small),
            Err(DataError::DimTooSmall {
                dim: 2,
                max_index: 3
            })
        ));
    }

    #[test]
    fn write_basic() {
        let d = Dataset::new(3, vec![(1, SparseVector::new(3, vec![(1, 0.5)]).unwrap())]).unwrap();
        assert_eq!(write_svmlight(&d, 9), "1 1:0.5\n");
    }

    #[test]
    fn write_empty_row_is_label_only() {
        let d = Dataset::new(3, vec![(4, SparseVector::new(3, vec![]).unwrap())]).unwrap();
        assert_eq!(write_svmlight(&d, 9), "4\n");
    }

    fn random_dataset(seed: u64, rows: usize, dim: u32) -> Dataset {
        let mut out = Vec::new();
        for r in 0..rows {
            let mut entries = Vec::new();
            for i in 1..=dim {
                let u = uniform01(StreamKey::new(seed, r as u64, i as u64, 90));
                if u < 0.4 {
                    entries.push((i, u * 10.0));
                }
            }
            out.push((r as i32 % 3, SparseVector::new(dim, entries).unwrap()));
        }
        Dataset::new(dim, out).unwrap()
    }

    #[test]
    fn roundtrip_random_dataset() {
        let d = random_dataset(11, 100, 25);
        let text = write_svmlight(&d, 9);
        let opts = ParseOptions {
            dim_override: Some(25),
        };
        let back = parse_svmlight_with(&text, &opts).unwrap();
        assert_eq!(back.len(), d.len());
        for ((la, va), (lb, vb)) in d.rows().iter().zip(back.rows()) {
            assert_eq!(la, lb);
            assert_eq!(va.entries().len(), vb.entries().len());
            for (&(ia, xa), &(ib, xb)) in va.entries().iter().zip(vb.entries()) {
                assert_eq!(ia, ib);
                assert!((xa - xb).abs() <= 1e-8 * xa.abs().max(1.0));
            }
        }
    }

    #[test]
    fn normalize_l2_345_triangle() {
        let v = SparseVector::new(2, vec![(1, 3.0), (2, 4.0)]).unwrap();
        let n = normalize(&v, NormMode::L2).unwrap();
        assert!((n.entries()[0].1 - 0.6).abs() < 1e-15);
        assert!((n.entries()[1].1 - 0.8).abs() < 1e-15);
    }

    #[test]
    fn normalize_l1_halves() {
        let v = SparseVector::new(2, vec![(1, 1.0), (2, 1.0)]).unwrap();
        let n = normalize(&v, NormMode::L1).unwrap();
        assert_eq!(n.entries(), &[(1, 0.5), (2, 0.5)]);
    }

    #[test]
    fn normalize_zero_vector_errors() {
        let v = SparseVector::new(2, vec![]).unwrap();
        assert!(matches!(
            normalize(&v, NormMode::L2),
            Err(DataError::ZeroVector)
        ));
        assert!(matches!(
            normalize(&v, NormMode::L1),
            Err(DataError::ZeroVector)
        ));
        assert!(normalize(&v, NormMode::None).is_ok());
    }

    #[test]
    fn vector_invariants_enforced() {
        assert!(SparseVector::new(0, vec![]).is_err());
        assert!(SparseVector::new(3, vec![(4, 1.0)]).is_err());
        assert!(SparseVector::new(3, vec![(2, 1.0), (1, 1.0)]).is_err());
        assert!(SparseVector::new(3, vec![(1, -1.0)]).is_err());
        assert!(SparseVector::new(3, vec![(1, f64::NAN)]).is_err());
        // Zeros are dropped, not stored.
        let v = SparseVector::new(3, vec![(1, 0.0), (2, 2.0)]).unwrap();
        assert_eq!(v.entries(), &[(2, 2.0)]);
    }

    fn arb_vector() -> impl Strategy<Value = SparseVector> {
        prop::collection::btree_map(1u32..=20, 0.001f64..100.0, 1..10)
            .prop_map(|m| SparseVector::new(20, m.into_iter().collect()).unwrap())
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent(v in arb_vector(), mode in prop_oneof![Just(NormMode::L1), Just(NormMode::L2)]) {
            let once = normalize(&v, mode).unwrap();
            let twice = normalize(&once, mode).unwrap();
            for (&(ia, xa), &(ib, xb)) in once.entries().iter().zip(twice.entries()) {
                prop_assert_eq!(ia, ib);
                prop_assert!((xa - xb).abs() < 1e-12);
            }
        }

        #[test]
        fn normalize_preserves_support(v in arb_vector(), mode in prop_oneof![Just(NormMode::L1), Just(NormMode::L2), Just(NormMode::None)]) {
            let n = normalize(&v, mode).unwrap();
            let a: Vec<u32> = v.entries().iter().map(|&(i, _)| i).collect();
            let b: Vec<u32> = n.entries().iter().map(|&(i, _)| i).collect();
            prop_assert_eq!(a, b);
            prop_assert!(n.entries().iter().all(|&(_, x)| x > 0.0));
        }

        #[test]
        fn parse_write_roundtrip(rows in prop::collection::vec((0i32..5, prop::collection::btree_map(1u32..=15, 0.001f64..50.0, 0..8)), 1..20)) {
            let rows: Vec<(i32, SparseVector)> = rows
                .into_iter()
                .map(|(l, m)| (l, SparseVector::new(15, m.into_iter().collect()).unwrap()))
                .collect();
            let d = Dataset::new(15, rows).unwrap();
            let text = write_svmlight(&d, 12);
            let back = parse_svmlight_with(&text, &ParseOptions { dim_override: Some(15) }).unwrap();
            prop_assert_eq!(back.len(), d.len());
            for ((la, va), (lb, vb)) in d.rows().iter().zip(back.rows()) {
                prop_assert_eq!(la, lb);
                prop_assert_eq!(va.nnz(), vb.nnz());
                for (&(ia, xa), &(ib, xb)) in va.entries().iter().zip(vb.entries()) {
                    prop_assert_eq!(ia, ib);
                    prop_assert!((xa - xb).abs() <= 1e-9 * xa.abs().max(1.0));
                }
            }
        }
    }
}
