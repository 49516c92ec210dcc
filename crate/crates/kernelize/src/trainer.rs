//! l2-regularized linear SVM with hinge loss, trained by dual coordinate
//! descent, plus one-vs-rest multiclass and a C sweep.
//!
//! The binary objective is min_w  |w|^2 / 2 + C sum_i max(0, 1 - y_i w.x_i),
//! solved in the dual: maximize sum_i a_i - |w|^2 / 2 over a_i in [0, C]
//! with w = sum_i a_i y_i x_i, one coordinate at a time in a seeded random
//! permutation per sweep. There is no bias term: one-hot encoded features
//! sum to k per row, which absorbs the intercept.

use rayon::prelude::*;
use thiserror::Error;

use crate::randstream::{uniform01, StreamKey};
use crate::sketch::{EncodedDataset, EncodedVector};

const SLOT_SHUFFLE: u32 = 8;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("training data is empty")]
    Empty,
    #[error("rows and labels differ in length ({rows} vs {labels})")]
    LengthMismatch { rows: usize, labels: usize },
    #[error("binary labels must be -1 or +1, got {0}")]
    BadBinaryLabel(i32),
    #[error("training data contains a single class")]
    SingleClass,
    #[error("row {row} has dimension {found}, expected {expected}")]
    DimMismatch {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("config: {0}")]
    BadConfig(String),
    #[error("model file: {0}")]
    BadModel(String),
}

/// Solver settings.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub c: f64,
    pub max_outer_iters: usize,
    pub tolerance: f64,
    pub shuffle_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            c: 1.0,
            max_outer_iters: 200,
            tolerance: 1e-4,
            shuffle_seed: 0,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<(), TrainError> {
        if !(self.c.is_finite() && self.c > 0.0) {
            return Err(TrainError::BadConfig(format!(
                "C must be positive, got {}",
                self.c
            )));
        }
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(TrainError::BadConfig("tolerance must be positive".into()));
        }
        if self.max_outer_iters == 0 {
            return Err(TrainError::BadConfig(
                "max_outer_iters must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

fn check_rows(rows: &[EncodedVector]) -> Result<usize, TrainError> {
    let dim = rows.first().ok_or(TrainError::Empty)?.total_dim();
    for (row, r) in rows.iter().enumerate() {
        if r.total_dim() != dim {
            return Err(TrainError::DimMismatch {
                row,
                expected: dim,
                found: r.total_dim(),
            });
        }
    }
    Ok(dim)
}

/// Train a binary SVM; labels must be -1/+1 with both classes present.
pub fn train_binary(
    rows: &[EncodedVector],
    labels: &[i32],
    cfg: &TrainConfig,
) -> Result<Vec<f64>, TrainError> {
    train_binary_traced(rows, labels, cfg).map(|(w, _)| w)
}

/// As [`train_binary`], also returning the dual objective after each sweep
/// (non-decreasing: every coordinate step is an exact maximization).
pub fn train_binary_traced(
    rows: &[EncodedVector],
    labels: &[i32],
    cfg: &TrainConfig,
) -> Result<(Vec<f64>, Vec<f64>), TrainError> {
    cfg.validate()?;
    if rows.len() != labels.len() {
        return Err(TrainError::LengthMismatch {
            rows: rows.len(),
            labels: labels.len(),
        });
    }
    let dim = check_rows(rows)?;
    for &l in labels {
        if l != -1 && l != 1 {
            return Err(TrainError::BadBinaryLabel(l));
        }
    }
    if labels.iter().all(|&l| l == labels[0]) {
        return Err(TrainError::SingleClass);
    }

    let n = rows.len();
    let y: Vec<f64> = labels.iter().map(|&l| l as f64).collect();
    let q_diag: Vec<f64> = rows.iter().map(|r| r.squared_norm()).collect();

    let mut w = vec![0.0f64; dim];
    let mut alpha = vec![0.0f64; n];
    let mut order: Vec<usize> = (0..n).collect();
    let mut objective_trace = Vec::new();

    for sweep in 0..cfg.max_outer_iters {
        // Seeded Fisher-Yates permutation for this sweep.
        for p in 0..n.saturating_sub(1) {
            let u = uniform01(StreamKey::new(
                cfg.shuffle_seed,
                sweep as u64,
                p as u64,
                SLOT_SHUFFLE,
            ));
            let j = p + (u * (n - p) as f64) as usize;
            order.swap(p, j.min(n - 1));
        }

        let mut max_violation = 0.0f64;
        for &i in &order {
            let xi = &rows[i];
            let score: f64 = xi.entries().iter().map(|&(idx, v)| w[idx] * v).sum();
            let g = y[i] * score - 1.0;

            // Projected gradient for the box constraint [0, C].
            let pg = if alpha[i] <= 0.0 {
                g.min(0.0)
            } else if alpha[i] >= cfg.c {
                g.max(0.0)
            } else {
                g
            };
            max_violation = max_violation.max(pg.abs());
            if pg.abs() <= 1e-12 {
                continue;
            }

            let old = alpha[i];
            let new = if q_diag[i] > 0.0 {
                (old - g / q_diag[i]).clamp(0.0, cfg.c)
            } else {
                // Zero row: the dual term is linear in alpha_i with slope
                // +1, so push to the upper bound; w is unaffected.
                cfg.c
            };
            let delta = (new - old) * y[i];
            if delta != 0.0 {
                alpha[i] = new;
                for &(idx, v) in xi.entries() {
                    w[idx] += delta * v;
                }
            }
        }

        let w_sq: f64 = w.iter().map(|x| x * x).sum();
        objective_trace.push(alpha.iter().sum::<f64>() - 0.5 * w_sq);

        if max_violation < cfg.tolerance {
            break;
        }
    }

    Ok((w, objective_trace))
}

/// One-vs-rest multiclass model: one weight vector per class id.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    class_ids: Vec<i32>,
    weights: Vec<Vec<f64>>,
    c: f64,
    dim: usize,
}

impl SvmModel {
    pub fn class_ids(&self) -> &[i32] {
        &self.class_ids
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn score(&self, class: usize, x: &EncodedVector) -> f64 {
        let w = &self.weights[class];
        x.entries().iter().map(|&(idx, v)| w[idx] * v).sum()
    }

    /// Predict one row: argmax over class scores, ties to the lowest
    /// class id (class ids are stored ascending).
    pub fn predict_one(&self, x: &EncodedVector) -> Result<i32, TrainError> {
        if x.total_dim() > self.dim {
            return Err(TrainError::DimMismatch {
                row: 0,
                expected: self.dim,
                found: x.total_dim(),
            });
        }
        let mut best = 0;
        let mut best_score = self.score(0, x);
        for c in 1..self.class_ids.len() {
            let s = self.score(c, x);
            if s > best_score {
                best = c;
                best_score = s;
            }
        }
        Ok(self.class_ids[best])
    }

    /// Text serialization: one header line with class ids, dimension, and
    /// C, then one weight row per class at 9 significant digits.
    pub fn to_text(&self) -> String {
        let ids: Vec<String> = self.class_ids.iter().map(|c| c.to_string()).collect();
        let mut out = format!(
            "svm classes={} dim={} c={}\n",
            ids.join(","),
            self.dim,
            crate::data::fmt_sig(self.c, 9)
        );
        for w in &self.weights {
            let mut first = true;
            for &x in w {
                if !first {
                    out.push(' ');
                }
                out.push_str(&crate::data::fmt_sig(x, 9));
                first = false;
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, TrainError> {
        let bad = |msg: &str| TrainError::BadModel(msg.to_string());
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| bad("empty file"))?;
        let mut tokens = header.split_whitespace();
        if tokens.next() != Some("svm") {
            return Err(bad("missing `svm` header"));
        }
        let mut class_ids: Option<Vec<i32>> = None;
        let mut dim: Option<usize> = None;
        let mut c: Option<f64> = None;
        for tok in tokens {
            let (key, value) = tok.split_once('=').ok_or_else(|| bad("bad header token"))?;
            match key {
                "classes" => {
                    class_ids = Some(
                        value
                            .split(',')
                            .map(|s| s.parse::<i32>())
                            .collect::<Result<Vec<_>, _>>()
                            .map_err(|_| bad("bad class list"))?,
                    );
                }
                "dim" => dim = Some(value.parse().map_err(|_| bad("bad dim"))?),
                "c" => c = Some(value.parse().map_err(|_| bad("bad c"))?),
                _ => return Err(bad("unknown header key")),
            }
        }
        let class_ids = class_ids.ok_or_else(|| bad("header missing classes"))?;
        let dim = dim.ok_or_else(|| bad("header missing dim"))?;
        let c = c.ok_or_else(|| bad("header missing c"))?;
        if class_ids.is_empty() || class_ids.windows(2).any(|w| w[0] >= w[1]) {
            return Err(bad("class ids must be ascending and nonempty"));
        }

        let mut weights = Vec::with_capacity(class_ids.len());
        for _ in 0..class_ids.len() {
            let line = lines.next().ok_or_else(|| bad("missing weight row"))?;
            let row: Vec<f64> = line
                .split_whitespace()
                .map(|s| s.parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| bad("bad weight value"))?;
            if row.len() != dim {
                return Err(bad("weight row length does not match dim"));
            }
            if row.iter().any(|x| !x.is_finite()) {
                return Err(bad("non-finite weight"));
            }
            weights.push(row);
        }
        Ok(Self {
            class_ids,
            weights,
            c,
            dim,
        })
    }
}

/// Train one-vs-rest over all classes in the dataset (at least two).
/// Binary subproblems are independent and train in parallel.
pub fn train_multiclass(d: &EncodedDataset, cfg: &TrainConfig) -> Result<SvmModel, TrainError> {
    cfg.validate()?;
    if d.is_empty() {
        return Err(TrainError::Empty);
    }
    let mut class_ids: Vec<i32> = d.labels();
    class_ids.sort_unstable();
    class_ids.dedup();
    if class_ids.len() < 2 {
        return Err(TrainError::SingleClass);
    }
    let rows: Vec<EncodedVector> = d.rows().iter().map(|(_, v)| v.clone()).collect();

    let weights: Vec<Vec<f64>> = class_ids
        .par_iter()
        .map(|&class| {
            let labels: Vec<i32> = d
                .rows()
                .iter()
                .map(|(l, _)| if *l == class { 1 } else { -1 })
                .collect();
            train_binary(&rows, &labels, cfg)
        })
        .collect::<Result<_, _>>()?;

    Ok(SvmModel {
        class_ids,
        weights,
        c: cfg.c,
        dim: d.dim(),
    })
}

/// Predict labels for every row.
pub fn predict(model: &SvmModel, rows: &[EncodedVector]) -> Result<Vec<i32>, TrainError> {
    if rows.is_empty() {
        return Err(TrainError::Empty);
    }
    rows.iter().map(|x| model.predict_one(x)).collect()
}

/// Fraction of positions where prediction equals truth.
pub fn accuracy(pred: &[i32], truth: &[i32]) -> Result<f64, TrainError> {
    if pred.is_empty() || truth.is_empty() {
        return Err(TrainError::Empty);
    }
    if pred.len() != truth.len() {
        return Err(TrainError::LengthMismatch {
            rows: pred.len(),
            labels: truth.len(),
        });
    }
    let hits = pred.iter().zip(truth).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / pred.len() as f64)
}

/// Result of a C sweep: every (C, accuracy) pair plus the best index.
#[derive(Debug, Clone, PartialEq)]
pub struct CSweep {
    pub results: Vec<(f64, f64)>,
    pub best_index: usize,
}

impl CSweep {
    pub fn best(&self) -> (f64, f64) {
        self.results[self.best_index]
    }
}

/// Train at every C in the grid and score on the test set. Each C trains
/// independently; the best is the highest accuracy (first on ties).
pub fn c_sweep(
    train: &EncodedDataset,
    test: &EncodedDataset,
    c_grid: &[f64],
    cfg: &TrainConfig,
) -> Result<CSweep, TrainError> {
    if c_grid.is_empty() {
        return Err(TrainError::BadConfig("C grid is empty".into()));
    }
    let test_rows: Vec<EncodedVector> = test.rows().iter().map(|(_, v)| v.clone()).collect();
    let truth = test.labels();
    let mut results = Vec::with_capacity(c_grid.len());
    for &c in c_grid {
        let run_cfg = TrainConfig { c, ..cfg.clone() };
        let model = train_multiclass(train, &run_cfg)?;
        let acc = accuracy(&predict(&model, &test_rows)?, &truth)?;
        results.push((c, acc));
    }
    let best_index = results
        .iter()
        .enumerate()
        .max_by(|(ia, (_, a)), (ib, (_, b))| a.partial_cmp(b).unwrap().then(ib.cmp(ia)))
        .map(|(i, _)| i)
        .unwrap();
    Ok(CSweep {
        results,
        best_index,
    })
}

/// Powers of 10 from 1e-2 to 1e3.
pub fn default_c_grid() -> Vec<f64> {
    vec![0.01, 0.1, 1.0, 10.0, 100.0, 1000.0]
}
