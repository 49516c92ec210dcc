//! Nonlinear kernels for sparse nonnegative data and the randomized
//! feature maps that linearize them.
//!
//! * [`data`] — sparse vectors, labeled datasets, svmlight text I/O,
//!   normalization.
//! * [`kernels`] — exact kernel evaluation (correlation, acos,
//!   chi-squared, acos-chi-squared, min-max, RBF, folded RBF, and the
//!   min-max product kernels) plus precomputed kernel-matrix export.
//! * [`randstream`] — deterministic counter-keyed random variates shared
//!   by every feature map.
//! * [`sketch`] — the feature maps: sign projections, Fourier features,
//!   consistent weighted sampling with 0-bit encoding, and the combined
//!   min-max encodings. Every map emits exactly k nonzeros per row.
//! * [`estimate`] — inner-product kernel estimators, a convergence
//!   harness, and a Monte Carlo oracle for the folded-RBF identity.
//! * [`trainer`] — dual coordinate descent linear SVM with one-vs-rest
//!   multiclass and a C sweep.

pub mod data;
pub mod estimate;
pub mod kernels;
pub mod randstream;
pub mod sketch;
pub mod trainer;

pub use data::{Dataset, NormMode, SparseVector};
pub use kernels::{KernelKind, KernelMatrix, KernelSpec};
pub use sketch::{EncodedDataset, EncodedVector, SketchMethod, SketchPlan};
pub use trainer::{SvmModel, TrainConfig};
