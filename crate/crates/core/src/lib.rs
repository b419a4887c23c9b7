//! Binary orthogonal non-negative matrix factorization (BONMF) and the
//! baselines it is evaluated against.
//!
//! The data matrix `X` is `m × n` with samples as columns. BONMF finds a
//! non-negative basis `W` (`m × k`) and a binary `H` (`k × n`) with exactly
//! one `1` per column, so the rows of `H` are orthogonal and `H` fits in `n`
//! cluster indices. New samples are classified with `k` cosine similarities
//! against the columns of `W`.
//!
//! Column-wise kernels run on rayon when the `parallel` feature is enabled
//! (the default); [`Execution`] selects the mode per call.

// NaN-aware `!(a > b)` checks are deliberate.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bonmf;
pub mod classify;
pub mod data;
pub mod error;
mod exec;
pub mod experiment;
pub mod matrix;
pub mod nmf;
pub mod onmf;
pub mod semi_binary;

pub use bonmf::{factorize_bonmf, init_h, init_w, update_h_cosine, BonmfModel};
pub use classify::{accuracy, build_label_map, classify_bonmf, ClusterLabelMap, Prediction};
pub use data::{load_dataset, train_test_split, DatasetSpec, LabeledDataset};
pub use error::{Error, Result};
pub use exec::Execution;
pub use experiment::{
    emit_report, run_experiment, synth_dataset, ExperimentConfig, Method, TrialReport,
};
pub use matrix::{
    cosine_similarity, frobenius_objective, BasisMatrix, BinaryAssignment, DataMatrix,
    DenseCoefficients, Matrix,
};
pub use nmf::{
    factorize_nmf, update_h_dense, update_w, FactorizationTrace, FactorizeOptions, NmfModel,
};
pub use onmf::{encode_sample, factorize_onmf, OnmfModel};
pub use semi_binary::{factorize_zhang, sgn, update_h_row, SemiBinaryModel};
