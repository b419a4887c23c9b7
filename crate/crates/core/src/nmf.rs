//! Lee–Seung multiplicative-update NMF.
//!
//! `update_w` is shared with the binary factorizers: for a one-hot `H` the
//! products `XHᵀ` and `HHᵀ` reduce to per-cluster column sums and cluster
//! sizes, so the update runs in `O(mn)` without expanding `H`.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::bonmf::{init_w, initial_dense_coefficients};
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::matrix::{
    check_shapes, frobenius_objective_with, BasisMatrix, BinaryAssignment, Coefficients,
    DataMatrix, DenseCoefficients, Matrix,
};

pub const DEFAULT_MAX_ITERATIONS: usize = 200;
pub const DEFAULT_TOLERANCE: f64 = 1e-4;
pub const DEFAULT_EPSILON_GUARD: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FactorizeOptions {
    pub max_iterations: usize,
    /// Relative objective change below which iteration stops.
    pub tolerance: f64,
    pub seed: u64,
    /// Added to every multiplicative-update denominator.
    pub epsilon_guard: f64,
    #[serde(default)]
    pub execution: Execution,
}

impl Default for FactorizeOptions {
    fn default() -> Self {
        FactorizeOptions {
            max_iterations: DEFAULT_MAX_ITERATIONS,
            tolerance: DEFAULT_TOLERANCE,
            seed: 0,
            epsilon_guard: DEFAULT_EPSILON_GUARD,
            execution: Execution::default(),
        }
    }
}

impl FactorizeOptions {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_max_iterations(mut self, max_iterations: usize) -> Self {
        self.max_iterations = max_iterations;
        self
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::InvalidArgument("max_iterations must be >= 1".into()));
        }
        if !(self.tolerance >= 0.0) {
            return Err(Error::InvalidArgument("tolerance must be >= 0".into()));
        }
        if !(self.epsilon_guard > 0.0) {
            return Err(Error::InvalidArgument("epsilon_guard must be > 0".into()));
        }
        Ok(())
    }

    pub(crate) fn relative_change(&self, previous: f64, current: f64) -> f64 {
        (current - previous).abs() / previous.max(self.epsilon_guard)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FactorizationTrace {
    /// Objective `½‖X − WH‖²` after each full iteration.
    pub objective_per_iteration: Vec<f64>,
    pub iterations_run: usize,
    /// Seconds spent inside the factorization call.
    pub wall_time_train: f64,
    /// The normal-equations initialization was singular and the cosine
    /// assignment was used instead.
    #[serde(default)]
    pub init_fallback: bool,
    /// Zero-norm samples seen by the last cosine assignment (BONMF only).
    #[serde(default)]
    pub zero_norm_samples: usize,
}

impl FactorizationTrace {
    pub(crate) fn push(&mut self, objective: f64) {
        self.objective_per_iteration.push(objective);
        self.iterations_run += 1;
    }

    pub fn final_objective(&self) -> Option<f64> {
        self.objective_per_iteration.last().copied()
    }
}

/// Result of [`factorize_nmf`].
#[derive(Debug, Clone)]
pub struct NmfModel {
    pub basis: BasisMatrix,
    pub coefficients: DenseCoefficients,
    pub trace: FactorizationTrace,
}

pub(crate) fn check_rank(x: &Matrix, k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidArgument("rank k must be >= 1".into()));
    }
    if k > x.rows().min(x.cols()) {
        log::warn!(
            "rank {k} exceeds min(m, n) = {}; proceeding anyway",
            x.rows().min(x.cols())
        );
    }
    Ok(())
}

/// `W ← W ⊙ (XHᵀ) / (WHHᵀ + ε)`.
pub fn update_w<'a>(
    x: &Matrix,
    w: &BasisMatrix,
    h: impl Into<Coefficients<'a>>,
) -> Result<BasisMatrix> {
    update_w_with(x, w, h, DEFAULT_EPSILON_GUARD, Execution::default())
}

pub fn update_w_with<'a>(
    x: &Matrix,
    w: &BasisMatrix,
    h: impl Into<Coefficients<'a>>,
    epsilon_guard: f64,
    exec: Execution,
) -> Result<BasisMatrix> {
    let h = h.into();
    check_shapes("update_w", x, w, h)?;
    let updated = match h {
        Coefficients::Binary(a) => update_w_binary(x, w, a, epsilon_guard),
        Coefficients::Dense(hd) => {
            let xht = x.matmul_tr(hd, exec)?;
            let whht = w.matmul(&hd.outer_gram(), exec)?;
            let data = w
                .as_slice()
                .iter()
                .zip(xht.as_slice())
                .zip(whht.as_slice())
                .map(|((&wv, &num), &den)| wv * num / (den + epsilon_guard))
                .collect();
            Matrix::from_col_major(w.rows(), w.cols(), data)?
        }
    };
    Ok(BasisMatrix::new_unchecked(updated))
}

fn update_w_binary(x: &Matrix, w: &BasisMatrix, a: &BinaryAssignment, eps: f64) -> Matrix {
    let m = x.rows();
    // XHᵀ: column c is the sum of the samples assigned to cluster c.
    let mut sums = Matrix::zeros(m, a.k());
    for (j, &c) in a.clusters().iter().enumerate() {
        for (s, v) in sums.col_mut(c).iter_mut().zip(x.col(j)) {
            *s += v;
        }
    }
    // HHᵀ = diag(cluster sizes), so (WHHᵀ)_ic = W_ic · |c|.
    let sizes = a.cluster_sizes();
    let mut out = sums;
    for (c, &size) in sizes.iter().enumerate() {
        let size = size as f64;
        for (o, &wv) in out.col_mut(c).iter_mut().zip(w.col(c)) {
            *o = wv * *o / (wv * size + eps);
        }
    }
    out
}

/// `H ← H ⊙ (WᵀX) / (WᵀWH + ε)`.
pub fn update_h_dense(
    x: &Matrix,
    w: &BasisMatrix,
    h: &DenseCoefficients,
) -> Result<DenseCoefficients> {
    update_h_dense_with(x, w, h, DEFAULT_EPSILON_GUARD, Execution::default())
}

pub fn update_h_dense_with(
    x: &Matrix,
    w: &BasisMatrix,
    h: &DenseCoefficients,
    epsilon_guard: f64,
    exec: Execution,
) -> Result<DenseCoefficients> {
    check_shapes("update_h_dense", x, w, h.into())?;
    let k = w.rank();
    let gram = w.gram();
    let mut out = h.matrix().clone();
    exec::for_each_chunk_mut(exec, out.as_mut_slice(), k, |j, hj| {
        let xj = x.col(j);
        let old = h.col(j);
        for b in 0..k {
            if old[b] == 0.0 {
                continue;
            }
            let num = crate::matrix::dot(w.col(b), xj);
            let den: f64 = (0..k).map(|c| gram.get(b, c) * old[c]).sum();
            hj[b] = old[b] * num / (den + epsilon_guard);
        }
    });
    Ok(DenseCoefficients::new_unchecked(out))
}

/// Plain Lee–Seung NMF from the shared column-average initialization.
pub fn factorize_nmf(x: &DataMatrix, k: usize, opts: &FactorizeOptions) -> Result<NmfModel> {
    opts.validate()?;
    check_rank(x, k)?;
    let started = Instant::now();
    let exec = opts.execution;

    let mut w = init_w(x, k, opts.seed)?;
    let (h0, fallback) = initial_dense_coefficients(x, &w, exec)?;
    let mut h = h0;
    let mut trace = FactorizationTrace {
        init_fallback: fallback,
        ..Default::default()
    };

    let mut previous = frobenius_objective_with(x, &w, &h, exec)?;
    for _ in 0..opts.max_iterations {
        w = update_w_with(x, &w, &h, opts.epsilon_guard, exec)?;
        h = update_h_dense_with(x, &w, &h, opts.epsilon_guard, exec)?;
        let objective = frobenius_objective_with(x, &w, &h, exec)?;
        trace.push(objective);
        if opts.relative_change(previous, objective) < opts.tolerance {
            break;
        }
        previous = objective;
    }
    trace.wall_time_train = started.elapsed().as_secs_f64();
    Ok(NmfModel {
        basis: w,
        coefficients: h,
        trace,
    })
}
