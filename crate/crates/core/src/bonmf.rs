//! Binary orthogonal NMF.
//!
//! Alternates the multiplicative `W` update with a column-wise `H` update
//! that assigns every sample to the basis column forming the smallest angle
//! with it. `H` is one-hot per column, so it is kept as a [`BinaryAssignment`]
//! of `n` indices for the whole run, intermediates included: the `k` cosines
//! of a column are reduced to their argmax as they are computed.
//!
//! Initialization sorts the samples by norm, builds each basis column as the
//! mean of 10 random samples drawn from the 30 largest, and seeds the
//! assignment from the least-squares coefficients `(WᵀW)⁻¹WᵀX`.

use std::path::Path;
use std::time::Instant;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::classify::ClusterLabelMap;
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::matrix::{
    argmax, dot, frobenius_objective_with, BasisMatrix, BinaryAssignment, Cholesky, DataMatrix,
    DenseCoefficients, Matrix,
};
use crate::nmf::{check_rank, update_w_with, FactorizationTrace, FactorizeOptions};

/// Samples considered by [`init_w`], taken in order of decreasing norm.
pub const INIT_POOL_COLUMNS: usize = 30;
/// Samples averaged into each initial basis column.
pub const INIT_SAMPLES_PER_COLUMN: usize = 10;

/// Pivot threshold, relative to the largest diagonal entry of `WᵀW`, under
/// which the normal equations are treated as singular.
const SINGULAR_PIVOT_TOLERANCE: f64 = 1e-10;

/// Non-positive entries of a real initial `H` are raised to this fraction of
/// the mean positive entry so that multiplicative updates can move them.
const INIT_FLOOR_FRACTION: f64 = 1e-3;

/// Sample indices averaged into each column of the initial basis.
///
/// Columns are ranked by decreasing norm (ties by index) and the pool is the
/// first `min(30, n)` of them. Each basis column draws 10 pool members
/// without replacement, or with replacement when the pool is smaller than 10.
pub fn init_w_picks(x: &DataMatrix, k: usize, seed: u64) -> Vec<Vec<usize>> {
    let n = x.cols();
    let norms = x.col_norms();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]).then(a.cmp(&b)));
    order.truncate(INIT_POOL_COLUMNS.min(n));
    let pool = order;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..k)
        .map(|_| {
            if pool.len() >= INIT_SAMPLES_PER_COLUMN {
                index::sample(&mut rng, pool.len(), INIT_SAMPLES_PER_COLUMN)
                    .into_iter()
                    .map(|p| pool[p])
                    .collect()
            } else {
                (0..INIT_SAMPLES_PER_COLUMN)
                    .map(|_| pool[rng.gen_range(0..pool.len())])
                    .collect()
            }
        })
        .collect()
}

/// Initial basis: each column is the mean of the samples chosen by
/// [`init_w_picks`].
pub fn init_w(x: &DataMatrix, k: usize, seed: u64) -> Result<BasisMatrix> {
    check_rank(x, k)?;
    let m = x.rows();
    let mut w = Matrix::zeros(m, k);
    for (c, picks) in init_w_picks(x, k, seed).iter().enumerate() {
        let col = w.col_mut(c);
        for &j in picks {
            for (acc, v) in col.iter_mut().zip(x.col(j)) {
                *acc += v;
            }
        }
        let count = picks.len() as f64;
        col.iter_mut().for_each(|v| *v /= count);
    }
    Ok(BasisMatrix::new_unchecked(w))
}

/// Least-squares coefficients `(WᵀW)⁻¹WᵀX`, or `None` when `WᵀW` is singular.
/// Entries may be negative.
pub fn normal_equations(x: &Matrix, w: &BasisMatrix, exec: Execution) -> Result<Option<Matrix>> {
    if x.rows() != w.rows() {
        return Err(Error::dimension("normal_equations", x.rows(), w.rows()));
    }
    let Some(chol) = Cholesky::factor(&w.gram(), SINGULAR_PIVOT_TOLERANCE) else {
        return Ok(None);
    };
    let mut h = w.tr_matmul(x, exec)?;
    exec::for_each_chunk_mut(exec, h.as_mut_slice(), w.rank(), |_, col| {
        chol.solve_in_place(col)
    });
    Ok(Some(h))
}

/// Outcome of [`init_h`].
#[derive(Debug, Clone)]
pub struct InitialAssignment {
    pub assignment: BinaryAssignment,
    /// `WᵀW` was singular and the cosine assignment was used instead.
    pub used_fallback: bool,
}

/// Binarized least-squares initialization of `H`.
///
/// Each column of `(WᵀW)⁻¹WᵀX` is solved and immediately reduced to its
/// argmax, so only `k` scratch values per column are live at a time.
pub fn init_h(w: &BasisMatrix, x: &DataMatrix) -> Result<InitialAssignment> {
    init_h_with(w, x, Execution::default())
}

pub fn init_h_with(w: &BasisMatrix, x: &DataMatrix, exec: Execution) -> Result<InitialAssignment> {
    if x.rows() != w.rows() {
        return Err(Error::dimension("init_h", x.rows(), w.rows()));
    }
    let k = w.rank();
    let Some(chol) = Cholesky::factor(&w.gram(), SINGULAR_PIVOT_TOLERANCE) else {
        log::debug!("init_h: WᵀW is singular, falling back to cosine assignment");
        let mut clusters = vec![0; x.cols()];
        update_h_cosine_into(x, w, exec, &mut clusters)?;
        return Ok(InitialAssignment {
            assignment: BinaryAssignment::new_unchecked(clusters, k),
            used_fallback: true,
        });
    };
    let mut clusters = vec![0; x.cols()];
    exec::for_each_mut(exec, &mut clusters, |j, slot| {
        let xj = x.col(j);
        let mut coef: Vec<f64> = (0..k).map(|c| dot(w.col(c), xj)).collect();
        chol.solve_in_place(&mut coef);
        *slot = argmax(coef).unwrap_or(0);
    });
    Ok(InitialAssignment {
        assignment: BinaryAssignment::new_unchecked(clusters, k),
        used_fallback: false,
    })
}

/// Non-negative real starting point for the dense-`H` factorizers.
///
/// Uses the least-squares coefficients with non-positive entries raised to a
/// small floor; a singular `WᵀW` falls back to the floored one-hot cosine
/// assignment. The flag reports the fallback.
pub(crate) fn initial_dense_coefficients(
    x: &DataMatrix,
    w: &BasisMatrix,
    exec: Execution,
) -> Result<(DenseCoefficients, bool)> {
    let (mut h, fallback) = match normal_equations(x, w, exec)? {
        Some(h) => (h, false),
        None => {
            let mut clusters = vec![0; x.cols()];
            update_h_cosine_into(x, w, exec, &mut clusters)?;
            let onehot = BinaryAssignment::new_unchecked(clusters, w.rank()).to_dense();
            (onehot.into_matrix(), true)
        }
    };
    let positive: Vec<f64> = h.as_slice().iter().copied().filter(|&v| v > 0.0).collect();
    let mean = if positive.is_empty() {
        1.0
    } else {
        positive.iter().sum::<f64>() / positive.len() as f64
    };
    let floor = INIT_FLOOR_FRACTION * mean;
    for v in h.as_mut_slice() {
        if !(*v > floor) {
            *v = floor;
        }
    }
    Ok((DenseCoefficients::new_unchecked(h), fallback))
}

/// Output of [`update_h_cosine`].
#[derive(Debug, Clone)]
pub struct CosineAssignment {
    pub assignment: BinaryAssignment,
    /// Samples with zero norm; each was put in cluster 0.
    pub zero_norm_samples: usize,
}

/// Assigns every sample to the basis column with the largest cosine.
///
/// Ties go to the lowest column index. A zero basis column scores `-∞` and is
/// never chosen; a zero sample goes to cluster 0 and is counted in
/// [`CosineAssignment::zero_norm_samples`].
pub fn update_h_cosine(x: &DataMatrix, w: &BasisMatrix) -> Result<CosineAssignment> {
    update_h_cosine_with(x, w, Execution::default())
}

pub fn update_h_cosine_with(
    x: &DataMatrix,
    w: &BasisMatrix,
    exec: Execution,
) -> Result<CosineAssignment> {
    let mut clusters = vec![0; x.cols()];
    let zero_norm_samples = update_h_cosine_into(x, w, exec, &mut clusters)?;
    Ok(CosineAssignment {
        assignment: BinaryAssignment::new_unchecked(clusters, w.rank()),
        zero_norm_samples,
    })
}

/// Allocation-free form of [`update_h_cosine`]: writes the cluster of sample
/// `j` into `out[j]` and returns the number of zero-norm samples.
pub fn update_h_cosine_into(
    x: &DataMatrix,
    w: &BasisMatrix,
    exec: Execution,
    out: &mut [usize],
) -> Result<usize> {
    if x.rows() != w.rows() {
        return Err(Error::dimension(
            "update_h_cosine",
            format!("basis with {} rows", x.rows()),
            w.rows(),
        ));
    }
    if out.len() != x.cols() {
        return Err(Error::dimension("update_h_cosine", x.cols(), out.len()));
    }
    if w.col_norms().iter().all(|&nw| nw == 0.0) {
        return Err(Error::DegenerateModel("every basis column is zero".into()));
    }
    exec::for_each_mut(exec, out, |j, slot| {
        *slot = nearest_column_by_angle(x.col(j), x.col_norm(j), w).unwrap_or(0);
    });
    Ok(x.col_norms().iter().filter(|&&v| v == 0.0).count())
}

/// Argmax over basis columns of `cos(x, W[:, c])`, computed with `k` dot
/// products. `None` when `x` has zero norm.
pub(crate) fn nearest_column_by_angle(x: &[f64], x_norm: f64, w: &BasisMatrix) -> Option<usize> {
    nearest_column_counted(x, x_norm, w).0
}

/// As [`nearest_column_by_angle`], also returning how many dot products
/// with basis columns were evaluated.
pub(crate) fn nearest_column_counted(
    x: &[f64],
    x_norm: f64,
    w: &BasisMatrix,
) -> (Option<usize>, usize) {
    if x_norm == 0.0 {
        return (None, 0);
    }
    let mut evaluations = 0;
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for c in 0..w.rank() {
        let nw = w.col_norm(c);
        let score = if nw == 0.0 {
            f64::NEG_INFINITY
        } else {
            evaluations += 1;
            dot(x, w.col(c)) / (x_norm * nw)
        };
        if score > best_score {
            best = c;
            best_score = score;
        }
    }
    (Some(best), evaluations)
}

/// A trained BONMF factorization.
#[derive(Debug, Clone, PartialEq)]
pub struct BonmfModel {
    pub basis: BasisMatrix,
    pub assignments: BinaryAssignment,
    pub trace: FactorizationTrace,
    pub cluster_labels: Option<ClusterLabelMap>,
}

impl BonmfModel {
    pub fn rank(&self) -> usize {
        self.basis.rank()
    }

    pub fn with_labels(mut self, labels: ClusterLabelMap) -> Self {
        self.cluster_labels = Some(labels);
        self
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&ModelFile::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str::<ModelFile>(text)?.try_into()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

const MODEL_FORMAT: &str = "bonmf-model/1";

/// On-disk model layout; `w` is row-major `m × k`.
#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    m: usize,
    k: usize,
    w: Vec<f64>,
    assignments: Vec<usize>,
    cluster_labels: Option<Vec<usize>>,
    #[serde(default)]
    trace: FactorizationTrace,
}

impl From<&BonmfModel> for ModelFile {
    fn from(model: &BonmfModel) -> Self {
        ModelFile {
            format: MODEL_FORMAT.to_string(),
            m: model.basis.rows(),
            k: model.basis.rank(),
            w: model.basis.to_row_major(),
            assignments: model.assignments.clusters().to_vec(),
            cluster_labels: model.cluster_labels.as_ref().map(|l| l.as_slice().to_vec()),
            trace: model.trace.clone(),
        }
    }
}

impl TryFrom<ModelFile> for BonmfModel {
    type Error = Error;

    fn try_from(file: ModelFile) -> Result<Self> {
        if file.format != MODEL_FORMAT {
            return Err(Error::InvalidArgument(format!(
                "unsupported model format {:?}",
                file.format
            )));
        }
        let basis = BasisMatrix::new(Matrix::from_row_major(file.m, file.k, &file.w)?)?;
        let assignments = BinaryAssignment::new(file.assignments, file.k)?;
        let cluster_labels = match file.cluster_labels {
            Some(map) if map.len() != file.k => {
                return Err(Error::dimension("model cluster_labels", file.k, map.len()))
            }
            Some(map) => Some(ClusterLabelMap::new(map)),
            None => None,
        };
        Ok(BonmfModel {
            basis,
            assignments,
            trace: file.trace,
            cluster_labels,
        })
    }
}

/// Runs BONMF: initialize, then alternate the `W` update and the cosine
/// `H` update until `max_iterations`, or until the assignment stops changing
/// and the relative objective change drops below `tolerance`.
pub fn factorize_bonmf(x: &DataMatrix, k: usize, opts: &FactorizeOptions) -> Result<BonmfModel> {
    opts.validate()?;
    check_rank(x, k)?;
    let started = Instant::now();
    let exec = opts.execution;

    let mut w = init_w(x, k, opts.seed)?;
    let init = init_h_with(&w, x, exec)?;
    let mut trace = FactorizationTrace {
        init_fallback: init.used_fallback,
        ..Default::default()
    };
    let mut current = init.assignment;
    let mut next = vec![0; x.cols()];

    let mut previous = frobenius_objective_with(x, &w, &current, exec)?;
    for _ in 0..opts.max_iterations {
        w = update_w_with(x, &w, &current, opts.epsilon_guard, exec)?;
        trace.zero_norm_samples = update_h_cosine_into(x, &w, exec, &mut next)?;
        let unchanged = next == current.clusters();
        current.clusters_mut().swap_with_slice(&mut next);

        let objective = frobenius_objective_with(x, &w, &current, exec)?;
        trace.push(objective);
        if unchanged && opts.relative_change(previous, objective) < opts.tolerance {
            break;
        }
        previous = objective;
    }
    trace.wall_time_train = started.elapsed().as_secs_f64();
    Ok(BonmfModel {
        basis: w,
        assignments: current,
        trace,
        cluster_labels: None,
    })
}
