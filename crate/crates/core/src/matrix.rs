//! Dense column-major storage and the factor types built on it.
//!
//! Samples are columns throughout: a [`DataMatrix`] is `m × n` with one
//! feature vector per column, a [`BasisMatrix`] is `m × k`, and the
//! coefficient side is either a real [`DenseCoefficients`] (`k × n`) or a
//! one-hot [`BinaryAssignment`] stored as `n` cluster indices.

use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{self, Execution};

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Cosine of the angle between `x` and `w`.
///
/// Returns `None` when either vector has zero norm, leaving the caller to
/// apply its own degenerate-vector policy.
pub fn cosine_similarity(x: &[f64], w: &[f64]) -> Option<f64> {
    assert_eq!(x.len(), w.len(), "cosine_similarity: length mismatch");
    let nx = norm(x);
    let nw = norm(w);
    if nx == 0.0 || nw == 0.0 {
        return None;
    }
    Some(dot(x, w) / (nx * nw))
}

/// Dense real matrix, column-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for j in 0..cols {
            for i in 0..rows {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    pub fn from_col_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::dimension(
                "Matrix::from_col_major",
                rows * cols,
                data.len(),
            ));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_row_major(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::dimension(
                "Matrix::from_row_major",
                rows * cols,
                data.len(),
            ));
        }
        Ok(Matrix::from_fn(rows, cols, |i, j| data[i * cols + j]))
    }

    /// Builds a matrix from a slice of rows. Panics on ragged input.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.as_ref().len());
        assert!(
            rows.iter().all(|row| row.as_ref().len() == c),
            "ragged rows"
        );
        Matrix::from_fn(r, c, |i, j| rows[i].as_ref()[j])
    }

    /// Builds a matrix whose columns are the given vectors.
    pub fn from_columns<C: AsRef<[f64]>>(columns: &[C]) -> Result<Self> {
        let c = columns.len();
        let r = columns.first().map_or(0, |col| col.as_ref().len());
        let mut data = Vec::with_capacity(r * c);
        for col in columns {
            let col = col.as_ref();
            if col.len() != r {
                return Err(Error::dimension("Matrix::from_columns", r, col.len()));
            }
            data.extend_from_slice(col);
        }
        Ok(Matrix {
            rows: r,
            cols: c,
            data,
        })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.rows + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[j * self.rows + i] = v;
    }

    #[inline]
    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    #[inline]
    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn columns(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        // chunks_exact(0) panics, and a 0-row matrix has no meaningful columns anyway
        self.data.chunks_exact(self.rows.max(1))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.cols).map(|j| self.get(i, j)).collect()
    }

    pub fn to_row_major(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.data.len());
        for i in 0..self.rows {
            out.extend((0..self.cols).map(|j| self.get(i, j)));
        }
        out
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    /// `self · other`.
    pub fn matmul(&self, other: &Matrix, exec: Execution) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::dimension(
                "matmul",
                format!("{} inner rows", self.cols),
                other.rows,
            ));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        exec::for_each_chunk_mut(exec, &mut out.data, self.rows, |j, dst| {
            for (a, &coef) in other.col(j).iter().enumerate() {
                if coef == 0.0 {
                    continue;
                }
                for (d, s) in dst.iter_mut().zip(self.col(a)) {
                    *d += s * coef;
                }
            }
        });
        Ok(out)
    }

    /// `selfᵀ · other`, the natural product for column-major operands.
    pub fn tr_matmul(&self, other: &Matrix, exec: Execution) -> Result<Matrix> {
        if self.rows != other.rows {
            return Err(Error::dimension(
                "tr_matmul",
                format!("{} shared rows", self.rows),
                other.rows,
            ));
        }
        let mut out = Matrix::zeros(self.cols, other.cols);
        exec::for_each_chunk_mut(exec, &mut out.data, self.cols, |j, dst| {
            let rhs = other.col(j);
            for (a, d) in dst.iter_mut().enumerate() {
                *d = dot(self.col(a), rhs);
            }
        });
        Ok(out)
    }

    /// `self · otherᵀ`.
    pub fn matmul_tr(&self, other: &Matrix, exec: Execution) -> Result<Matrix> {
        if self.cols != other.cols {
            return Err(Error::dimension(
                "matmul_tr",
                format!("{} shared columns", self.cols),
                other.cols,
            ));
        }
        // Rows of `other` become columns of the result; gather them once so
        // the inner loop runs over contiguous memory.
        let other_t = other.transpose();
        let mut out = Matrix::zeros(self.rows, other.rows);
        exec::for_each_chunk_mut(exec, &mut out.data, self.rows, |a, dst| {
            for (j, &coef) in other_t.col(a).iter().enumerate() {
                if coef == 0.0 {
                    continue;
                }
                for (d, s) in dst.iter_mut().zip(self.col(j)) {
                    *d += s * coef;
                }
            }
        });
        Ok(out)
    }

    fn check_nonnegative(&self) -> Result<()> {
        for (j, col) in self.columns().enumerate() {
            for (i, &v) in col.iter().enumerate() {
                if !(v >= 0.0 && v.is_finite()) {
                    return Err(Error::NegativeEntry {
                        row: i,
                        col: j,
                        value: v,
                    });
                }
            }
        }
        Ok(())
    }
}

fn column_norms(m: &Matrix) -> Vec<f64> {
    if m.rows() == 0 {
        return vec![0.0; m.cols()];
    }
    m.columns().map(norm).collect()
}

/// Non-negative `m × n` data matrix; columns are samples.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    mat: Matrix,
    norms: Vec<f64>,
}

impl DataMatrix {
    pub fn new(mat: Matrix) -> Result<Self> {
        if mat.rows() == 0 || mat.cols() == 0 {
            return Err(Error::InvalidArgument(format!(
                "data matrix must be at least 1x1, got {}x{}",
                mat.rows(),
                mat.cols()
            )));
        }
        mat.check_nonnegative()?;
        let norms = column_norms(&mat);
        Ok(DataMatrix { mat, norms })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        DataMatrix::new(Matrix::from_rows(rows))
    }

    pub fn from_columns<C: AsRef<[f64]>>(columns: &[C]) -> Result<Self> {
        DataMatrix::new(Matrix::from_columns(columns)?)
    }

    pub fn matrix(&self) -> &Matrix {
        &self.mat
    }

    pub fn col_norm(&self, j: usize) -> f64 {
        self.norms[j]
    }

    pub fn col_norms(&self) -> &[f64] {
        &self.norms
    }

    /// Copies the listed columns, in order, into a new data matrix.
    pub fn select_columns(&self, indices: &[usize]) -> Result<DataMatrix> {
        if indices.is_empty() {
            return Err(Error::InvalidArgument("empty column selection".into()));
        }
        let mut data = Vec::with_capacity(indices.len() * self.rows());
        for &j in indices {
            data.extend_from_slice(self.col(j));
        }
        let mat = Matrix::from_col_major(self.rows(), indices.len(), data)?;
        let norms = indices.iter().map(|&j| self.norms[j]).collect();
        Ok(DataMatrix { mat, norms })
    }
}

impl Deref for DataMatrix {
    type Target = Matrix;
    fn deref(&self) -> &Matrix {
        &self.mat
    }
}

/// Non-negative `m × k` basis. Column norms are computed once at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisMatrix {
    mat: Matrix,
    norms: Vec<f64>,
}

impl BasisMatrix {
    pub fn new(mat: Matrix) -> Result<Self> {
        if mat.cols() == 0 || mat.rows() == 0 {
            return Err(Error::InvalidArgument(
                "basis must have at least one row and one column".into(),
            ));
        }
        mat.check_nonnegative()?;
        Ok(Self::new_unchecked(mat))
    }

    pub(crate) fn new_unchecked(mat: Matrix) -> Self {
        let norms = column_norms(&mat);
        BasisMatrix { mat, norms }
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        BasisMatrix::new(Matrix::from_rows(rows))
    }

    pub fn rank(&self) -> usize {
        self.mat.cols()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.mat
    }

    pub fn col_norm(&self, j: usize) -> f64 {
        self.norms[j]
    }

    pub fn col_norms(&self) -> &[f64] {
        &self.norms
    }

    /// `WᵀW`, the `k × k` Gram matrix.
    pub fn gram(&self) -> Matrix {
        let k = self.rank();
        let mut g = Matrix::zeros(k, k);
        for a in 0..k {
            for b in a..k {
                let v = dot(self.col(a), self.col(b));
                g.set(a, b, v);
                g.set(b, a, v);
            }
        }
        g
    }
}

impl Deref for BasisMatrix {
    type Target = Matrix;
    fn deref(&self) -> &Matrix {
        &self.mat
    }
}

/// Non-negative real `k × n` coefficient matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseCoefficients(Matrix);

impl DenseCoefficients {
    pub fn new(mat: Matrix) -> Result<Self> {
        mat.check_nonnegative()?;
        Ok(DenseCoefficients(mat))
    }

    pub(crate) fn new_unchecked(mat: Matrix) -> Self {
        DenseCoefficients(mat)
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        DenseCoefficients::new(Matrix::from_rows(rows))
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    pub(crate) fn matrix_mut(&mut self) -> &mut Matrix {
        &mut self.0
    }

    /// `HHᵀ`.
    pub fn outer_gram(&self) -> Matrix {
        let k = self.rows();
        let mut g = Matrix::zeros(k, k);
        for col in self.columns() {
            for a in 0..k {
                if col[a] == 0.0 {
                    continue;
                }
                for b in 0..k {
                    let v = g.get(a, b) + col[a] * col[b];
                    g.set(a, b, v);
                }
            }
        }
        g
    }

    /// `‖HHᵀ − diag(HHᵀ)‖_F / ‖HHᵀ‖_F`; zero for an all-zero matrix.
    pub fn orthogonality_residual(&self) -> f64 {
        let g = self.outer_gram();
        let (mut off, mut total) = (0.0, 0.0);
        for a in 0..g.rows() {
            for b in 0..g.cols() {
                let v = g.get(a, b) * g.get(a, b);
                total += v;
                if a != b {
                    off += v;
                }
            }
        }
        if total == 0.0 {
            0.0
        } else {
            (off / total).sqrt()
        }
    }
}

impl Deref for DenseCoefficients {
    type Target = Matrix;
    fn deref(&self) -> &Matrix {
        &self.0
    }
}

/// One-hot binary `H` encoded as the row index of the single `1` in each
/// column. Storage is `n` indices; the `k × n` matrix is never materialized.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryAssignment {
    clusters: Vec<usize>,
    k: usize,
}

impl BinaryAssignment {
    pub fn new(clusters: Vec<usize>, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidArgument("assignment needs k >= 1".into()));
        }
        if let Some((j, &c)) = clusters.iter().enumerate().find(|(_, &c)| c >= k) {
            return Err(Error::InvalidArgument(format!(
                "sample {j} assigned to cluster {c}, but k = {k}"
            )));
        }
        Ok(BinaryAssignment { clusters, k })
    }

    pub(crate) fn new_unchecked(clusters: Vec<usize>, k: usize) -> Self {
        debug_assert!(clusters.iter().all(|&c| c < k));
        BinaryAssignment { clusters, k }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    pub fn clusters(&self) -> &[usize] {
        &self.clusters
    }

    pub(crate) fn clusters_mut(&mut self) -> &mut [usize] {
        &mut self.clusters
    }

    pub fn cluster_of(&self, sample: usize) -> usize {
        self.clusters[sample]
    }

    /// Member count per cluster, i.e. the diagonal of `HHᵀ`.
    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &c in &self.clusters {
            sizes[c] += 1;
        }
        sizes
    }

    /// Materializes the `k × n` one-hot matrix. Intended for tests and
    /// interoperability only.
    pub fn to_dense(&self) -> DenseCoefficients {
        let mut m = Matrix::zeros(self.k, self.clusters.len());
        for (j, &c) in self.clusters.iter().enumerate() {
            m.set(c, j, 1.0);
        }
        DenseCoefficients(m)
    }
}

/// Either representation of the coefficient factor `H`.
#[derive(Debug, Clone, Copy)]
pub enum Coefficients<'a> {
    Dense(&'a DenseCoefficients),
    Binary(&'a BinaryAssignment),
}

impl Coefficients<'_> {
    pub fn rank(&self) -> usize {
        match self {
            Coefficients::Dense(h) => h.rows(),
            Coefficients::Binary(a) => a.k(),
        }
    }

    pub fn samples(&self) -> usize {
        match self {
            Coefficients::Dense(h) => h.cols(),
            Coefficients::Binary(a) => a.len(),
        }
    }
}

impl<'a> From<&'a DenseCoefficients> for Coefficients<'a> {
    fn from(h: &'a DenseCoefficients) -> Self {
        Coefficients::Dense(h)
    }
}

impl<'a> From<&'a BinaryAssignment> for Coefficients<'a> {
    fn from(a: &'a BinaryAssignment) -> Self {
        Coefficients::Binary(a)
    }
}

pub(crate) fn check_shapes(
    context: &'static str,
    x: &Matrix,
    w: &Matrix,
    h: Coefficients<'_>,
) -> Result<()> {
    if w.rows() != x.rows() {
        return Err(Error::dimension(
            context,
            format!("basis with {} rows", x.rows()),
            format!("{} rows", w.rows()),
        ));
    }
    if h.rank() != w.cols() {
        return Err(Error::dimension(
            context,
            format!("coefficients with {} rows", w.cols()),
            format!("{} rows", h.rank()),
        ));
    }
    if h.samples() != x.cols() {
        return Err(Error::dimension(
            context,
            format!("coefficients with {} columns", x.cols()),
            format!("{} columns", h.samples()),
        ));
    }
    Ok(())
}

/// `½‖X − WH‖²_F`.
pub fn frobenius_objective<'a>(
    x: &Matrix,
    w: &Matrix,
    h: impl Into<Coefficients<'a>>,
) -> Result<f64> {
    frobenius_objective_with(x, w, h, Execution::default())
}

pub fn frobenius_objective_with<'a>(
    x: &Matrix,
    w: &Matrix,
    h: impl Into<Coefficients<'a>>,
    exec: Execution,
) -> Result<f64> {
    let h = h.into();
    check_shapes("frobenius_objective", x, w, h)?;
    let m = x.rows();
    let total = match h {
        Coefficients::Binary(a) => exec::sum_range(exec, x.cols(), |j| {
            let wc = w.col(a.cluster_of(j));
            x.col(j)
                .iter()
                .zip(wc)
                .map(|(xi, wi)| (xi - wi) * (xi - wi))
                .sum::<f64>()
        }),
        Coefficients::Dense(hd) => exec::sum_range(exec, x.cols(), |j| {
            let hj = hd.col(j);
            let xj = x.col(j);
            (0..m)
                .map(|i| {
                    let approx: f64 = hj.iter().enumerate().map(|(a, &c)| w.get(i, a) * c).sum();
                    let r = xj[i] - approx;
                    r * r
                })
                .sum::<f64>()
        }),
    };
    Ok(0.5 * total)
}

/// Solves `G y = b` for symmetric positive definite `G` via Cholesky.
///
/// Returns `None` when a pivot falls below `rel_tol · max(diag G)`, which is
/// how a rank-deficient basis shows up in its Gram matrix.
pub(crate) struct Cholesky {
    l: Matrix,
}

impl Cholesky {
    pub(crate) fn factor(g: &Matrix, rel_tol: f64) -> Option<Cholesky> {
        let k = g.rows();
        let max_diag = (0..k).map(|i| g.get(i, i)).fold(0.0_f64, f64::max);
        if max_diag <= 0.0 {
            return None;
        }
        let mut l = Matrix::zeros(k, k);
        for j in 0..k {
            let mut d = g.get(j, j);
            for p in 0..j {
                d -= l.get(j, p) * l.get(j, p);
            }
            if !(d > rel_tol * max_diag) {
                return None;
            }
            let d = d.sqrt();
            l.set(j, j, d);
            for i in j + 1..k {
                let mut s = g.get(i, j);
                for p in 0..j {
                    s -= l.get(i, p) * l.get(j, p);
                }
                l.set(i, j, s / d);
            }
        }
        Some(Cholesky { l })
    }

    #[allow(clippy::needless_range_loop)]
    pub(crate) fn solve_in_place(&self, b: &mut [f64]) {
        let k = self.l.rows();
        for i in 0..k {
            let mut s = b[i];
            for p in 0..i {
                s -= self.l.get(i, p) * b[p];
            }
            b[i] = s / self.l.get(i, i);
        }
        for i in (0..k).rev() {
            let mut s = b[i];
            for p in i + 1..k {
                s -= self.l.get(p, i) * b[p];
            }
            b[i] = s / self.l.get(i, i);
        }
    }
}

/// Index of the largest entry, lowest index on ties. `NaN` never wins.
pub(crate) fn argmax(values: impl IntoIterator<Item = f64>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.into_iter().enumerate() {
        match best {
            Some((_, b)) if !(v > b) => {}
            _ if v.is_nan() => {}
            _ => best = Some((i, v)),
        }
    }
    best.map(|(i, _)| i)
}
