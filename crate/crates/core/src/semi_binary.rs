//! Semi-binary NMF baseline: binary `H` without the one-hot constraint.
//!
//! Each row `h` of `H` is replaced by
//! `sgn(Xᵀz − ½(zᵀz)·1 − H′ᵀW′ᵀz)`, where `z` is the matching column of
//! `W` and `W′`, `H′` are `W`, `H` with that column/row removed. Rows are
//! swept in ascending order once per outer iteration, after a multiplicative
//! `W` update.

use std::ops::Deref;
use std::time::Instant;

use crate::bonmf::{init_w, normal_equations, update_h_cosine_into};
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::matrix::{
    dot, frobenius_objective_with, BasisMatrix, DataMatrix, DenseCoefficients, Matrix,
};
use crate::nmf::{check_rank, update_w_with, FactorizationTrace, FactorizeOptions};

/// `1` if `x > 0`, else `0`.
#[inline]
pub fn sgn(x: f64) -> u8 {
    u8::from(x > 0.0)
}

/// Dense `k × n` matrix with every entry in `{0, 1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryMatrix(DenseCoefficients);

impl BinaryMatrix {
    pub fn new(mat: Matrix) -> Result<Self> {
        if let Some(v) = mat.as_slice().iter().find(|&&v| v != 0.0 && v != 1.0) {
            return Err(Error::InvalidArgument(format!(
                "binary matrix entry {v} is not 0 or 1"
            )));
        }
        Ok(BinaryMatrix(DenseCoefficients::new_unchecked(mat)))
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        BinaryMatrix::new(Matrix::from_rows(rows))
    }

    pub fn as_coefficients(&self) -> &DenseCoefficients {
        &self.0
    }
}

impl Deref for BinaryMatrix {
    type Target = DenseCoefficients;
    fn deref(&self) -> &DenseCoefficients {
        &self.0
    }
}

#[derive(Debug, Clone)]
pub struct SemiBinaryModel {
    pub basis: BasisMatrix,
    pub coefficients: BinaryMatrix,
    pub trace: FactorizationTrace,
}

/// Returns a copy of `h` with row `row` recomputed by the sign rule.
pub fn update_h_row(
    x: &Matrix,
    w: &BasisMatrix,
    h: &BinaryMatrix,
    row: usize,
) -> Result<BinaryMatrix> {
    let mut out = h.clone();
    update_h_row_in_place(x, w, &mut out, row, Execution::default())?;
    Ok(out)
}

/// Recomputes row `row` of `h` in place; other rows are untouched.
/// Returns whether the row changed.
pub fn update_h_row_in_place(
    x: &Matrix,
    w: &BasisMatrix,
    h: &mut BinaryMatrix,
    row: usize,
    exec: Execution,
) -> Result<bool> {
    crate::matrix::check_shapes("update_h_row", x, w, h.as_coefficients().into())?;
    let k = w.rank();
    if row >= k {
        return Err(Error::InvalidArgument(format!(
            "row {row} out of range for k = {k}"
        )));
    }
    let z = w.col(row);
    let half_zz = 0.5 * dot(z, z);
    // W′ᵀz with the excluded column zeroed, so H′ᵀW′ᵀz is a plain sum over b.
    let wtz: Vec<f64> = (0..k)
        .map(|b| if b == row { 0.0 } else { dot(w.col(b), z) })
        .collect();

    let coeffs = h.as_coefficients();
    let new_row: Vec<f64> = exec::map_range(exec, x.cols(), |j| {
        let hj = coeffs.col(j);
        let cross: f64 = hj.iter().zip(&wtz).map(|(a, b)| a * b).sum();
        f64::from(sgn(dot(x.col(j), z) - half_zz - cross))
    });

    let mat = h.0.matrix_mut();
    let mut changed = false;
    for (j, v) in new_row.into_iter().enumerate() {
        if mat.get(row, j) != v {
            changed = true;
            mat.set(row, j, v);
        }
    }
    Ok(changed)
}

/// Binarized initial `H`: least-squares coefficients thresholded at ½, or the
/// one-hot cosine assignment when `WᵀW` is singular.
fn initial_binary(
    x: &DataMatrix,
    w: &BasisMatrix,
    exec: Execution,
) -> Result<(BinaryMatrix, bool)> {
    match normal_equations(x, w, exec)? {
        Some(real) => {
            let data = real
                .as_slice()
                .iter()
                .map(|&v| f64::from(sgn(v - 0.5)))
                .collect();
            let mat = Matrix::from_col_major(real.rows(), real.cols(), data)?;
            Ok((BinaryMatrix(DenseCoefficients::new_unchecked(mat)), false))
        }
        None => {
            let mut clusters = vec![0; x.cols()];
            update_h_cosine_into(x, w, exec, &mut clusters)?;
            let onehot =
                crate::matrix::BinaryAssignment::new_unchecked(clusters, w.rank()).to_dense();
            Ok((BinaryMatrix(onehot), true))
        }
    }
}

pub fn factorize_zhang(
    x: &DataMatrix,
    k: usize,
    opts: &FactorizeOptions,
) -> Result<SemiBinaryModel> {
    opts.validate()?;
    check_rank(x, k)?;
    let started = Instant::now();
    let exec = opts.execution;

    let mut w = init_w(x, k, opts.seed)?;
    let (mut h, fallback) = initial_binary(x, &w, exec)?;
    let mut trace = FactorizationTrace {
        init_fallback: fallback,
        ..Default::default()
    };

    let mut previous = frobenius_objective_with(x, &w, h.as_coefficients(), exec)?;
    for _ in 0..opts.max_iterations {
        w = update_w_with(x, &w, h.as_coefficients(), opts.epsilon_guard, exec)?;
        let mut changed = false;
        for row in 0..k {
            changed |= update_h_row_in_place(x, &w, &mut h, row, exec)?;
        }
        let objective = frobenius_objective_with(x, &w, h.as_coefficients(), exec)?;
        trace.push(objective);
        if !changed && opts.relative_change(previous, objective) < opts.tolerance {
            break;
        }
        previous = objective;
    }
    trace.wall_time_train = started.elapsed().as_secs_f64();
    Ok(SemiBinaryModel {
        basis: w,
        coefficients: h,
        trace,
    })
}
