//! Orthogonal NMF baseline (real `H` with near-orthogonal rows).
//!
//! `W` uses the standard multiplicative update. `H` uses the Stiefel-manifold
//! multiplicative rule of Yoo & Choi, "Orthogonal nonnegative matrix
//! factorization: multiplicative updates on Stiefel manifolds" (IDEAL 2008),
//! written for `X ≈ WH` with `HHᵀ = I`:
//!
//! ```text
//! H ← H ⊙ (WᵀX) / (H Xᵀ W H + ε)
//! ```
//!
//! This is the natural-gradient form of the Lagrangian update of Ding et al.
//! (KDD 2006) without the square root.

use std::time::Instant;

use crate::bonmf::{init_w, initial_dense_coefficients};
use crate::error::Result;
use crate::exec::Execution;
use crate::matrix::{
    dot, frobenius_objective_with, BasisMatrix, DataMatrix, DenseCoefficients, Matrix,
};
use crate::nmf::{
    check_rank, update_w_with, FactorizationTrace, FactorizeOptions, DEFAULT_EPSILON_GUARD,
};

/// Inner multiplicative iterations used to encode a new sample.
pub const DEFAULT_ENCODE_ITERATIONS: usize = 50;

#[derive(Debug, Clone)]
pub struct OnmfModel {
    pub basis: BasisMatrix,
    pub coefficients: DenseCoefficients,
    pub trace: FactorizationTrace,
    /// `‖HHᵀ − diag(HHᵀ)‖_F / ‖HHᵀ‖_F` after each iteration.
    pub orthogonality_per_iteration: Vec<f64>,
}

impl OnmfModel {
    pub fn orthogonality_residual(&self) -> f64 {
        self.coefficients.orthogonality_residual()
    }
}

/// One orthogonality-preserving `H` step.
pub fn update_h_orthogonal(
    x: &Matrix,
    w: &BasisMatrix,
    h: &DenseCoefficients,
    epsilon_guard: f64,
    exec: Execution,
) -> Result<DenseCoefficients> {
    crate::matrix::check_shapes("update_h_orthogonal", x, w, h.into())?;
    let wtx = w.tr_matmul(x, exec)?;
    // H Xᵀ W = H (WᵀX)ᵀ, a k × k matrix
    let hxtw = h.matmul_tr(&wtx, exec)?;
    let den = hxtw.matmul(h, exec)?;
    let data = h
        .as_slice()
        .iter()
        .zip(wtx.as_slice())
        .zip(den.as_slice())
        .map(|((&hv, &num), &d)| hv * num / (d + epsilon_guard))
        .collect();
    Ok(DenseCoefficients::new_unchecked(Matrix::from_col_major(
        h.rows(),
        h.cols(),
        data,
    )?))
}

pub fn factorize_onmf(x: &DataMatrix, k: usize, opts: &FactorizeOptions) -> Result<OnmfModel> {
    opts.validate()?;
    check_rank(x, k)?;
    let started = Instant::now();
    let exec = opts.execution;

    let mut w = init_w(x, k, opts.seed)?;
    let (mut h, fallback) = initial_dense_coefficients(x, &w, exec)?;
    let mut trace = FactorizationTrace {
        init_fallback: fallback,
        ..Default::default()
    };
    let mut orthogonality = Vec::new();

    let mut previous = frobenius_objective_with(x, &w, &h, exec)?;
    for _ in 0..opts.max_iterations {
        w = update_w_with(x, &w, &h, opts.epsilon_guard, exec)?;
        h = update_h_orthogonal(x, &w, &h, opts.epsilon_guard, exec)?;
        let objective = frobenius_objective_with(x, &w, &h, exec)?;
        trace.push(objective);
        orthogonality.push(h.orthogonality_residual());
        if opts.relative_change(previous, objective) < opts.tolerance {
            break;
        }
        previous = objective;
    }
    trace.wall_time_train = started.elapsed().as_secs_f64();
    Ok(OnmfModel {
        basis: w,
        coefficients: h,
        trace,
        orthogonality_per_iteration: orthogonality,
    })
}

/// Encodes new samples against a fixed basis with the multiplicative `H`
/// update, starting from the all-ones vector. `WᵀW` is computed once.
#[derive(Debug, Clone)]
pub struct Encoder<'a> {
    basis: &'a BasisMatrix,
    gram: Matrix,
    iterations: usize,
}

impl<'a> Encoder<'a> {
    pub fn new(basis: &'a BasisMatrix, iterations: usize) -> Self {
        Encoder {
            basis,
            gram: basis.gram(),
            iterations,
        }
    }

    pub fn rank(&self) -> usize {
        self.basis.rank()
    }

    pub fn encode(&self, x: &[f64]) -> Vec<f64> {
        let k = self.basis.rank();
        let wtx: Vec<f64> = (0..k).map(|b| dot(self.basis.col(b), x)).collect();
        let mut h = vec![1.0; k];
        let mut den = vec![0.0; k];
        for _ in 0..self.iterations {
            for (b, d) in den.iter_mut().enumerate() {
                *d = (0..k).map(|c| self.gram.get(b, c) * h[c]).sum();
            }
            for b in 0..k {
                h[b] *= wtx[b] / (den[b] + DEFAULT_EPSILON_GUARD);
            }
        }
        h
    }
}

/// Coefficients `h ≥ 0` with `Wh ≈ x`; see [`Encoder`].
pub fn encode_sample(x: &[f64], w: &BasisMatrix, inner_iterations: usize) -> Vec<f64> {
    Encoder::new(w, inner_iterations).encode(x)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::matrix::argmax;

    fn identity2() -> DataMatrix {
        DataMatrix::from_rows(&[[1.0, 0.0], [0.0, 1.0]]).unwrap()
    }

    #[test]
    fn identity_converges_to_orthogonal_rows() {
        let opts = FactorizeOptions::default()
            .with_max_iterations(2000)
            .with_tolerance(0.0);
        let model = factorize_onmf(&identity2(), 2, &opts).unwrap();
        assert!(
            model.orthogonality_residual() < 1e-3,
            "residual {}",
            model.orthogonality_residual()
        );
        let tail =
            &model.orthogonality_per_iteration[model.orthogonality_per_iteration.len() - 10..];
        for pair in tail.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-6, "{pair:?}");
        }
    }

    #[test]
    fn single_iteration_trace() {
        let opts = FactorizeOptions::default().with_max_iterations(1);
        let model = factorize_onmf(&identity2(), 2, &opts).unwrap();
        assert_eq!(model.trace.objective_per_iteration.len(), 1);
    }

    #[test]
    fn iterates_are_nonnegative() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let x = DataMatrix::new(Matrix::from_fn(8, 10, |_, _| rng.gen_range(0.0..1.0))).unwrap();
        for iters in [1, 5, 50] {
            let opts = FactorizeOptions::default()
                .with_max_iterations(iters)
                .with_tolerance(0.0);
            let model = factorize_onmf(&x, 3, &opts).unwrap();
            assert!(model.basis.as_slice().iter().all(|&v| v >= 0.0));
            assert!(model.coefficients.as_slice().iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn encode_examples() {
        let w = BasisMatrix::from_rows(&[[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]]).unwrap();
        let h = encode_sample(w.col(0), &w, DEFAULT_ENCODE_ITERATIONS);
        assert_eq!(argmax(h.iter().copied()), Some(0));
        assert!((h[0] - 1.0).abs() < 1e-9 && h[1].abs() < 1e-9);

        assert_eq!(encode_sample(&[0.0, 0.0, 0.0], &w, 1), vec![0.0, 0.0]);
        assert_eq!(encode_sample(&[3.0, 1.0, 2.0], &w, 0), vec![1.0, 1.0]);
    }

    proptest! {
        #[test]
        fn encode_argmax_is_scale_equivariant(
            x in proptest::collection::vec(0.05..5.0f64, 4),
            lambda in 0.1..10.0f64,
        ) {
            let w = BasisMatrix::from_rows(&[[1.0, 0.2], [0.3, 1.0], [0.5, 0.5], [0.0, 0.7]]).unwrap();
            let h = encode_sample(&x, &w, DEFAULT_ENCODE_ITERATIONS);
            let scaled: Vec<f64> = x.iter().map(|v| v * lambda).collect();
            let hs = encode_sample(&scaled, &w, DEFAULT_ENCODE_ITERATIONS);
            if (h[0] - h[1]).abs() > 1e-6 * h[0].max(h[1]) {
                prop_assert_eq!(argmax(h), argmax(hs));
            }
        }
    }
}
