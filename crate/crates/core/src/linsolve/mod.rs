//! Preconditioned conjugate gradient in a weighted inner product, with
//! point-Jacobi and ILU0 preconditioners.
//!
//! Operators here are self-adjoint with respect to `<x, y>_w = Σ w_i x_i y_i`
//! rather than the Euclidean product; for the diffusion operators `w` is the
//! density-weighted dual-cell volume.

mod precond;
mod sparse;

pub use precond::{build_ilu0, build_ilu0_weighted, build_jacobi, Ilu0, Preconditioner};
pub use sparse::CsrMatrix;

use crate::error::{Error, Result};

/// Action `y = M x` of a linear operator that is self-adjoint positive definite
/// in the inner product weighted by [`weights`](Self::weights).
pub trait LinearOperatorAction {
    fn len(&self) -> usize;

    fn apply(&self, x: &[f64], y: &mut [f64]);

    fn weights(&self) -> &[f64];

    /// Operator diagonal. The default probes one basis vector at a time.
    fn diagonal(&self) -> Vec<f64> {
        let n = self.len();
        let mut e = vec![0.0; n];
        let mut y = vec![0.0; n];
        (0..n)
            .map(|i| {
                e[i] = 1.0;
                self.apply(&e, &mut y);
                e[i] = 0.0;
                y[i]
            })
            .collect()
    }
}

/// An explicit matrix with its weights.
#[derive(Debug, Clone)]
pub struct MatrixOperator {
    pub matrix: CsrMatrix,
    pub weights: Vec<f64>,
}

impl MatrixOperator {
    pub fn new(matrix: CsrMatrix, weights: Vec<f64>) -> Self {
        assert_eq!(matrix.n(), weights.len());
        Self { matrix, weights }
    }

    pub fn unweighted(matrix: CsrMatrix) -> Self {
        let n = matrix.n();
        Self::new(matrix, vec![1.0; n])
    }
}

impl LinearOperatorAction for MatrixOperator {
    fn len(&self) -> usize {
        self.matrix.n()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.matrix.matvec(x, y)
    }

    fn weights(&self) -> &[f64] {
        &self.weights
    }

    fn diagonal(&self) -> Vec<f64> {
        self.matrix.diagonal()
    }
}

/// Closure-backed operator.
pub struct FnOperator<F> {
    f: F,
    weights: Vec<f64>,
}

impl<F: Fn(&[f64], &mut [f64])> FnOperator<F> {
    pub fn new(weights: Vec<f64>, f: F) -> Self {
        Self { f, weights }
    }
}

impl<F: Fn(&[f64], &mut [f64])> LinearOperatorAction for FnOperator<F> {
    fn len(&self) -> usize {
        self.weights.len()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        (self.f)(x, y)
    }

    fn weights(&self) -> &[f64] {
        &self.weights
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    /// `‖b − A x‖_w / ‖b‖_w` (absolute when `b = 0`).
    pub final_relative_residual: f64,
    pub converged: bool,
}

/// Snapshot handed to the observer of [`pcg_solve_observed`] after each iteration.
pub struct PcgIterate<'a> {
    pub iteration: usize,
    pub x: &'a [f64],
    pub residual: &'a [f64],
    pub relative_residual: f64,
}

pub(crate) fn wdot(w: &[f64], x: &[f64], y: &[f64]) -> f64 {
    w.iter().zip(x).zip(y).map(|((w, x), y)| w * x * y).sum()
}

/// Solve `A x = b` to relative residual `tol` in the weighted norm.
pub fn pcg_solve<A: LinearOperatorAction + ?Sized>(
    a: &A,
    b: &[f64],
    m: &Preconditioner,
    x0: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, SolveStats)> {
    pcg_solve_observed(a, b, m, x0, tol, max_iter, |_| {})
}

pub fn pcg_solve_observed<A: LinearOperatorAction + ?Sized>(
    a: &A,
    b: &[f64],
    m: &Preconditioner,
    x0: &[f64],
    tol: f64,
    max_iter: usize,
    mut observe: impl FnMut(&PcgIterate<'_>),
) -> Result<(Vec<f64>, SolveStats)> {
    let n = a.len();
    if b.len() != n || x0.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "operator of size {n}, rhs {}, initial guess {}",
            b.len(),
            x0.len()
        )));
    }
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::InvalidArgument(format!("tolerance {tol} not in (0, 1)")));
    }
    if max_iter == 0 {
        return Err(Error::InvalidArgument("max_iter must be at least 1".into()));
    }
    let w = a.weights();
    let b_norm = wdot(w, b, b).sqrt();
    let scale = if b_norm > 0.0 { b_norm } else { 1.0 };

    let mut x = x0.to_vec();
    let mut r = vec![0.0; n];
    let mut q = vec![0.0; n];
    a.apply(&x, &mut q);
    for i in 0..n {
        r[i] = b[i] - q[i];
    }
    let mut rel = wdot(w, &r, &r).sqrt() / scale;
    if rel.is_nan() {
        return Err(Error::Divergence { iteration: 0 });
    }
    if rel <= tol {
        return Ok((
            x,
            SolveStats {
                iterations: 0,
                final_relative_residual: rel,
                converged: true,
            },
        ));
    }

    let mut z = vec![0.0; n];
    m.apply(&r, &mut z);
    let mut p = z.clone();
    let mut rz = wdot(w, &r, &z);
    for it in 1..=max_iter {
        a.apply(&p, &mut q);
        let pq = wdot(w, &p, &q);
        if pq.is_nan() {
            return Err(Error::Divergence { iteration: it });
        }
        if pq <= 0.0 {
            return Err(Error::Indefinite(format!(
                "p·Ap = {pq:e} at iteration {it}"
            )));
        }
        let alpha = rz / pq;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        rel = wdot(w, &r, &r).sqrt() / scale;
        if !rel.is_finite() {
            return Err(Error::Divergence { iteration: it });
        }
        observe(&PcgIterate {
            iteration: it,
            x: &x,
            residual: &r,
            relative_residual: rel,
        });
        if rel <= tol {
            return Ok((
                x,
                SolveStats {
                    iterations: it,
                    final_relative_residual: rel,
                    converged: true,
                },
            ));
        }
        m.apply(&r, &mut z);
        let rz_new = wdot(w, &r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Ok((
        x,
        SolveStats {
            iterations: max_iter,
            final_relative_residual: rel,
            converged: false,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_in_one_iteration() {
        let a = MatrixOperator::unweighted(CsrMatrix::identity(5));
        let b = [1.0, -2.0, 3.0, 0.5, 4.0];
        let pc = build_jacobi(&a).unwrap();
        let (x, st) = pcg_solve(&a, &b, &pc, &[0.0; 5], 1e-12, 10).unwrap();
        assert_eq!(st.iterations, 1);
        assert!(st.converged);
        for (xi, bi) in x.iter().zip(&b) {
            assert!((xi - bi).abs() < 1e-15);
        }
    }

    #[test]
    fn diagonal_with_jacobi_in_one_iteration() {
        let a = MatrixOperator::unweighted(CsrMatrix::from_diagonal(&[1.0, 2.0, 3.0]));
        let pc = build_jacobi(&a).unwrap();
        let (x, st) = pcg_solve(&a, &[1.0, 2.0, 3.0], &pc, &[0.0; 3], 1e-12, 10).unwrap();
        assert_eq!(st.iterations, 1);
        for xi in x {
            assert!((xi - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn indefinite_operator_is_reported() {
        let a = MatrixOperator::unweighted(CsrMatrix::from_diagonal(&[1.0, -1.0]));
        let err = pcg_solve(&a, &[0.0, 1.0], &Preconditioner::Identity, &[0.0; 2], 1e-8, 10);
        assert!(matches!(err, Err(Error::Indefinite(_))));
    }

    #[test]
    fn nan_rhs_is_divergence() {
        let a = MatrixOperator::unweighted(CsrMatrix::identity(2));
        let err = pcg_solve(&a, &[f64::NAN, 1.0], &Preconditioner::Identity, &[0.0; 2], 1e-8, 10);
        assert!(matches!(err, Err(Error::Divergence { .. })));
    }

    #[test]
    fn not_converged_flag() {
        let n = 50;
        let a = MatrixOperator::unweighted(CsrMatrix::from_rows(
            (0..n)
                .map(|i| {
                    let mut r = vec![(i, 2.0)];
                    if i > 0 {
                        r.push((i - 1, -1.0));
                    }
                    if i + 1 < n {
                        r.push((i + 1, -1.0));
                    }
                    r
                })
                .collect(),
        ));
        let b = vec![1.0; n];
        let (_, st) = pcg_solve(&a, &b, &Preconditioner::Identity, &vec![0.0; n], 1e-12, 3).unwrap();
        assert!(!st.converged);
        assert_eq!(st.iterations, 3);
        assert!(st.final_relative_residual > 1e-12);
    }

    #[test]
    fn argument_checks() {
        let a = MatrixOperator::unweighted(CsrMatrix::identity(2));
        let pc = Preconditioner::Identity;
        assert!(pcg_solve(&a, &[1.0], &pc, &[0.0; 2], 1e-8, 1).is_err());
        assert!(pcg_solve(&a, &[1.0; 2], &pc, &[0.0; 2], 1.5, 1).is_err());
        assert!(pcg_solve(&a, &[1.0; 2], &pc, &[0.0; 2], 1e-8, 0).is_err());
    }

    #[test]
    fn zero_rhs_zero_guess() {
        let a = MatrixOperator::unweighted(CsrMatrix::identity(3));
        let (x, st) = pcg_solve(&a, &[0.0; 3], &Preconditioner::Identity, &[0.0; 3], 1e-8, 5).unwrap();
        assert_eq!(x, vec![0.0; 3]);
        assert_eq!(st.iterations, 0);
    }
}
