//! Shared penalized projected least-squares core.
//!
//! Both the instrument fit and the structural fit solve a system of the form
//!
//! ```text
//! (B' Pi B + lambda B'B) coef = B' Pi target
//! ```
//!
//! where `Pi` is the projection onto the other design's column space. The
//! system is solved through a symmetric eigendecomposition, which doubles as
//! the condition estimate; no explicit inverse is stored.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::design::Projector;
use crate::error::{OlivaError, Result};

/// Relative condition number above which the penalized system is declared
/// singular.
pub(crate) const CONDITION_LIMIT: f64 = 1e12;

pub(crate) struct PenalizedSolution {
    /// Coefficients, one column per target column.
    pub coef: DMatrix<f64>,
    /// Relative condition number of the penalized Gram matrix.
    pub condition: f64,
}

/// Solve `(B' Pi B + lambda B'B) coef = B' Pi target`.
pub(crate) fn penalized_projected_solve(
    basis: &DMatrix<f64>,
    other: &Projector,
    target: &DMatrix<f64>,
    lambda: f64,
) -> Result<PenalizedSolution> {
    let n = basis.nrows();
    if other.n() != n || target.nrows() != n {
        return Err(OlivaError::ShapeMismatch(format!(
            "basis has {n} rows, projector {} and target {}",
            other.n(),
            target.nrows()
        )));
    }
    let u = other.orthonormal_basis();
    let c = u.transpose() * basis;
    let root = penalty_root(basis)?;
    let rhs_top = u.transpose() * target;
    penalized_stacked_solve(&c, &root, &rhs_top, lambda)
}

/// Upper-triangular factor `R` with `R'R = B'B`, the penalty square root.
pub(crate) fn penalty_root(basis: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let gram = basis.transpose() * basis;
    let chol = gram.cholesky().ok_or(OlivaError::SingularSystem {
        condition: f64::INFINITY,
    })?;
    Ok(chol.l().transpose())
}

/// Solve the normal equations `(C'C + lambda R'R) coef = C' rhs_top` through
/// the stacked least-squares form `[C; sqrt(lambda) R] coef ~ [rhs_top; 0]`.
///
/// The stacked SVD route avoids squaring the condition number, which matters
/// for the nearly-unpenalized fits; the reported condition is that of the
/// normal-equations matrix itself (the squared singular-value ratio).
pub(crate) fn penalized_stacked_solve(
    c: &DMatrix<f64>,
    penalty_root: &DMatrix<f64>,
    rhs_top: &DMatrix<f64>,
    lambda: f64,
) -> Result<PenalizedSolution> {
    if lambda < 0.0 || !lambda.is_finite() {
        return Err(OlivaError::DegenerateInput(format!(
            "penalty must be a finite non-negative number, got {lambda}"
        )));
    }
    let r = c.nrows();
    let j = c.ncols();
    let p = rhs_top.ncols();
    let sqrt_lambda = lambda.sqrt();
    let mut stacked = DMatrix::zeros(r + j, j);
    stacked.view_mut((0, 0), (r, j)).copy_from(c);
    stacked
        .view_mut((r, 0), (j, j))
        .copy_from(&(penalty_root * sqrt_lambda));
    let svd = stacked.svd(true, true);
    let smax = svd.singular_values.amax();
    let smin = svd
        .singular_values
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let condition = if smin > 0.0 {
        (smax / smin) * (smax / smin)
    } else {
        f64::INFINITY
    };
    if smax <= 0.0 || smax.is_nan() || condition > CONDITION_LIMIT {
        return Err(OlivaError::SingularSystem { condition });
    }
    let mut rhs = DMatrix::zeros(r + j, p);
    rhs.view_mut((0, 0), (r, p)).copy_from(rhs_top);
    let coef = svd
        .solve(&rhs, smax * 1e-15)
        .map_err(|e| OlivaError::DegenerateInput(e.to_string()))?;
    Ok(PenalizedSolution { coef, condition })
}

/// Solve a symmetric positive semi-definite system with a condition check.
///
/// Two steps of iterative refinement keep the solution accurate even when the
/// condition number approaches the admissible ceiling (tiny penalties).
pub(crate) fn solve_spd(gram: DMatrix<f64>, rhs: &DMatrix<f64>) -> Result<PenalizedSolution> {
    let eig = SymmetricEigen::new(gram.clone());
    let max = eig.eigenvalues.amax();
    let min = eig.eigenvalues.min();
    let condition = if min > 0.0 { max / min } else { f64::INFINITY };
    if max <= 0.0 || max.is_nan() || condition > CONDITION_LIMIT {
        return Err(OlivaError::SingularSystem { condition });
    }
    let apply_inverse = |b: &DMatrix<f64>| -> DMatrix<f64> {
        let mut scaled = eig.eigenvectors.transpose() * b;
        for i in 0..scaled.nrows() {
            let inv = 1.0 / eig.eigenvalues[i];
            for j in 0..scaled.ncols() {
                scaled[(i, j)] *= inv;
            }
        }
        &eig.eigenvectors * scaled
    };
    let mut coef = apply_inverse(rhs);
    for _ in 0..2 {
        let residual = rhs - &gram * &coef;
        coef += apply_inverse(&residual);
    }
    Ok(PenalizedSolution { coef, condition })
}

/// Minimum-norm solve of a symmetric positive semi-definite system: spectral
/// components below `rel_tol` times the largest eigenvalue are dropped rather
/// than inverted.
pub(crate) fn solve_spd_min_norm(
    gram: DMatrix<f64>,
    rhs: &DMatrix<f64>,
    rel_tol: f64,
) -> Result<PenalizedSolution> {
    let eig = SymmetricEigen::new(gram);
    let max = eig.eigenvalues.amax();
    if max <= 0.0 || max.is_nan() {
        return Err(OlivaError::SingularSystem {
            condition: f64::INFINITY,
        });
    }
    let min_kept = eig
        .eigenvalues
        .iter()
        .copied()
        .filter(|&l| l > rel_tol * max)
        .fold(f64::INFINITY, f64::min);
    let mut scaled = eig.eigenvectors.transpose() * rhs;
    for i in 0..scaled.nrows() {
        let l = eig.eigenvalues[i];
        let inv = if l > rel_tol * max { 1.0 / l } else { 0.0 };
        for j in 0..scaled.ncols() {
            scaled[(i, j)] *= inv;
        }
    }
    Ok(PenalizedSolution {
        coef: &eig.eigenvectors * scaled,
        condition: max / min_kept,
    })
}
