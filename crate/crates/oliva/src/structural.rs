//! Penalized estimation of the minimum-norm structural regression, the dual
//! of the first-stage problem.
//!
//! The fitted values are
//!
//! ```text
//! G = P (P'(Pi_Q + lambda I) P)^{-1} P' Pi_Q Y
//! ```
//!
//! with the roles of the two sieves swapped relative to the instrument fit.
//! Both fits share one solver core. The structural fit only matters for the
//! variance formula of the IV step, where it captures the nonlinearity bias
//! from estimating the instrument.

use nalgebra::{DMatrix, DVector};

use crate::dataset::Dataset;
use crate::design::{DesignMatrix, Projector};
use crate::error::{OlivaError, Result};
use crate::solver::penalized_projected_solve;

/// Fitted structural regression.
#[derive(Debug, Clone)]
pub struct StructuralFit {
    pub(crate) coef: DVector<f64>,
    pub(crate) fitted: DVector<f64>,
    pub(crate) lambda: f64,
    pub(crate) condition: f64,
    pub(crate) p_basis: DesignMatrix,
}

impl StructuralFit {
    /// Fitted values at the training sample.
    pub fn fitted(&self) -> &DVector<f64> {
        &self.fitted
    }

    /// Coefficients on the regressor sieve.
    pub fn coef(&self) -> &DVector<f64> {
        &self.coef
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn condition(&self) -> f64 {
        self.condition
    }

    pub fn p_basis(&self) -> &DesignMatrix {
        &self.p_basis
    }
}

/// Estimate the structural fit on the design pair `(p, q)` at penalty
/// `lambda`.
pub fn estimate_g(
    data: &Dataset,
    p: &DesignMatrix,
    q: &DesignMatrix,
    lambda: f64,
) -> Result<StructuralFit> {
    let n = data.n();
    if p.n() != n || q.n() != n {
        return Err(OlivaError::ShapeMismatch(
            "designs and sample differ in length".into(),
        ));
    }
    let proj_q = Projector::from_matrix(q.values())?;
    let y = DMatrix::from_columns(&[data.y().clone()]);
    let sol = penalized_projected_solve(p.values(), &proj_q, &y, lambda)?;
    let coef = DVector::from_column_slice(sol.coef.as_slice());
    let fitted = p.values() * &coef;
    Ok(StructuralFit {
        coef,
        fitted,
        lambda,
        condition: sol.condition,
        p_basis: p.clone(),
    })
}

/// Evaluate the structural fit at new regressor values.
pub fn evaluate_g(
    fit: &StructuralFit,
    controls_new: &DMatrix<f64>,
    endogenous_new: &DMatrix<f64>,
) -> Result<DVector<f64>> {
    let (rows, extrapolated) = fit.p_basis.evaluate(controls_new, endogenous_new)?;
    if extrapolated > 0 {
        log::warn!(
            "{extrapolated} evaluation point(s) outside the structural training range; spline values extrapolated linearly"
        );
    }
    Ok(&rows * &fit.coef)
}
