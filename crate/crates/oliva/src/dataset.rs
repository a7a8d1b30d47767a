//! Observation container shared by every estimator in the crate.

use nalgebra::{DMatrix, DVector};

use crate::error::{OlivaError, Result};

/// An i.i.d. sample split into outcome, exogenous controls (including the
/// intercept), endogenous regressors and excluded instruments.
///
/// The regressor vector of the second-step IV regression is `x = [controls |
/// endogenous]`; the instrument basis is built from `[controls | instruments]`.
#[derive(Debug, Clone)]
pub struct Dataset {
    y: DVector<f64>,
    controls: DMatrix<f64>,
    endogenous: DMatrix<f64>,
    instruments: DMatrix<f64>,
}

impl Dataset {
    pub fn new(
        y: DVector<f64>,
        controls: DMatrix<f64>,
        endogenous: DMatrix<f64>,
        instruments: DMatrix<f64>,
    ) -> Result<Self> {
        let n = y.len();
        if n == 0 {
            return Err(OlivaError::InsufficientData {
                required: 1,
                actual: 0,
            });
        }
        for (name, m) in [
            ("controls", &controls),
            ("endogenous", &endogenous),
            ("instruments", &instruments),
        ] {
            if m.nrows() != n {
                return Err(OlivaError::ShapeMismatch(format!(
                    "{name} has {} rows, outcome has {n}",
                    m.nrows()
                )));
            }
        }
        if endogenous.ncols() == 0 {
            return Err(OlivaError::ShapeMismatch(
                "at least one endogenous regressor is required".into(),
            ));
        }
        let finite = y.iter().all(|v| v.is_finite())
            && controls.iter().all(|v| v.is_finite())
            && endogenous.iter().all(|v| v.is_finite())
            && instruments.iter().all(|v| v.is_finite());
        if !finite {
            return Err(OlivaError::DegenerateInput(
                "dataset contains non-finite values".into(),
            ));
        }
        Ok(Self {
            y,
            controls,
            endogenous,
            instruments,
        })
    }

    /// Sample with an intercept as the only control.
    pub fn with_intercept_only(
        y: DVector<f64>,
        endogenous: DMatrix<f64>,
        instruments: DMatrix<f64>,
    ) -> Result<Self> {
        let n = y.len();
        Self::new(
            y,
            DMatrix::from_element(n, 1, 1.0),
            endogenous,
            instruments,
        )
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    /// Exogenous controls `x1` (first columns of the regressor vector).
    pub fn controls(&self) -> &DMatrix<f64> {
        &self.controls
    }

    /// Endogenous regressors `x2`.
    pub fn endogenous(&self) -> &DMatrix<f64> {
        &self.endogenous
    }

    /// Raw excluded instruments `z2`.
    pub fn instruments(&self) -> &DMatrix<f64> {
        &self.instruments
    }

    /// Number of regressors `p = p1 + p2`.
    pub fn p(&self) -> usize {
        self.controls.ncols() + self.endogenous.ncols()
    }

    /// Full regressor matrix `[controls | endogenous]`.
    pub fn x(&self) -> DMatrix<f64> {
        let n = self.n();
        let p1 = self.controls.ncols();
        let p2 = self.endogenous.ncols();
        let mut x = DMatrix::zeros(n, p1 + p2);
        x.view_mut((0, 0), (n, p1)).copy_from(&self.controls);
        x.view_mut((0, p1), (n, p2)).copy_from(&self.endogenous);
        x
    }
}
