//! Regression-based Hausman exogeneity tests.
//!
//! Both variants regress the endogenous variables on controls plus a set of
//! instruments, keep the residuals `vhat`, and run OLS of the outcome on the
//! regressors augmented with `vhat`. Exogeneity is a zero coefficient on
//! `vhat`: a plain t-test (scalar case) or Wald test (multivariate case)
//! whose standard errors need no correction for the estimated residuals.
//!
//! The robust variant instruments with the fitted first stage `h2(z)`, so
//! OLS and IV estimate the same object under exogeneity even when the linear
//! model is misspecified; the standard variant uses the raw excluded
//! instruments and is valid only under correct linear specification.

use nalgebra::{DMatrix, DVector};

use crate::dataset::Dataset;
use crate::design::Projector;
use crate::error::{OlivaError, Result};
use crate::first_stage::InstrumentFit;
use crate::stats::{chi_square_p, two_sided_p};

/// Which first-stage residuals the augmented regression used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum HausmanVariant {
    Robust,
    Standard,
}

/// Result of an augmented-regression exogeneity test.
#[derive(Debug, Clone, serde::Serialize)]
pub struct HausmanResult {
    /// t statistic for one endogenous regressor, Wald statistic otherwise.
    pub statistic: f64,
    pub p_value: f64,
    /// Coefficients on the first-stage residuals.
    pub rho_hat: Vec<f64>,
    /// Their standard errors.
    pub se_rho: Vec<f64>,
    pub variant: HausmanVariant,
    pub n: usize,
    /// Degrees of freedom of the Wald limit (number of endogenous columns).
    pub df: usize,
    /// True when heteroskedasticity-robust standard errors were requested.
    pub hc_robust: bool,
}

/// Robust Hausman test: residualize the endogenous block on controls and the
/// fitted instrument `h2(z)`, then t-test (or Wald-test) the residual
/// coefficients in the augmented outcome regression.
pub fn robust_hausman(data: &Dataset, instrument: &InstrumentFit) -> Result<HausmanResult> {
    robust_hausman_with(data, instrument, false)
}

/// Robust Hausman test with optional heteroskedasticity-robust standard
/// errors (classical errors are the default; the asymptotic validity result
/// is stated for them).
pub fn robust_hausman_with(
    data: &Dataset,
    instrument: &InstrumentFit,
    hc_robust: bool,
) -> Result<HausmanResult> {
    robust_hausman_from_h2(data, &instrument.h2(), hc_robust)
}

/// Robust variant from a raw fitted-instrument block (harness entry point).
pub(crate) fn robust_hausman_from_h2(
    data: &Dataset,
    h2: &DMatrix<f64>,
    hc_robust: bool,
) -> Result<HausmanResult> {
    if h2.nrows() != data.n() {
        return Err(OlivaError::ShapeMismatch(
            "instrument fit and sample differ in length".into(),
        ));
    }
    let stage = hstack(data.controls(), h2);
    augmented_test(data, &stage, HausmanVariant::Robust, hc_robust)
}

/// Classical regression-based Hausman test with the raw excluded instruments
/// in the first stage.
pub fn standard_hausman(data: &Dataset) -> Result<HausmanResult> {
    standard_hausman_with(data, false)
}

pub fn standard_hausman_with(data: &Dataset, hc_robust: bool) -> Result<HausmanResult> {
    if data.instruments().ncols() == 0 {
        return Err(OlivaError::ShapeMismatch(
            "standard Hausman test needs at least one excluded instrument".into(),
        ));
    }
    let stage = hstack(data.controls(), data.instruments());
    augmented_test(data, &stage, HausmanVariant::Standard, hc_robust)
}

fn hstack(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let mut out = DMatrix::zeros(n, a.ncols() + b.ncols());
    out.view_mut((0, 0), (n, a.ncols())).copy_from(a);
    out.view_mut((0, a.ncols()), (n, b.ncols())).copy_from(b);
    out
}

fn augmented_test(
    data: &Dataset,
    first_stage_design: &DMatrix<f64>,
    variant: HausmanVariant,
    hc_robust: bool,
) -> Result<HausmanResult> {
    let n = data.n();
    let p2 = data.endogenous().ncols();

    // First-stage residuals.
    let proj = Projector::from_matrix(first_stage_design)?;
    let vhat = data.endogenous() - proj.apply(data.endogenous())?;

    // Augmented design [x1 x2 vhat].
    let x = data.x();
    let a = hstack(&x, &vhat);
    let k = a.ncols();
    if n <= k {
        return Err(OlivaError::InsufficientData {
            required: k + 1,
            actual: n,
        });
    }

    let gram = a.transpose() * &a;
    let svd = gram.clone().svd(false, false);
    let max = svd.singular_values.amax();
    let min = svd
        .singular_values
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if min <= 0.0 || min.is_nan() || max / min > 1e12 {
        return Err(OlivaError::CollinearAugmentation);
    }
    let gram_inv = gram
        .try_inverse()
        .ok_or(OlivaError::CollinearAugmentation)?;
    let theta = &gram_inv * (a.transpose() * data.y());
    let resid = data.y() - &a * &theta;
    let rss: f64 = resid.iter().map(|r| r * r).sum();

    let cov = if hc_robust {
        let mut meat = DMatrix::zeros(k, k);
        for i in 0..n {
            let row = a.row(i).transpose();
            meat += &row * row.transpose() * (resid[i] * resid[i]);
        }
        &gram_inv * meat * &gram_inv
    } else {
        let sigma2 = rss / (n - k) as f64;
        &gram_inv * sigma2
    };

    let rho_hat: Vec<f64> = (0..p2).map(|j| theta[k - p2 + j]).collect();
    let se_rho: Vec<f64> = (0..p2)
        .map(|j| cov[(k - p2 + j, k - p2 + j)].sqrt())
        .collect();

    let (statistic, p_value) = if p2 == 1 {
        let t = rho_hat[0] / se_rho[0];
        (t, two_sided_p(t))
    } else {
        let rho = DVector::from_vec(rho_hat.clone());
        let block = cov.view((k - p2, k - p2), (p2, p2)).into_owned();
        let block_inv = block
            .try_inverse()
            .ok_or(OlivaError::CollinearAugmentation)?;
        let w = (rho.transpose() * block_inv * rho)[(0, 0)];
        (w, chi_square_p(w, p2))
    };

    Ok(HausmanResult {
        statistic,
        p_value,
        rho_hat,
        se_rho,
        variant,
        n,
        df: p2,
        hc_robust,
    })
}
