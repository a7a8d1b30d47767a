//! Second-step linear IV estimation with influence-function based inference.
//!
//! The coefficient solves `(H'X) beta = H'Y` where `H` is the fitted
//! instrument. Its asymptotic variance is the sandwich
//!
//! ```text
//! Sigma = E_n[h x']^{-1} E_n[m m'] E_n[x h']^{-1}
//! ```
//!
//! built from the influence function
//!
//! ```text
//! m = (y - x'beta) h - (g(x) - x'beta)(h - x),
//! ```
//!
//! whose second term carries the effect of having estimated the instrument;
//! it vanishes identically when the structural fit is linear.

use nalgebra::{DMatrix, DVector};

use crate::dataset::Dataset;
use crate::error::{OlivaError, Result};
use crate::first_stage::{InstrumentFit, TuningTriple};
use crate::stats::normal_two_sided_quantile;
use crate::structural::StructuralFit;

/// Condition-number ceiling for the instrument cross moment `H'X`; beyond it
/// the instrument is declared too weak to invert.
pub const INSTRUMENT_CONDITION_LIMIT: f64 = 1e10;

/// Full second-step output.
#[derive(Debug, Clone)]
pub struct TsivFit {
    pub beta: DVector<f64>,
    /// Sandwich estimate of the asymptotic variance of `sqrt(n)(beta - b)`.
    pub sigma: DMatrix<f64>,
    /// Standard errors `sqrt(diag(sigma) / n)`.
    pub se: DVector<f64>,
    /// Two-sided confidence intervals at `level`.
    pub ci: Vec<(f64, f64)>,
    pub level: f64,
    pub n: usize,
    pub tuning: Option<TuningTriple>,
    /// Condition number of `H'X`.
    pub condition: f64,
}

/// Rowwise influence function values, one row per observation.
#[derive(Debug, Clone)]
pub struct InfluenceMatrix {
    values: DMatrix<f64>,
}

impl InfluenceMatrix {
    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    /// Column means; at the fitted coefficient the first-term moment
    /// `E_n[h (y - x'beta)]` is zero by construction.
    pub fn column_means(&self) -> DVector<f64> {
        let n = self.values.nrows() as f64;
        DVector::from_iterator(
            self.values.ncols(),
            self.values.column_iter().map(|c| c.sum() / n),
        )
    }
}

/// Linear IV of `y` on `x` using instrument matrix `h`.
pub fn linear_iv(y: &DVector<f64>, x: &DMatrix<f64>, h: &DMatrix<f64>) -> Result<DVector<f64>> {
    let (hx, condition) = cross_moment(x, h)?;
    if condition > INSTRUMENT_CONDITION_LIMIT {
        return Err(OlivaError::InstrumentRankDeficient {
            condition,
            limit: INSTRUMENT_CONDITION_LIMIT,
        });
    }
    let rhs = h.transpose() * y;
    let beta = hx
        .lu()
        .solve(&rhs)
        .ok_or(OlivaError::InstrumentRankDeficient {
            condition,
            limit: INSTRUMENT_CONDITION_LIMIT,
        })?;
    Ok(beta)
}

fn cross_moment(x: &DMatrix<f64>, h: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    if h.nrows() != x.nrows() {
        return Err(OlivaError::ShapeMismatch(format!(
            "instrument has {} rows, regressors {}",
            h.nrows(),
            x.nrows()
        )));
    }
    if h.ncols() != x.ncols() {
        return Err(OlivaError::ShapeMismatch(format!(
            "just-identified IV needs as many instruments as regressors, got {} and {}",
            h.ncols(),
            x.ncols()
        )));
    }
    let hx = h.transpose() * x;
    let svd = hx.clone().svd(false, false);
    let max = svd.singular_values.amax();
    let min = svd
        .singular_values
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let condition = if min > 0.0 { max / min } else { f64::INFINITY };
    Ok((hx, condition))
}

/// Second-step coefficient for a fitted instrument.
pub fn fit_tsiv(data: &Dataset, instrument: &InstrumentFit) -> Result<DVector<f64>> {
    linear_iv(data.y(), &data.x(), instrument.fitted())
}

/// Influence function rows from raw fitted values.
pub fn influence_from_values(
    y: &DVector<f64>,
    x: &DMatrix<f64>,
    h: &DMatrix<f64>,
    beta: &DVector<f64>,
    g: &DVector<f64>,
) -> Result<InfluenceMatrix> {
    let n = y.len();
    let p = x.ncols();
    if h.nrows() != n || h.ncols() != p || g.len() != n || beta.len() != p {
        return Err(OlivaError::ShapeMismatch(
            "influence inputs must share the sample size and regressor count".into(),
        ));
    }
    let mut values = DMatrix::zeros(n, p);
    for i in 0..n {
        let xb: f64 = (0..p).map(|j| x[(i, j)] * beta[j]).sum();
        let u = y[i] - xb;
        let nonlin = g[i] - xb;
        for j in 0..p {
            values[(i, j)] = u * h[(i, j)] - nonlin * (h[(i, j)] - x[(i, j)]);
        }
    }
    Ok(InfluenceMatrix { values })
}

/// Influence function rows for fitted first-stage and structural estimates.
pub fn influence(
    data: &Dataset,
    beta: &DVector<f64>,
    instrument: &InstrumentFit,
    structural: &StructuralFit,
) -> Result<InfluenceMatrix> {
    influence_from_values(
        data.y(),
        &data.x(),
        instrument.fitted(),
        beta,
        structural.fitted(),
    )
}

/// Sandwich covariance `E_n[h x']^{-1} E_n[m m'] E_n[x h']^{-1}`.
pub fn covariance(
    data: &Dataset,
    instrument_values: &DMatrix<f64>,
    infl: &InfluenceMatrix,
) -> Result<DMatrix<f64>> {
    let n = data.n() as f64;
    let x = data.x();
    let (hx, condition) = cross_moment(&x, instrument_values)?;
    if condition > INSTRUMENT_CONDITION_LIMIT {
        return Err(OlivaError::InstrumentRankDeficient {
            condition,
            limit: INSTRUMENT_CONDITION_LIMIT,
        });
    }
    let a = hx / n;
    let meat = infl.values().transpose() * infl.values() / n;
    let a_inv = a
        .try_inverse()
        .ok_or(OlivaError::InstrumentRankDeficient {
            condition,
            limit: INSTRUMENT_CONDITION_LIMIT,
        })?;
    let sigma = &a_inv * meat * a_inv.transpose();
    // Exact symmetry: average away the last bits of roundoff.
    Ok((&sigma + sigma.transpose()) * 0.5)
}

/// Two-sided normal confidence intervals `beta_i ± z se_i`.
pub fn confidence_intervals(
    beta: &DVector<f64>,
    se: &DVector<f64>,
    level: f64,
) -> Result<Vec<(f64, f64)>> {
    if !(0.0..1.0).contains(&level) {
        return Err(OlivaError::InvalidLevel(level));
    }
    if beta.len() != se.len() {
        return Err(OlivaError::ShapeMismatch(
            "coefficients and standard errors differ in length".into(),
        ));
    }
    let z = if level == 0.0 {
        0.0
    } else {
        normal_two_sided_quantile(level)
    };
    Ok(beta
        .iter()
        .zip(se.iter())
        .map(|(&b, &s)| (b - z * s, b + z * s))
        .collect())
}

/// Run the full second step: coefficient, sandwich covariance, standard
/// errors and confidence intervals.
pub fn estimate(
    data: &Dataset,
    instrument: &InstrumentFit,
    structural: &StructuralFit,
    level: f64,
    tuning: Option<TuningTriple>,
) -> Result<TsivFit> {
    let beta = fit_tsiv(data, instrument)?;
    let infl = influence(data, &beta, instrument, structural)?;
    let sigma = covariance(data, instrument.fitted(), &infl)?;
    let n = data.n();
    let se = DVector::from_iterator(
        beta.len(),
        sigma.diagonal().iter().map(|&v| (v.max(0.0) / n as f64).sqrt()),
    );
    let ci = confidence_intervals(&beta, &se, level)?;
    let (_, condition) = cross_moment(&data.x(), instrument.fitted())?;
    Ok(TsivFit {
        beta,
        sigma,
        se,
        ci,
        level,
        n,
        tuning,
        condition,
    })
}
