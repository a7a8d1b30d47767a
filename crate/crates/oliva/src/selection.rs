//! Generalized cross-validation over the tuning triple `{j, c, lambda}`.
//!
//! For a linear smoother `L` with fitted values `yhat = L y` the criterion is
//!
//! ```text
//! GCV = (1/n) sum_i ((y_i - yhat_i) / (1 - tr(L)/n))^2 .
//! ```
//!
//! For the IV smoother `L = X (H'X)^{-1} H'` the trace is exactly the number
//! of regressors `p` by cyclicity, so with `p` fixed the criterion ranks
//! penalties by residual sum of squares; the criterion is still computed
//! verbatim. For the structural smoother `L = P B^{-1} P' Pi_Q` the trace is
//! `tr(B^{-1} P' Pi_Q P)`, evaluated without materializing the `n x n`
//! smoother.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::dataset::Dataset;
use crate::design::{sieve_design, DesignMatrix, KnotRule, Projector};
use crate::error::{OlivaError, Result};
use crate::first_stage::{FirstStageWorkspace, TuningTriple};
use crate::solver::solve_spd;
use crate::tsiv::linear_iv;

/// Which pipeline the smoother belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum GcvTarget {
    Tsiv,
    Structural,
}

/// Search grid over the tuning triple.
#[derive(Debug, Clone)]
pub struct GcvGrid {
    pub j_values: Vec<usize>,
    pub c_values: Vec<f64>,
    pub lambda_values: Vec<f64>,
    pub target: GcvTarget,
    pub knot_rule: KnotRule,
}

/// Ten log-spaced penalties between 1e-8 and 1e-1.
pub fn default_lambda_grid() -> Vec<f64> {
    (0..10)
        .map(|i| 10f64.powf(-8.0 + 7.0 * i as f64 / 9.0))
        .collect()
}

impl GcvGrid {
    pub fn default_for(target: GcvTarget) -> Self {
        Self {
            j_values: vec![4, 5, 6, 7],
            c_values: vec![1.0, 1.5, 2.0, 2.5, 3.0],
            lambda_values: default_lambda_grid(),
            target,
            knot_rule: KnotRule::default(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.j_values.is_empty() || self.c_values.is_empty() || self.lambda_values.is_empty() {
            return Err(OlivaError::DegenerateInput(
                "grid lists must be non-empty".into(),
            ));
        }
        if self.lambda_values.iter().any(|&l| l <= 0.0 || l.is_nan()) {
            return Err(OlivaError::DegenerateInput(
                "all grid penalties must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// One evaluated grid point.
#[derive(Debug, Clone, serde::Serialize)]
pub struct GcvEntry {
    pub tau: TuningTriple,
    pub score: f64,
    pub effective_df: f64,
}

/// Grid-search result: the chosen triple and the full score table.
#[derive(Debug, Clone, serde::Serialize)]
pub struct GcvResult {
    pub chosen: TuningTriple,
    pub table: Vec<GcvEntry>,
}

/// GCV residual criterion; `v_tau` is the smoother trace.
pub(crate) fn gcv_residual_score(
    y: &nalgebra::DVector<f64>,
    yhat: &nalgebra::DVector<f64>,
    v_tau: f64,
) -> Result<f64> {
    let n = y.len();
    if v_tau / n as f64 >= 1.0 {
        return Err(OlivaError::DegenerateTrace { v_tau, n });
    }
    let denom = 1.0 - v_tau / n as f64;
    let mut acc = 0.0;
    for i in 0..n {
        let r = (y[i] - yhat[i]) / denom;
        acc += r * r;
    }
    Ok(acc / n as f64)
}

fn build_pair(
    data: &Dataset,
    tau: &TuningTriple,
    rule: KnotRule,
) -> Result<(DesignMatrix, DesignMatrix)> {
    let p = sieve_design(data.controls(), data.endogenous(), tau.k(), rule)?;
    let q = sieve_design(data.controls(), data.instruments(), tau.j, rule)?;
    Ok((p, q))
}

fn tsiv_entry(
    data: &Dataset,
    ws: &FirstStageWorkspace,
    x: &DMatrix<f64>,
    lambda: f64,
) -> Result<(f64, f64)> {
    let h = ws.instrument_matrix(lambda)?;
    let beta = linear_iv(data.y(), x, &h)?;
    let yhat = x * beta;
    // tr(X (H'X)^{-1} H') = tr((H'X)^{-1} H'X) = p.
    let v_tau = x.ncols() as f64;
    Ok((gcv_residual_score(data.y(), &yhat, v_tau)?, v_tau))
}

fn structural_entry(
    data: &Dataset,
    p: &DesignMatrix,
    proj_q: &Projector,
    lambda: f64,
) -> Result<(f64, f64)> {
    let u = proj_q.orthonormal_basis();
    let c = u.transpose() * p.values();
    let s = c.transpose() * &c;
    let gram = &s + p.values().transpose() * p.values() * lambda;
    let rhs = c.transpose() * (u.transpose() * data.y());
    let sol = solve_spd(gram.clone(), &DMatrix::from_columns(&[rhs]))?;
    let coef = sol.coef.column(0).into_owned();
    let yhat = p.values() * coef;
    let trace_sol = solve_spd(gram, &s)?;
    let v_tau = trace_sol.coef.trace();
    Ok((gcv_residual_score(data.y(), &yhat, v_tau)?, v_tau))
}

/// GCV score of the full TSIV pipeline at `tau`; infinite when the fit fails.
pub fn gcv_score_tsiv(data: &Dataset, tau: &TuningTriple) -> f64 {
    match (|| -> Result<f64> {
        let (p, q) = build_pair(data, tau, KnotRule::default())?;
        let ws = FirstStageWorkspace::new(data, &p, &q, None)?;
        let x = data.x();
        Ok(tsiv_entry(data, &ws, &x, tau.lambda)?.0)
    })() {
        Ok(score) => score,
        Err(err) => {
            log::debug!("TSIV GCV at {tau:?} failed: {err}");
            f64::INFINITY
        }
    }
}

/// GCV score of the structural smoother at `tau`; infinite when the fit
/// fails.
pub fn gcv_score_structural(data: &Dataset, tau: &TuningTriple) -> f64 {
    match (|| -> Result<f64> {
        let (p, q) = build_pair(data, tau, KnotRule::default())?;
        let proj_q = Projector::from_matrix(q.values())?;
        Ok(structural_entry(data, &p, &proj_q, tau.lambda)?.0)
    })() {
        Ok(score) => score,
        Err(err) => {
            log::debug!("structural GCV at {tau:?} failed: {err}");
            f64::INFINITY
        }
    }
}

/// Exhaustive deterministic grid search.
///
/// Ties are broken toward larger `lambda`, then smaller `j`, then smaller
/// `c`; the full score table is retained for reporting.
pub fn select(data: &Dataset, grid: &GcvGrid) -> Result<GcvResult> {
    grid.validate()?;
    let pairs: Vec<(usize, f64)> = grid
        .j_values
        .iter()
        .flat_map(|&j| grid.c_values.iter().map(move |&c| (j, c)))
        .collect();

    let per_pair: Vec<Vec<GcvEntry>> = pairs
        .par_iter()
        .map(|&(j, c)| {
            let mut entries = Vec::with_capacity(grid.lambda_values.len());
            let built = TuningTriple::new(j, c, grid.lambda_values[0])
                .and_then(|tau| build_pair(data, &tau, grid.knot_rule));
            match built {
                Ok((p, q)) => {
                    let x = data.x();
                    let ws = FirstStageWorkspace::new(data, &p, &q, None);
                    let proj_q = Projector::from_matrix(q.values());
                    for &lambda in &grid.lambda_values {
                        let tau = TuningTriple { j, c, lambda };
                        let outcome = match grid.target {
                            GcvTarget::Tsiv => ws
                                .as_ref()
                                .map_err(|e| e.clone())
                                .and_then(|w| tsiv_entry(data, w, &x, lambda)),
                            GcvTarget::Structural => proj_q
                                .as_ref()
                                .map_err(|e| e.clone())
                                .and_then(|pq| structural_entry(data, &p, pq, lambda)),
                        };
                        let (score, effective_df) = match outcome {
                            Ok(pair) => pair,
                            Err(err) => {
                                log::debug!("grid point {tau:?} failed: {err}");
                                (f64::INFINITY, f64::NAN)
                            }
                        };
                        entries.push(GcvEntry {
                            tau,
                            score,
                            effective_df,
                        });
                    }
                }
                Err(err) => {
                    log::debug!("design for (j={j}, c={c}) failed: {err}");
                    for &lambda in &grid.lambda_values {
                        entries.push(GcvEntry {
                            tau: TuningTriple { j, c, lambda },
                            score: f64::INFINITY,
                            effective_df: f64::NAN,
                        });
                    }
                }
            }
            entries
        })
        .collect();

    let table: Vec<GcvEntry> = per_pair.into_iter().flatten().collect();
    let mut best: Option<&GcvEntry> = None;
    for entry in &table {
        if !entry.score.is_finite() {
            continue;
        }
        best = Some(match best {
            None => entry,
            Some(cur) => {
                if prefer(entry, cur) {
                    entry
                } else {
                    cur
                }
            }
        });
    }
    let chosen = best.ok_or(OlivaError::AllScoresInfinite)?.tau;
    Ok(GcvResult { chosen, table })
}

/// True when `a` should replace `b` as the current best grid point.
fn prefer(a: &GcvEntry, b: &GcvEntry) -> bool {
    if a.score != b.score {
        return a.score < b.score;
    }
    if a.tau.lambda != b.tau.lambda {
        return a.tau.lambda > b.tau.lambda;
    }
    if a.tau.j != b.tau.j {
        return a.tau.j < b.tau.j;
    }
    a.tau.c < b.tau.c
}
