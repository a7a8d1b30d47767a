//! Monte Carlo harness: data generating processes, replication cells and
//! the size-corrected power computation.
//!
//! The three DGPs share one template: `(x, d)` bivariate standard normal
//! with correlation `gamma`, instrument `z = s(d)`, reduced-form error
//! `v = x - gamma * s^{-1}(z)`, structural error `eps = rho_eps * v + zeta`
//! with `rho_eps = rho / (1 - gamma^2)`, and outcome
//! `y = sum_{j=1..p} H_j(x) + eps` built from probabilists' Hermite
//! polynomials. The structural function is linear for DGP1 (`p = 1`,
//! `s(d) = d`), cubic-instrument for DGP2 (`p = 2`, `s(d) = d^3`) and
//! logistic-instrument for DGP3 (`p = 3`, `s(d) = exp(d)/(1+exp(d))`).
//! However nonlinear the outcome, the slope of its best linear
//! approximation is 1 by Hermite orthogonality, so every estimator is judged
//! against a true slope of one.

mod rng;

pub use rng::{derive_seed, NormalSource};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::dataset::Dataset;
use crate::error::{OlivaError, Result};
use crate::exogeneity::{robust_hausman_from_h2, standard_hausman};
use crate::first_stage::FirstStageWorkspace;
use crate::selection::{default_lambda_grid, gcv_residual_score};
use crate::design::{sieve_design, KnotRule};
use crate::stats::normal_two_sided_quantile;
use crate::structural::estimate_g;
use crate::tsiv::{covariance, influence_from_values, linear_iv};

/// The three reference data generating processes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Dgp {
    One,
    Two,
    Three,
}

impl Dgp {
    pub fn from_index(i: u8) -> Result<Self> {
        match i {
            1 => Ok(Dgp::One),
            2 => Ok(Dgp::Two),
            3 => Ok(Dgp::Three),
            other => Err(OlivaError::InvalidDgp(format!(
                "dgp must be 1, 2 or 3, got {other}"
            ))),
        }
    }

    pub fn index(&self) -> u8 {
        match self {
            Dgp::One => 1,
            Dgp::Two => 2,
            Dgp::Three => 3,
        }
    }

    /// Number of Hermite terms in the structural function.
    pub fn hermite_order(&self) -> usize {
        self.index() as usize
    }

    /// Instrument transform `s`.
    pub fn s(&self, d: f64) -> f64 {
        match self {
            Dgp::One => d,
            Dgp::Two => d * d * d,
            Dgp::Three => {
                let e = d.exp();
                e / (1.0 + e)
            }
        }
    }

    /// Inverse transform `s^{-1}`.
    pub fn s_inv(&self, z: f64) -> f64 {
        match self {
            Dgp::One => z,
            Dgp::Two => z.cbrt(),
            Dgp::Three => z.ln() - (1.0 - z).ln(),
        }
    }
}

/// One Monte Carlo cell configuration.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct DgpConfig {
    pub dgp: Dgp,
    pub rho: f64,
    pub gamma: f64,
    pub n: usize,
    pub seed: u64,
}

impl DgpConfig {
    fn validate(&self) -> Result<()> {
        if self.gamma.abs() >= 1.0 || self.gamma.is_nan() || self.gamma == 0.0 {
            return Err(OlivaError::InvalidDgp(format!(
                "gamma must lie in (-1, 1) and be nonzero, got {}",
                self.gamma
            )));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return Err(OlivaError::InvalidDgp(format!(
                "rho must lie in [0, 1), got {}",
                self.rho
            )));
        }
        if self.n == 0 {
            return Err(OlivaError::InvalidDgp("sample size must be positive".into()));
        }
        Ok(())
    }

    /// Reduced-form endogeneity coefficient `rho / (1 - gamma^2)`.
    pub fn rho_epsilon(&self) -> f64 {
        self.rho / (1.0 - self.gamma * self.gamma)
    }
}

/// Probabilists' Hermite polynomial, implemented up to degree 3.
pub fn hermite(j: usize, x: f64) -> Result<f64> {
    match j {
        0 => Ok(1.0),
        1 => Ok(x),
        2 => Ok(x * x - 1.0),
        3 => Ok(x * x * x - 3.0 * x),
        other => Err(OlivaError::UnsupportedDegree(other)),
    }
}

/// Draw one sample from the configured DGP; deterministic given `cfg.seed`.
pub fn gen_dgp(cfg: &DgpConfig) -> Result<Dataset> {
    cfg.validate()?;
    let n = cfg.n;
    let gamma = cfg.gamma;
    let rho_eps = cfg.rho_epsilon();
    let tail = (1.0 - gamma * gamma).sqrt();
    let mut src = NormalSource::new(cfg.seed);
    let mut x2 = DMatrix::zeros(n, 1);
    let mut z = DMatrix::zeros(n, 1);
    let mut y = DVector::zeros(n);
    for i in 0..n {
        let d = src.next_standard_normal();
        let w = src.next_standard_normal();
        let zeta = src.next_standard_normal();
        let x = gamma * d + tail * w;
        let v = x - gamma * d;
        let eps = rho_eps * v + zeta;
        let mut g = 0.0;
        for j in 1..=cfg.dgp.hermite_order() {
            g += hermite(j, x).expect("degree at most 3");
        }
        x2[(i, 0)] = x;
        z[(i, 0)] = cfg.dgp.s(d);
        y[i] = g + eps;
    }
    Dataset::with_intercept_only(y, x2, z)
}

/// Which estimators a cell should run.
#[derive(Debug, Clone, Copy)]
pub struct EstimatorSet {
    pub ols: bool,
    pub iv: bool,
    pub tsiv: bool,
    /// Hausman tests require the TSIV first stage.
    pub hausman: bool,
}

impl Default for EstimatorSet {
    fn default() -> Self {
        Self {
            ols: true,
            iv: true,
            tsiv: true,
            hausman: true,
        }
    }
}

/// Sieve sizes and penalty search for the replication pipeline.
///
/// The first stage uses `instrument_block` spline columns for the instrument
/// and `regressor_block` for the endogenous regressor; the structural fit
/// swaps the two block sizes and reuses the selected penalty, scaled by
/// `lambda_multiplier`.
#[derive(Debug, Clone)]
pub struct McTuning {
    pub instrument_block: usize,
    pub regressor_block: usize,
    pub lambda_grid: Vec<f64>,
    pub lambda_multiplier: f64,
    pub knot_rule: KnotRule,
}

impl Default for McTuning {
    fn default() -> Self {
        Self {
            instrument_block: 5,
            regressor_block: 11,
            lambda_grid: default_lambda_grid(),
            lambda_multiplier: 1.0,
            knot_rule: KnotRule::default(),
        }
    }
}

/// Cell-level options.
#[derive(Debug, Clone)]
pub struct McOptions {
    pub tuning: McTuning,
    /// Confidence level for the coverage column.
    pub ci_level: f64,
    /// Nominal size for the Hausman rejection columns.
    pub test_level: f64,
}

impl Default for McOptions {
    fn default() -> Self {
        Self {
            tuning: McTuning::default(),
            ci_level: 0.95,
            test_level: 0.05,
        }
    }
}

/// Bias and mean squared error of one estimator with Monte Carlo standard
/// errors.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct EstimatorCell {
    pub bias: f64,
    pub mse: f64,
    pub bias_se: f64,
    pub mse_se: f64,
}

/// A proportion with its Monte Carlo standard error.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct RateCell {
    pub rate: f64,
    pub se: f64,
}

/// Aggregated results of one Monte Carlo cell.
#[derive(Debug, Clone, serde::Serialize)]
pub struct McSummary {
    pub dgp: u8,
    pub rho: f64,
    pub gamma: f64,
    pub n: usize,
    pub replications: usize,
    pub failures: usize,
    /// False when more than 1% of replications failed.
    pub valid: bool,
    pub ols: Option<EstimatorCell>,
    pub iv: Option<EstimatorCell>,
    pub tsiv: Option<EstimatorCell>,
    pub coverage: Option<RateCell>,
    pub hausman_standard: Option<RateCell>,
    pub hausman_robust: Option<RateCell>,
    /// Absolute standard-variant statistics, one per successful replication.
    #[serde(skip)]
    pub standard_stats: Vec<f64>,
    /// Absolute robust-variant statistics, one per successful replication.
    #[serde(skip)]
    pub robust_stats: Vec<f64>,
}

struct RepOutcome {
    ols_err: Option<f64>,
    iv_err: Option<f64>,
    tsiv_err: Option<f64>,
    covered: Option<bool>,
    standard_stat: Option<f64>,
    robust_stat: Option<f64>,
}

/// Neumaier compensated accumulator.
#[derive(Default, Clone, Copy)]
struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

fn moments(values: impl Iterator<Item = f64> + Clone, count: usize) -> (f64, f64) {
    let mut sum = CompensatedSum::default();
    for v in values.clone() {
        sum.add(v);
    }
    let mean = sum.value() / count as f64;
    let mut var = CompensatedSum::default();
    for v in values {
        var.add((v - mean) * (v - mean));
    }
    (mean, var.value() / count as f64)
}

fn estimator_cell(errors: &[f64]) -> EstimatorCell {
    let r = errors.len();
    let (bias, var_err) = moments(errors.iter().copied(), r);
    let (mse, var_sq) = moments(errors.iter().map(|e| e * e), r);
    EstimatorCell {
        bias,
        mse,
        bias_se: (var_err / r as f64).sqrt(),
        mse_se: (var_sq / r as f64).sqrt(),
    }
}

fn rate_cell(hits: &[bool]) -> RateCell {
    let r = hits.len();
    let rate = hits.iter().filter(|&&b| b).count() as f64 / r as f64;
    RateCell {
        rate,
        se: (rate * (1.0 - rate) / r as f64).sqrt(),
    }
}

/// Run one replication cell with default tuning.
pub fn run_cell(
    cfg: &DgpConfig,
    replications: usize,
    estimators: &EstimatorSet,
    base_seed: u64,
) -> Result<McSummary> {
    run_cell_with(cfg, replications, estimators, base_seed, &McOptions::default())
}

/// Run one replication cell.
///
/// Replications are executed in parallel with positional seed derivation, so
/// the summary is bit-identical for any worker count. Individual replication
/// failures are logged and counted; the cell is flagged invalid when more
/// than 1% fail.
pub fn run_cell_with(
    cfg: &DgpConfig,
    replications: usize,
    estimators: &EstimatorSet,
    base_seed: u64,
    options: &McOptions,
) -> Result<McSummary> {
    if replications == 0 {
        return Err(OlivaError::InvalidDgp(
            "need at least one replication".into(),
        ));
    }
    cfg.validate()?;
    let z_ci = normal_two_sided_quantile(options.ci_level);
    let z_test = normal_two_sided_quantile(1.0 - options.test_level);

    let outcomes: Vec<Result<RepOutcome>> = (0..replications)
        .into_par_iter()
        .map(|rep| {
            let rep_cfg = DgpConfig {
                seed: derive_seed(base_seed, rep as u64, cfg.dgp.index() as u64),
                ..*cfg
            };
            replicate(&rep_cfg, estimators, options, z_ci)
        })
        .collect();

    let mut failures = 0usize;
    let mut ols_errs = Vec::new();
    let mut iv_errs = Vec::new();
    let mut tsiv_errs = Vec::new();
    let mut covered = Vec::new();
    let mut standard_stats = Vec::new();
    let mut robust_stats = Vec::new();
    for (rep, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(o) => {
                if let Some(v) = o.ols_err {
                    ols_errs.push(v);
                }
                if let Some(v) = o.iv_err {
                    iv_errs.push(v);
                }
                if let Some(v) = o.tsiv_err {
                    tsiv_errs.push(v);
                }
                if let Some(v) = o.covered {
                    covered.push(v);
                }
                if let Some(v) = o.standard_stat {
                    standard_stats.push(v);
                }
                if let Some(v) = o.robust_stat {
                    robust_stats.push(v);
                }
            }
            Err(err) => {
                failures += 1;
                log::warn!("replication {rep} failed: {err}");
            }
        }
    }

    let standard_rejections: Vec<bool> = standard_stats.iter().map(|&s| s > z_test).collect();
    let robust_rejections: Vec<bool> = robust_stats.iter().map(|&s| s > z_test).collect();

    Ok(McSummary {
        dgp: cfg.dgp.index(),
        rho: cfg.rho,
        gamma: cfg.gamma,
        n: cfg.n,
        replications,
        failures,
        valid: (failures as f64) <= 0.01 * replications as f64,
        ols: (!ols_errs.is_empty()).then(|| estimator_cell(&ols_errs)),
        iv: (!iv_errs.is_empty()).then(|| estimator_cell(&iv_errs)),
        tsiv: (!tsiv_errs.is_empty()).then(|| estimator_cell(&tsiv_errs)),
        coverage: (!covered.is_empty()).then(|| rate_cell(&covered)),
        hausman_standard: (!standard_rejections.is_empty())
            .then(|| rate_cell(&standard_rejections)),
        hausman_robust: (!robust_rejections.is_empty()).then(|| rate_cell(&robust_rejections)),
        standard_stats,
        robust_stats,
    })
}

fn replicate(
    cfg: &DgpConfig,
    estimators: &EstimatorSet,
    options: &McOptions,
    z_ci: f64,
) -> Result<RepOutcome> {
    let data = gen_dgp(cfg)?;
    let x = data.x();
    let slope_idx = x.ncols() - 1;
    let mut outcome = RepOutcome {
        ols_err: None,
        iv_err: None,
        tsiv_err: None,
        covered: None,
        standard_stat: None,
        robust_stat: None,
    };

    if estimators.ols {
        let beta = linear_iv(data.y(), &x, &x)?;
        outcome.ols_err = Some(beta[slope_idx] - 1.0);
    }

    if estimators.iv {
        let mut hz = DMatrix::from_element(data.n(), 2, 1.0);
        hz.set_column(1, &data.instruments().column(0).into_owned());
        let beta = linear_iv(data.y(), &x, &hz)?;
        outcome.iv_err = Some(beta[slope_idx] - 1.0);
    }

    if estimators.tsiv {
        let tuning = &options.tuning;
        let p_h = sieve_design(
            data.controls(),
            data.endogenous(),
            tuning.regressor_block,
            tuning.knot_rule,
        )?;
        let q_h = sieve_design(
            data.controls(),
            data.instruments(),
            tuning.instrument_block,
            tuning.knot_rule,
        )?;
        let ws = FirstStageWorkspace::new(&data, &p_h, &q_h, None)?;

        // Penalty choice by GCV; the smoother trace equals the number of
        // regressors for every penalty, so the criterion ranks residual sums
        // of squares. Ties break toward the larger penalty.
        let mut best: Option<(f64, f64, DMatrix<f64>, DVector<f64>)> = None;
        for &lambda in &tuning.lambda_grid {
            let attempt = (|| -> Result<(f64, DMatrix<f64>, DVector<f64>)> {
                let h = ws.instrument_matrix(lambda)?;
                let beta = linear_iv(data.y(), &x, &h)?;
                let yhat = &x * &beta;
                let score = gcv_residual_score(data.y(), &yhat, x.ncols() as f64)?;
                Ok((score, h, beta))
            })();
            match attempt {
                Ok((score, h, beta)) => {
                    let replace = match &best {
                        None => true,
                        Some((s, l, _, _)) => score < *s || (score == *s && lambda > *l),
                    };
                    if replace {
                        best = Some((score, lambda, h, beta));
                    }
                }
                Err(err) => log::debug!("penalty {lambda} failed: {err}"),
            }
        }
        let (_, lambda_gcv, mut h, mut beta) =
            best.ok_or(OlivaError::AllScoresInfinite)?;

        let lambda_use = lambda_gcv * tuning.lambda_multiplier;
        if tuning.lambda_multiplier != 1.0 {
            h = ws.instrument_matrix(lambda_use)?;
            beta = linear_iv(data.y(), &x, &h)?;
        }
        outcome.tsiv_err = Some(beta[slope_idx] - 1.0);

        // Structural fit with swapped block sizes and the same penalty.
        let p_g = sieve_design(
            data.controls(),
            data.endogenous(),
            tuning.instrument_block,
            tuning.knot_rule,
        )?;
        let q_g = sieve_design(
            data.controls(),
            data.instruments(),
            tuning.regressor_block,
            tuning.knot_rule,
        )?;
        let g = estimate_g(&data, &p_g, &q_g, lambda_use)?;

        let infl = influence_from_values(data.y(), &x, &h, &beta, g.fitted())?;
        let sigma = covariance(&data, &h, &infl)?;
        let se = (sigma[(slope_idx, slope_idx)].max(0.0) / data.n() as f64).sqrt();
        outcome.covered = Some((beta[slope_idx] - 1.0).abs() <= z_ci * se);

        if estimators.hausman {
            let h2 = h.columns(data.controls().ncols(), data.endogenous().ncols()).into_owned();
            let robust = robust_hausman_from_h2(&data, &h2, false)?;
            outcome.robust_stat = Some(robust.statistic.abs());
            let standard = standard_hausman(&data)?;
            outcome.standard_stat = Some(standard.statistic.abs());
        }
    }

    Ok(outcome)
}

/// Size-corrected power: the rejection rate of the alternative statistics
/// above the empirical `1 - level` quantile of the null statistics.
pub fn size_corrected_power(null_stats: &[f64], alt_stats: &[f64], level: f64) -> Result<f64> {
    if null_stats.is_empty() || alt_stats.is_empty() {
        return Err(OlivaError::InsufficientSamples);
    }
    if level <= 0.0 || level >= 1.0 || level.is_nan() {
        return Err(OlivaError::InvalidLevel(level));
    }
    let mut sorted = null_stats.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).expect("finite statistics"));
    let k = ((level * null_stats.len() as f64).floor() as usize).max(1);
    let threshold = sorted[k - 1];
    let hits = alt_stats.iter().filter(|&&s| s > threshold).count();
    Ok(hits as f64 / alt_stats.len() as f64)
}
