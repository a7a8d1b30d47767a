//! Tikhonov-regularized estimation of the instrument function solving
//! `E[h(Z) | X] = X`.
//!
//! With design matrices `P` (regressor sieve) and `Q = [Z1 Q2]` (instrument
//! sieve) the fitted endogenous block is
//!
//! ```text
//! H2 = Q (Q'(Pi_P + lambda I) Q)^{-1} Q' Pi_P X2
//! ```
//!
//! and the full instrument matrix is `H = [Z1 H2]`: the exogenous controls
//! act as their own instruments. The same fit can be produced by an explicit
//! standardize / regress / ridge sequence ([`two_stage_form`]), kept as an
//! independently coded cross-check of the closed form.

use nalgebra::{DMatrix, DVector};

use crate::dataset::Dataset;
use crate::design::{DesignMatrix, Projector};
use crate::error::{OlivaError, Result};
use crate::solver::{penalized_stacked_solve, penalty_root, solve_spd};

/// Tuning triple for the sieve sizes and the ridge penalty: the instrument
/// block has `j` columns per instrument, the regressor block `floor(c * j)`
/// columns per regressor.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct TuningTriple {
    pub j: usize,
    pub c: f64,
    pub lambda: f64,
}

impl TuningTriple {
    pub fn new(j: usize, c: f64, lambda: f64) -> Result<Self> {
        if j == 0 {
            return Err(OlivaError::DegenerateInput(
                "instrument block size must be positive".into(),
            ));
        }
        if !(1.0..=3.0).contains(&c) {
            return Err(OlivaError::DegenerateInput(format!(
                "sieve ratio c must lie in [1, 3], got {c}"
            )));
        }
        if lambda <= 0.0 || lambda.is_nan() {
            return Err(OlivaError::DegenerateInput(format!(
                "penalty must be positive, got {lambda}"
            )));
        }
        Ok(Self { j, c, lambda })
    }

    /// Regressor block size `floor(c * j)`.
    pub fn k(&self) -> usize {
        (self.c * self.j as f64).floor() as usize
    }
}

/// A fitted instrument: coefficients on the instrument sieve plus the fitted
/// values `[Z1 H2]`.
#[derive(Debug, Clone)]
pub struct InstrumentFit {
    pub(crate) coef: DMatrix<f64>,
    pub(crate) fitted: DMatrix<f64>,
    pub(crate) lambda: f64,
    pub(crate) condition: f64,
    pub(crate) p_basis: DesignMatrix,
    pub(crate) q_basis: DesignMatrix,
    pub(crate) weights: Option<DVector<f64>>,
}

impl InstrumentFit {
    /// Fitted instrument matrix `H = [Z1 H2]`, one row per observation.
    pub fn fitted(&self) -> &DMatrix<f64> {
        &self.fitted
    }

    /// Coefficients mapping the instrument sieve to the endogenous block
    /// (`J x p2`).
    pub fn coef(&self) -> &DMatrix<f64> {
        &self.coef
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Relative condition number of the penalized system.
    pub fn condition(&self) -> f64 {
        self.condition
    }

    pub fn q_basis(&self) -> &DesignMatrix {
        &self.q_basis
    }

    pub fn p_basis(&self) -> &DesignMatrix {
        &self.p_basis
    }

    pub fn weights(&self) -> Option<&DVector<f64>> {
        self.weights.as_ref()
    }

    /// The endogenous part `H2` of the fitted instrument.
    pub fn h2(&self) -> DMatrix<f64> {
        let p1 = self.q_basis.control_cols();
        let p2 = self.fitted.ncols() - p1;
        self.fitted.columns(p1, p2).into_owned()
    }
}

/// Precomputed quantities for repeated fits across penalty values on a fixed
/// design pair; the grid search and the Monte Carlo harness lean on this.
pub struct FirstStageWorkspace<'a> {
    data: &'a Dataset,
    p: &'a DesignMatrix,
    q: &'a DesignMatrix,
    penalty_root: DMatrix<f64>,
    proj_cross: DMatrix<f64>,
    proj_target: DMatrix<f64>,
    weights: Option<DVector<f64>>,
}

impl<'a> FirstStageWorkspace<'a> {
    pub fn new(
        data: &'a Dataset,
        p: &'a DesignMatrix,
        q: &'a DesignMatrix,
        weights: Option<&DVector<f64>>,
    ) -> Result<Self> {
        let n = data.n();
        if p.n() != n || q.n() != n {
            return Err(OlivaError::ShapeMismatch(format!(
                "designs have {} and {} rows for a sample of size {n}",
                p.n(),
                q.n()
            )));
        }
        if q.control_cols() != data.controls().ncols() {
            return Err(OlivaError::ShapeMismatch(
                "instrument design must carry the sample's control columns".into(),
            ));
        }
        let mut target = data.endogenous().clone();
        if let Some(w) = weights {
            if w.len() != n {
                return Err(OlivaError::ShapeMismatch(
                    "weight vector length differs from the sample size".into(),
                ));
            }
            if w.iter().any(|&v| v <= 0.0 || v.is_nan()) {
                return Err(OlivaError::DegenerateInput(
                    "weights must be strictly positive".into(),
                ));
            }
            for i in 0..n {
                for j in 0..target.ncols() {
                    target[(i, j)] *= w[i];
                }
            }
        }
        let proj_p = Projector::from_matrix(p.values())?;
        let u = proj_p.orthonormal_basis();
        let proj_cross = u.transpose() * q.values();
        let proj_target = u.transpose() * &target;
        let penalty_root = penalty_root(q.values())?;
        Ok(Self {
            data,
            p,
            q,
            penalty_root,
            proj_cross,
            proj_target,
            weights: weights.cloned(),
        })
    }

    /// Solve the penalized system at `lambda`, returning the sieve
    /// coefficients and the condition number of the system.
    pub fn coef(&self, lambda: f64) -> Result<(DMatrix<f64>, f64)> {
        let sol = penalized_stacked_solve(
            &self.proj_cross,
            &self.penalty_root,
            &self.proj_target,
            lambda,
        )?;
        Ok((sol.coef, sol.condition))
    }

    /// Fitted endogenous instrument block `H2` at `lambda`.
    pub fn h2(&self, lambda: f64) -> Result<DMatrix<f64>> {
        let (coef, _) = self.coef(lambda)?;
        Ok(self.q.values() * coef)
    }

    /// Full instrument matrix `[Z1 H2]` at `lambda`.
    pub fn instrument_matrix(&self, lambda: f64) -> Result<DMatrix<f64>> {
        let h2 = self.h2(lambda)?;
        Ok(stack_controls(&self.q.controls(), &h2))
    }

    /// Complete [`InstrumentFit`] at `lambda`.
    pub fn fit(&self, lambda: f64) -> Result<InstrumentFit> {
        let (coef, condition) = self.coef(lambda)?;
        let h2 = self.q.values() * &coef;
        let fitted = stack_controls(&self.q.controls(), &h2);
        Ok(InstrumentFit {
            coef,
            fitted,
            lambda,
            condition,
            p_basis: self.p.clone(),
            q_basis: self.q.clone(),
            weights: self.weights.clone(),
        })
    }

    pub fn data(&self) -> &Dataset {
        self.data
    }
}

fn stack_controls(controls: &DMatrix<f64>, h2: &DMatrix<f64>) -> DMatrix<f64> {
    let n = h2.nrows();
    let p1 = controls.ncols();
    let p2 = h2.ncols();
    let mut out = DMatrix::zeros(n, p1 + p2);
    out.view_mut((0, 0), (n, p1)).copy_from(controls);
    out.view_mut((0, p1), (n, p2)).copy_from(h2);
    out
}

/// Estimate the instrument by the closed-form penalized solve.
///
/// With `weights` the first-stage target becomes `x2 .* w` row-wise, the
/// sample version of the weighted restriction `E[h(Z) | X] = X w(X)`.
pub fn estimate_instrument(
    data: &Dataset,
    p: &DesignMatrix,
    q: &DesignMatrix,
    lambda: f64,
    weights: Option<&DVector<f64>>,
) -> Result<InstrumentFit> {
    FirstStageWorkspace::new(data, p, q, weights)?.fit(lambda)
}

/// The same estimator written as its regression recipe: orthonormalize the
/// instrument sieve, regress it on the regressor sieve, then ridge-regress
/// the endogenous variables on those fitted values.
///
/// Algebraically identical to [`estimate_instrument`]; the numerical path is
/// deliberately different so the two can cross-validate each other.
pub fn two_stage_form(
    data: &Dataset,
    p: &DesignMatrix,
    q: &DesignMatrix,
    lambda: f64,
) -> Result<InstrumentFit> {
    let n = data.n();
    if p.n() != n || q.n() != n {
        return Err(OlivaError::ShapeMismatch(
            "designs and sample differ in length".into(),
        ));
    }
    if q.control_cols() != data.controls().ncols() {
        return Err(OlivaError::ShapeMismatch(
            "instrument design must carry the sample's control columns".into(),
        ));
    }
    // (i) standardize: make the full sieve orthonormal in sample.
    let moment = q.values().transpose() * q.values() / n as f64;
    let eig = nalgebra::SymmetricEigen::new(moment);
    let max = eig.eigenvalues.amax();
    let min = eig.eigenvalues.min();
    if max <= 0.0 || max.is_nan() || min < 1e-12 * max {
        return Err(OlivaError::RankDeficient {
            ratio: if max > 0.0 { min / max } else { 0.0 },
            tolerance: 1e-12,
        });
    }
    let inv_sqrt = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()));
    let m = &eig.eigenvectors * inv_sqrt * eig.eigenvectors.transpose();
    let q_std = q.values() * &m;

    // (ii) fitted values of the standardized sieve on the regressor sieve.
    let proj_p = Projector::from_matrix(p.values())?;
    let q_hat = proj_p.apply(&q_std)?;

    // (iii) standard ridge of the endogenous block on those fitted values.
    let gram = q_hat.transpose() * &q_hat + DMatrix::identity(q_std.ncols(), q_std.ncols()) * (lambda * n as f64);
    let rhs = q_hat.transpose() * data.endogenous();
    let sol = solve_spd(gram, &rhs)?;
    let h2 = &q_std * &sol.coef;
    let fitted = stack_controls(&q.controls(), &h2);
    Ok(InstrumentFit {
        coef: m * sol.coef,
        fitted,
        lambda,
        condition: sol.condition,
        p_basis: p.clone(),
        q_basis: q.clone(),
        weights: None,
    })
}

/// Evaluate a fitted instrument at new instrument values.
///
/// `controls_new` are passed through unchanged; the endogenous block is the
/// instrument sieve evaluated at `instruments_new` times the stored
/// coefficients. Extrapolation beyond a spline's training range is linear and
/// logged as a warning.
pub fn evaluate_instrument(
    fit: &InstrumentFit,
    controls_new: &DMatrix<f64>,
    instruments_new: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let (rows, extrapolated) = fit.q_basis.evaluate(controls_new, instruments_new)?;
    if extrapolated > 0 {
        log::warn!(
            "{extrapolated} evaluation point(s) outside the instrument training range; spline values extrapolated linearly"
        );
    }
    let h2 = &rows * &fit.coef;
    Ok(stack_controls(controls_new, &h2))
}

/// Summary statistics for instrument strength.
#[derive(Debug, Clone, serde::Serialize)]
pub struct FirstStageDiagnostics {
    /// Sample cross moment `E_n[h x']`, row major.
    pub cross_moment: Vec<Vec<f64>>,
    /// Its smallest singular value.
    pub smallest_singular_value: f64,
    /// Frobenius distance between `E_n[h x']` and `E_n[x x']`; these agree in
    /// population when the first-stage restriction holds.
    pub moment_discrepancy: f64,
    /// Empirical norm of the residual `x - Pi_P h`.
    pub projected_residual_norm: f64,
}

pub fn first_stage_diagnostics(fit: &InstrumentFit, data: &Dataset) -> Result<FirstStageDiagnostics> {
    let n = data.n();
    if fit.fitted.nrows() != n {
        return Err(OlivaError::ShapeMismatch(
            "fit and sample differ in length".into(),
        ));
    }
    let x = data.x();
    let cross = fit.fitted.transpose() * &x / n as f64;
    let svd = cross.clone().svd(false, false);
    let smallest = svd
        .singular_values
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let xx = x.transpose() * &x / n as f64;
    let moment_discrepancy = (&cross - xx).norm();
    let proj_p = Projector::from_matrix(fit.p_basis.values())?;
    let resid = &x - proj_p.apply(&fit.fitted)?;
    let projected_residual_norm = resid.norm() / (n as f64).sqrt();
    let cross_moment = (0..cross.nrows())
        .map(|i| cross.row(i).iter().copied().collect())
        .collect();
    Ok(FirstStageDiagnostics {
        cross_moment,
        smallest_singular_value: smallest,
        moment_discrepancy,
        projected_residual_norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{assemble, build_bspline, DesignMatrix};
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn toy_data(n: usize, seed: u64) -> Dataset {
        let mut rng = StdRng::seed_from_u64(seed);
        let z: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.5..1.5)).collect();
        let x2: Vec<f64> = z
            .iter()
            .map(|&zi| 0.8 * zi + 0.3 * rng.gen_range(-1.0..1.0_f64))
            .collect();
        let y: Vec<f64> = x2
            .iter()
            .map(|&xi| xi + 0.2 * rng.gen_range(-1.0..1.0_f64))
            .collect();
        Dataset::with_intercept_only(
            DVector::from_vec(y),
            DMatrix::from_column_slice(n, 1, &x2),
            DMatrix::from_column_slice(n, 1, &z),
        )
        .unwrap()
    }

    fn spline_pair(data: &Dataset, p_cols: usize, q_cols: usize) -> (DesignMatrix, DesignMatrix) {
        let x2 = data.endogenous().column(0).into_owned();
        let z = data.instruments().column(0).into_owned();
        let p = assemble(
            data.controls(),
            &build_bspline(&x2, 3, p_cols - 3).unwrap(),
        )
        .unwrap();
        let q = assemble(data.controls(), &build_bspline(&z, 3, q_cols - 3).unwrap()).unwrap();
        (p, q)
    }

    #[test]
    fn saturated_square_designs_reproduce_x2_at_small_lambda() {
        let mut rng = StdRng::seed_from_u64(2);
        let n = 8;
        let square =
            DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0)) + DMatrix::identity(n, n) * 2.0;
        let x2 = DMatrix::from_fn(n, 1, |_, _| rng.gen_range(-1.0..1.0));
        let y = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
        let data = Dataset::new(y, DMatrix::zeros(n, 0), x2.clone(), DMatrix::zeros(n, 0)).unwrap();
        let d = DesignMatrix::from_columns(square);
        let fit = estimate_instrument(&data, &d, &d, 1e-10, None).unwrap();
        assert!((fit.fitted() - &x2).amax() < 1e-8);
    }

    #[test]
    fn huge_penalty_shrinks_h2_to_zero() {
        let data = toy_data(80, 3);
        let (p, q) = spline_pair(&data, 6, 4);
        let fit = estimate_instrument(&data, &p, &q, 1e9, None).unwrap();
        assert!(fit.h2().amax() < 1e-6);
        // Controls are never shrunk.
        assert_eq!(fit.fitted().column(0), data.controls().column(0));
    }

    #[test]
    fn matches_dense_formula_on_small_problem() {
        let data = toy_data(20, 5);
        let (p, q) = spline_pair(&data, 5, 4);
        let lambda = 1e-3;
        let fit = estimate_instrument(&data, &p, &q, lambda, None).unwrap();

        let pm = p.values();
        let qm = q.values();
        let pi_p = pm * (pm.transpose() * pm).try_inverse().unwrap() * pm.transpose();
        let a = qm.transpose() * (&pi_p + DMatrix::identity(20, 20) * lambda) * qm;
        let h2 = qm * a.try_inverse().unwrap() * qm.transpose() * &pi_p * data.endogenous();
        assert!((fit.h2() - h2).amax() < 1e-9);
    }

    #[test]
    fn control_block_passthrough_is_bit_exact() {
        let n = 60;
        let mut rng = StdRng::seed_from_u64(11);
        let mut controls = DMatrix::from_element(n, 2, 1.0);
        for i in 0..n {
            controls[(i, 1)] = rng.gen_range(-2.0..2.0);
        }
        let z: DVector<f64> = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
        let x2 = z.map(|v| v * 0.5 + 0.1);
        let y = x2.clone();
        let data = Dataset::new(
            y,
            controls.clone(),
            DMatrix::from_columns(std::slice::from_ref(&x2)),
            DMatrix::from_columns(std::slice::from_ref(&z)),
        )
        .unwrap();
        let p = assemble(&controls, &build_bspline(&x2, 3, 1).unwrap()).unwrap();
        let q = assemble(&controls, &build_bspline(&z, 3, 1).unwrap()).unwrap();
        let fit = estimate_instrument(&data, &p, &q, 1e-4, None).unwrap();
        assert_eq!(fit.fitted().columns(0, 2), controls.columns(0, 2));
    }

    #[test]
    fn weighted_target_scales_linearly() {
        let data = toy_data(50, 7);
        let (p, q) = spline_pair(&data, 5, 4);
        let w = DVector::from_element(50, 2.0);
        let unweighted = estimate_instrument(&data, &p, &q, 1e-3, None).unwrap();
        let weighted = estimate_instrument(&data, &p, &q, 1e-3, Some(&w)).unwrap();
        assert!((weighted.h2() - unweighted.h2() * 2.0).amax() < 1e-9);
    }

    #[test]
    fn weights_must_be_positive() {
        let data = toy_data(30, 9);
        let (p, q) = spline_pair(&data, 5, 4);
        let mut w = DVector::from_element(30, 1.0);
        w[3] = 0.0;
        assert!(matches!(
            estimate_instrument(&data, &p, &q, 1e-3, Some(&w)),
            Err(OlivaError::DegenerateInput(_))
        ));
    }

    #[test]
    fn ridge_route_at_zero_penalty_is_plain_least_squares() {
        // With an invertible fitted-sieve Gram matrix, step (iii) of the
        // regression route collapses to OLS of x2 on the fitted sieve.
        let data = toy_data(60, 8);
        let (p, q) = spline_pair(&data, 6, 4);
        let fit = two_stage_form(&data, &p, &q, 0.0).unwrap();
        let proj_p = crate::design::Projector::from_matrix(p.values()).unwrap();
        let q_hat = proj_p.apply(q.values()).unwrap();
        let coef = (q_hat.transpose() * &q_hat)
            .try_inverse()
            .unwrap()
            * (q_hat.transpose() * data.endogenous());
        let h2 = q.values() * coef;
        assert!((fit.h2() - h2).amax() < 1e-8);
    }

    #[test]
    fn evaluate_reproduces_in_sample_fit() {
        let data = toy_data(60, 13);
        let (p, q) = spline_pair(&data, 6, 5);
        let fit = estimate_instrument(&data, &p, &q, 1e-4, None).unwrap();
        let h = evaluate_instrument(&fit, data.controls(), data.instruments()).unwrap();
        assert!((h - fit.fitted()).amax() < 1e-10);
    }

    #[test]
    fn evaluate_single_point_matches_manual_basis_product() {
        let data = toy_data(60, 17);
        let (p, q) = spline_pair(&data, 6, 5);
        let fit = estimate_instrument(&data, &p, &q, 1e-4, None).unwrap();
        let z0 = DMatrix::from_element(1, 1, 0.25);
        let c0 = DMatrix::from_element(1, 1, 1.0);
        let h = evaluate_instrument(&fit, &c0, &z0).unwrap();
        let (row, _) = q.evaluate(&c0, &z0).unwrap();
        let manual = (&row * fit.coef())[(0, 0)];
        assert!((h[(0, 1)] - manual).abs() < 1e-12);
        assert_eq!(h[(0, 0)], 1.0);
    }

    #[test]
    fn padded_zero_coefficient_column_leaves_evaluation_unchanged() {
        let data = toy_data(40, 19);
        let (p, q) = spline_pair(&data, 5, 4);
        let fit = estimate_instrument(&data, &p, &q, 1e-3, None).unwrap();

        // Extend the sieve with an extra linear column whose coefficient is
        // zero; evaluating the padded fit must reproduce the original.
        let extra = DVector::from_element(40, 1.0);
        let mut padded_vals = DMatrix::zeros(40, q.ncols() + 1);
        padded_vals
            .view_mut((0, 0), (40, q.ncols()))
            .copy_from(q.values());
        padded_vals.set_column(q.ncols(), &extra);
        let padded_q = {
            let block_raw = DMatrix::from_columns(&[
                data.instruments().column(0).into_owned(),
            ]);
            // rebuild: controls + [spline block | linear block]
            let spline = build_bspline(&data.instruments().column(0).into_owned(), 3, 1).unwrap();
            let linear = DesignMatrix::from_columns(block_raw);
            let joint = crate::design::concat_blocks(&[spline, linear]).unwrap();
            assemble(data.controls(), &joint).unwrap()
        };
        let mut coef = DMatrix::zeros(padded_q.ncols(), 1);
        coef.view_mut((0, 0), (q.ncols(), 1)).copy_from(fit.coef());
        let padded_fit = InstrumentFit {
            coef,
            fitted: fit.fitted().clone(),
            lambda: fit.lambda(),
            condition: fit.condition(),
            p_basis: p.clone(),
            q_basis: padded_q,
            weights: None,
        };
        // Both raw columns carry the same instrument values; the second
        // feeds the zero-coefficient linear block.
        let raw_new = DMatrix::from_fn(5, 2, |i, _| -0.5 + 0.2 * i as f64);
        let controls_new = DMatrix::from_element(5, 1, 1.0);
        let base = evaluate_instrument(&fit, &controls_new, &raw_new.columns(0, 1).into_owned())
            .unwrap();
        let padded = evaluate_instrument(&padded_fit, &controls_new, &raw_new).unwrap();
        assert!((base - padded).amax() < 1e-12);
    }

    #[test]
    fn diagnostics_passthrough_instrument_has_zero_discrepancy() {
        let data = toy_data(50, 23);
        let (p, q) = spline_pair(&data, 5, 4);
        let mut fit = estimate_instrument(&data, &p, &q, 1e-4, None).unwrap();
        fit.fitted = data.x();
        let d = first_stage_diagnostics(&fit, &data).unwrap();
        assert!(d.moment_discrepancy < 1e-12);
        assert!(d.smallest_singular_value > 0.0);
    }

    #[test]
    fn diagnostics_report_near_zero_singular_value_for_collinear_x() {
        let n = 40;
        let z = DVector::from_fn(n, |i, _| (i as f64 / n as f64) * 2.0 - 1.0);
        let x2 = DMatrix::from_fn(n, 2, |i, j| if j == 0 { z[i] } else { z[i] * 2.0 });
        let y = DVector::from_fn(n, |i, _| z[i]);
        let data =
            Dataset::with_intercept_only(y, x2, DMatrix::from_columns(std::slice::from_ref(&z)))
                .unwrap();
        let q = assemble(data.controls(), &build_bspline(&z, 3, 1).unwrap()).unwrap();
        let p = q.clone();
        let fit = estimate_instrument(&data, &p, &q, 1e-3, None).unwrap();
        let d = first_stage_diagnostics(&fit, &data).unwrap();
        assert!(d.smallest_singular_value < 1e-10);
    }

    mod proptests {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(24))]

            #[test]
            fn closed_form_and_regression_route_agree(seed in 0u64..1000, lam_exp in -8.0f64..-0.5) {
                let data = toy_data(120, seed);
                let (p, q) = spline_pair(&data, 6, 5);
                let lambda = 10f64.powf(lam_exp);
                let a = estimate_instrument(&data, &p, &q, lambda, None).unwrap();
                let b = two_stage_form(&data, &p, &q, lambda).unwrap();
                prop_assert!((a.fitted() - b.fitted()).amax() < 1e-8);
            }

            #[test]
            fn shrinkage_is_monotone_in_lambda(seed in 0u64..1000) {
                let data = toy_data(90, seed);
                let (p, q) = spline_pair(&data, 6, 5);
                let ws = FirstStageWorkspace::new(&data, &p, &q, None).unwrap();
                let mut last = f64::INFINITY;
                for lambda in [1e-8, 1e-6, 1e-4, 1e-2, 1.0, 1e2] {
                    let h2 = ws.h2(lambda).unwrap();
                    let norm = h2.norm();
                    prop_assert!(norm <= last + 1e-10);
                    last = norm;
                }
            }
        }
    }
}
