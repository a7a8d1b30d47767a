//! Closed-form minimum-norm instruments for binary and discrete endogenous
//! regressors.
//!
//! For a binary treatment with propensity `pi(z) = Pr(x2 = 1 | z)` the
//! minimum-norm instrument is affine in the propensity,
//!
//! ```text
//! h0(z) = alpha + gamma pi(z),  gamma = pi_bar (1 - pi_bar) / var(pi(Z)),
//! alpha = pi_bar (1 - gamma),
//! ```
//!
//! and the resulting IV slope is the ratio `cov(y, pi) / cov(x2, pi)`. With
//! `d` support points the instrument is `h0(z) = gamma' Pi(z)` where `Pi`
//! stacks the generalized propensities and `gamma` solves
//! `E[Pi Pi'] gamma = (pi_1 x_1, ..., pi_d x_d)'`; when that matrix is
//! singular the general penalized solver takes over.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::dataset::Dataset;
use crate::design::{DesignMatrix, Projector};
use crate::error::{OlivaError, Result};
use crate::solver::{solve_spd, solve_spd_min_norm};

/// Clipping bounds for estimated propensities.
const PI_CLIP: f64 = 1e-6;
/// Variance floor below which the propensity is considered constant.
const VAR_FLOOR: f64 = 1e-12;
/// Penalty used when the discrete moment matrix is singular.
const FALLBACK_LAMBDA: f64 = 1e-8;

/// Estimated propensity score for a binary endogenous regressor.
#[derive(Debug, Clone)]
pub struct PropensityModel {
    basis: Option<(DesignMatrix, DVector<f64>)>,
    pi: DVector<f64>,
    pi_bar: f64,
    var_pi: f64,
}

impl PropensityModel {
    /// Sieve regression of the treatment indicator on the instrument design,
    /// with fitted values clipped into `[1e-6, 1 - 1e-6]`.
    pub fn estimate(data: &Dataset, q: &DesignMatrix) -> Result<Self> {
        if data.endogenous().ncols() != 1 {
            return Err(OlivaError::ShapeMismatch(
                "propensity model expects a single endogenous column".into(),
            ));
        }
        if q.n() != data.n() {
            return Err(OlivaError::ShapeMismatch(
                "instrument design and sample differ in length".into(),
            ));
        }
        let x2 = data.endogenous().column(0).into_owned();
        if x2.iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(OlivaError::DegenerateInput(
                "binary treatment must be coded 0/1".into(),
            ));
        }
        let raw_mean = x2.mean();
        if raw_mean == 0.0 || raw_mean == 1.0 {
            return Err(OlivaError::DegenerateTreatment(raw_mean));
        }
        let svd = q.values().clone().svd(true, true);
        let coef = svd
            .solve(&DMatrix::from_columns(&[x2]), 1e-12)
            .map_err(|e| OlivaError::DegenerateInput(e.to_string()))?
            .column(0)
            .into_owned();
        let fitted = q.values() * &coef;
        let pi = fitted.map(|v| v.clamp(PI_CLIP, 1.0 - PI_CLIP));
        Ok(Self::with_values(pi, Some((q.clone(), coef))))
    }

    /// Wrap externally supplied propensity values (e.g. a known design).
    /// Values must lie in `[0, 1]`.
    pub fn from_values(pi: DVector<f64>) -> Result<Self> {
        if pi.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(OlivaError::DegenerateInput(
                "propensity values must lie in [0, 1]".into(),
            ));
        }
        Ok(Self::with_values(pi, None))
    }

    fn with_values(pi: DVector<f64>, basis: Option<(DesignMatrix, DVector<f64>)>) -> Self {
        let n = pi.len() as f64;
        let pi_bar = pi.sum() / n;
        let var_pi = pi.iter().map(|&v| (v - pi_bar) * (v - pi_bar)).sum::<f64>() / n;
        Self {
            basis,
            pi,
            pi_bar,
            var_pi,
        }
    }

    /// In-sample propensity values.
    pub fn pi_values(&self) -> &DVector<f64> {
        &self.pi
    }

    /// Mean propensity.
    pub fn pi_bar(&self) -> f64 {
        self.pi_bar
    }

    /// Sample variance of the propensity values.
    pub fn var_pi(&self) -> f64 {
        self.var_pi
    }

    /// Evaluate the propensity at new instrument values (requires an
    /// estimated model, not one wrapped from raw values).
    pub fn pi_at(
        &self,
        controls_new: &DMatrix<f64>,
        instruments_new: &DMatrix<f64>,
    ) -> Result<DVector<f64>> {
        let (q, coef) = self.basis.as_ref().ok_or_else(|| {
            OlivaError::SchemaMismatch("propensity model has no stored sieve basis".into())
        })?;
        let (rows, _) = q.evaluate(controls_new, instruments_new)?;
        Ok((&rows * coef).map(|v| v.clamp(PI_CLIP, 1.0 - PI_CLIP)))
    }
}

/// Minimum-norm instrument coefficients `(alpha, gamma)` for a binary
/// treatment: `h0(z) = alpha + gamma pi(z)`.
pub fn binary_h0(pm: &PropensityModel) -> Result<(f64, f64)> {
    if pm.pi_bar <= 0.0 || pm.pi_bar >= 1.0 {
        return Err(OlivaError::DegenerateTreatment(pm.pi_bar));
    }
    if pm.var_pi <= VAR_FLOOR || pm.var_pi.is_nan() {
        return Err(OlivaError::ConstantPropensity(pm.var_pi));
    }
    let gamma = pm.pi_bar * (1.0 - pm.pi_bar) / pm.var_pi;
    let alpha = pm.pi_bar * (1.0 - gamma);
    Ok((alpha, gamma))
}

/// The IV coefficients `(intercept, slope)` for a binary treatment using the
/// propensity score as instrument: the slope is
/// `cov(y, pi) / cov(x2, pi)`.
pub fn binary_oliva(data: &Dataset, pm: &PropensityModel) -> Result<(f64, f64)> {
    let n = data.n();
    if pm.pi.len() != n {
        return Err(OlivaError::ShapeMismatch(
            "propensity values and sample differ in length".into(),
        ));
    }
    if data.endogenous().ncols() != 1 {
        return Err(OlivaError::ShapeMismatch(
            "binary IV expects a single endogenous column".into(),
        ));
    }
    let y = data.y();
    let x2 = data.endogenous().column(0);
    let nf = n as f64;
    let y_bar = y.mean();
    let x_bar = x2.mean();
    let cov_y = y
        .iter()
        .zip(pm.pi.iter())
        .map(|(&yi, &pi)| (yi - y_bar) * (pi - pm.pi_bar))
        .sum::<f64>()
        / nf;
    let cov_x = x2
        .iter()
        .zip(pm.pi.iter())
        .map(|(&xi, &pi)| (xi - x_bar) * (pi - pm.pi_bar))
        .sum::<f64>()
        / nf;
    if cov_x.abs() <= 1e-10 {
        return Err(OlivaError::WeakPropensity(cov_x.abs()));
    }
    let slope = cov_y / cov_x;
    // Intercept uses the empirical treatment frequency, the sample analog of
    // Pr(x2 = 1); this is exactly the intercept of linear IV with (1, pi) as
    // instruments.
    let c = y_bar - slope * x_bar;
    Ok((c, slope))
}

/// Minimum-norm instrument for a discrete endogenous regressor.
#[derive(Debug, Clone)]
pub struct DiscreteInstrument {
    pub support: Vec<f64>,
    /// Coefficients on the generalized propensity vector.
    pub gamma: DVector<f64>,
    /// Moment targets `(pi_1 x_1, ..., pi_d x_d)`.
    pub s: DVector<f64>,
    /// True when the moment matrix was singular and the penalized solver was
    /// used instead of the direct linear system.
    pub used_fallback: bool,
    pi: DMatrix<f64>,
}

impl DiscreteInstrument {
    /// In-sample instrument values `h0(z_i) = gamma' Pi(z_i)`.
    pub fn h0_values(&self) -> DVector<f64> {
        &self.pi * &self.gamma
    }

    /// Normalized in-sample propensity rows.
    pub fn pi_values(&self) -> &DMatrix<f64> {
        &self.pi
    }
}

/// Build the minimum-norm instrument from estimated generalized propensities.
///
/// `pi_hat` holds one row per observation with `Pr(x2 = support[k] | z_i)` in
/// column `k`; rows are renormalized onto the simplex. The direct route
/// solves `E_n[Pi Pi'] gamma = s`, which makes all `d` sample moment
/// equalities `E_n[h0 1(x2 = x_k)] = pi_k x_k` hold by construction; if the
/// moment matrix is singular the penalized first-stage solver is used and the
/// fallback is recorded.
pub fn discrete_h0(
    x2: &DVector<f64>,
    support: &[f64],
    pi_hat: &DMatrix<f64>,
) -> Result<DiscreteInstrument> {
    let n = x2.len();
    let d = support.len();
    if d < 2 {
        return Err(OlivaError::DegenerateInput(
            "need at least two support points".into(),
        ));
    }
    if pi_hat.nrows() != n || pi_hat.ncols() != d {
        return Err(OlivaError::ShapeMismatch(format!(
            "propensity matrix is {}x{}, expected {n}x{d}",
            pi_hat.nrows(),
            pi_hat.ncols()
        )));
    }
    for w in support.windows(2) {
        if w[1] == w[0] {
            return Err(OlivaError::DegenerateInput(
                "support points must be distinct".into(),
            ));
        }
    }
    for &v in x2.iter() {
        if !support.contains(&v) {
            return Err(OlivaError::SchemaMismatch(format!(
                "observed value {v} is not in the declared support"
            )));
        }
    }

    // Renormalize each propensity row onto the simplex.
    let mut pi = pi_hat.clone();
    for i in 0..n {
        let mut sum = 0.0;
        for k in 0..d {
            let v = pi[(i, k)].max(0.0);
            pi[(i, k)] = v;
            sum += v;
        }
        if sum > 0.0 {
            for k in 0..d {
                pi[(i, k)] /= sum;
            }
        } else {
            for k in 0..d {
                pi[(i, k)] = 1.0 / d as f64;
            }
        }
    }

    // Empirical frequencies and moment targets.
    let mut s = DVector::zeros(d);
    for (k, &xk) in support.iter().enumerate() {
        let freq = x2.iter().filter(|&&v| v == xk).count() as f64 / n as f64;
        s[k] = freq * xk;
    }

    let moment = pi.transpose() * &pi / n as f64;
    let eig = SymmetricEigen::new(moment.clone());
    let max = eig.eigenvalues.amax();
    let min = eig.eigenvalues.min();
    if max > 0.0 && min >= 1e-12 * max {
        let sol = solve_spd(moment, &DMatrix::from_columns(&[s.clone()]))?;
        return Ok(DiscreteInstrument {
            support: support.to_vec(),
            gamma: sol.coef.column(0).into_owned(),
            s,
            used_fallback: false,
            pi,
        });
    }

    // Singular moment matrix: penalized projected solve with the saturated
    // indicator design of x2 as the conditioning basis. The coefficient
    // direction along the propensity null space is unidentified, so the
    // spectral solve keeps the minimum-norm representative.
    log::warn!("generalized propensity moment matrix is singular; using the penalized solver");
    let indicators = DMatrix::from_fn(n, d, |i, k| if x2[i] == support[k] { 1.0 } else { 0.0 });
    let proj = Projector::from_matrix(&indicators)?;
    let u = proj.orthonormal_basis();
    let c = u.transpose() * &pi;
    let gram = c.transpose() * &c + pi.transpose() * &pi * FALLBACK_LAMBDA;
    let rhs = c.transpose() * (u.transpose() * x2);
    let sol = solve_spd_min_norm(gram, &DMatrix::from_columns(&[rhs]), 1e-12)?;
    Ok(DiscreteInstrument {
        support: support.to_vec(),
        gamma: sol.coef.column(0).into_owned(),
        s,
        used_fallback: true,
        pi,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{assemble, build_bspline};
    use crate::first_stage::estimate_instrument;
    use crate::tsiv::linear_iv;
    use approx::assert_abs_diff_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn binary_data(n: usize, seed: u64) -> Dataset {
        let mut rng = StdRng::seed_from_u64(seed);
        let z: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.5..1.5_f64)).collect();
        let x2: Vec<f64> = z
            .iter()
            .map(|&zi| {
                let p = 1.0 / (1.0 + (-1.2 * zi).exp());
                if rng.gen_range(0.0..1.0) < p {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        let y: Vec<f64> = x2
            .iter()
            .zip(z.iter())
            .map(|(&xi, _)| 0.5 + 1.5 * xi + 0.4 * rng.gen_range(-1.0..1.0_f64))
            .collect();
        Dataset::with_intercept_only(
            DVector::from_vec(y),
            DMatrix::from_column_slice(n, 1, &x2),
            DMatrix::from_column_slice(n, 1, &z),
        )
        .unwrap()
    }

    #[test]
    fn two_point_propensity_closed_form() {
        // pi alternates between 0.2 and 0.8: pi_bar = 0.5, var = 0.09.
        let pi = DVector::from_fn(10, |i, _| if i % 2 == 0 { 0.2 } else { 0.8 });
        let pm = PropensityModel::from_values(pi).unwrap();
        let (alpha, gamma) = binary_h0(&pm).unwrap();
        assert_abs_diff_eq!(gamma, 0.25 / 0.09, epsilon = 1e-12);
        assert_abs_diff_eq!(alpha, 0.5 * (1.0 - 0.25 / 0.09), epsilon = 1e-12);
        let h_lo = alpha + gamma * 0.2;
        let h_hi = alpha + gamma * 0.8;
        assert_abs_diff_eq!(h_lo, -1.0 / 3.0, epsilon = 1e-10);
        assert_abs_diff_eq!(h_hi, 4.0 / 3.0, epsilon = 1e-10);
        // Both sample moment constraints evaluate to pi_bar.
        let h: Vec<f64> = pm.pi_values().iter().map(|&p| alpha + gamma * p).collect();
        let e_h = h.iter().sum::<f64>() / 10.0;
        let e_pih = h
            .iter()
            .zip(pm.pi_values().iter())
            .map(|(&hv, &pv)| hv * pv)
            .sum::<f64>()
            / 10.0;
        assert_abs_diff_eq!(e_h, 0.5, epsilon = 1e-8);
        assert_abs_diff_eq!(e_pih, 0.5, epsilon = 1e-8);
    }

    #[test]
    fn constant_propensity_is_rejected() {
        let pm = PropensityModel::from_values(DVector::from_element(20, 0.4)).unwrap();
        assert!(matches!(
            binary_h0(&pm),
            Err(OlivaError::ConstantPropensity(_))
        ));
    }

    #[test]
    fn perfect_prediction_gives_identity_instrument() {
        let pi = DVector::from_fn(12, |i, _| if i % 2 == 0 { 0.0 } else { 1.0 });
        let pm = PropensityModel::from_values(pi).unwrap();
        let (alpha, gamma) = binary_h0(&pm).unwrap();
        assert_abs_diff_eq!(gamma, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(alpha, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn degenerate_treatment_is_rejected() {
        let n = 20;
        let y = DVector::from_element(n, 1.0);
        let x2 = DMatrix::from_element(n, 1, 1.0);
        let z = DMatrix::from_fn(n, 1, |i, _| i as f64);
        let data = Dataset::with_intercept_only(y, x2, z).unwrap();
        let q = assemble(
            data.controls(),
            &build_bspline(&data.instruments().column(0).into_owned(), 3, 1).unwrap(),
        )
        .unwrap();
        assert!(matches!(
            PropensityModel::estimate(&data, &q),
            Err(OlivaError::DegenerateTreatment(_))
        ));
    }

    #[test]
    fn oliva_slope_is_one_when_outcome_equals_treatment() {
        let data = binary_data(200, 1);
        let ident = Dataset::with_intercept_only(
            DVector::from_column_slice(data.endogenous().column(0).as_slice()),
            data.endogenous().clone(),
            data.instruments().clone(),
        )
        .unwrap();
        let q = assemble(
            ident.controls(),
            &build_bspline(&ident.instruments().column(0).into_owned(), 3, 2).unwrap(),
        )
        .unwrap();
        let pm = PropensityModel::estimate(&ident, &q).unwrap();
        let (c, slope) = binary_oliva(&ident, &pm).unwrap();
        assert_abs_diff_eq!(slope, 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(c, 0.0, epsilon = 1e-10);
    }

    #[test]
    fn oliva_matches_linear_iv_with_propensity_instrument() {
        let data = binary_data(300, 3);
        let q = assemble(
            data.controls(),
            &build_bspline(&data.instruments().column(0).into_owned(), 3, 2).unwrap(),
        )
        .unwrap();
        let pm = PropensityModel::estimate(&data, &q).unwrap();
        let (c, slope) = binary_oliva(&data, &pm).unwrap();

        let n = data.n();
        let mut h = DMatrix::from_element(n, 2, 1.0);
        for i in 0..n {
            h[(i, 1)] = pm.pi_values()[i];
        }
        let beta = linear_iv(data.y(), &data.x(), &h).unwrap();
        assert_abs_diff_eq!(c, beta[0], epsilon = 1e-8);
        assert_abs_diff_eq!(slope, beta[1], epsilon = 1e-8);
    }

    #[test]
    fn hand_dataset_matches_covariance_ratio() {
        let y = DVector::from_vec(vec![1.0, 2.0, 0.5, 3.0, 1.5, 2.5, 0.0, 2.0]);
        let x2 = DVector::from_vec(vec![0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0]);
        let pi = DVector::from_vec(vec![0.3, 0.7, 0.2, 0.8, 0.4, 0.6, 0.1, 0.9]);
        let data = Dataset::with_intercept_only(
            y.clone(),
            DMatrix::from_columns(std::slice::from_ref(&x2)),
            DMatrix::zeros(8, 0),
        )
        .unwrap();
        let pm = PropensityModel::from_values(pi.clone()).unwrap();
        let (c, slope) = binary_oliva(&data, &pm).unwrap();

        let mean = |v: &DVector<f64>| v.sum() / 8.0;
        let cov = |a: &DVector<f64>, b: &DVector<f64>| {
            let (ma, mb) = (mean(a), mean(b));
            a.iter()
                .zip(b.iter())
                .map(|(&x, &y)| (x - ma) * (y - mb))
                .sum::<f64>()
                / 8.0
        };
        let expect_slope = cov(&y, &pi) / cov(&x2, &pi);
        assert_abs_diff_eq!(slope, expect_slope, epsilon = 1e-12);
        assert_abs_diff_eq!(c, mean(&y) - expect_slope * mean(&x2), epsilon = 1e-12);
    }

    #[test]
    fn oliva_slope_invariant_to_affine_propensity_rescaling() {
        let data = binary_data(150, 5);
        let q = assemble(
            data.controls(),
            &build_bspline(&data.instruments().column(0).into_owned(), 3, 1).unwrap(),
        )
        .unwrap();
        let pm = PropensityModel::estimate(&data, &q).unwrap();
        let (_, slope) = binary_oliva(&data, &pm).unwrap();
        let rescaled =
            PropensityModel::from_values(pm.pi_values().map(|v| 0.25 + 0.5 * v)).unwrap();
        let (_, slope2) = binary_oliva(&data, &rescaled).unwrap();
        assert_abs_diff_eq!(slope, slope2, epsilon = 1e-10);
    }

    #[test]
    fn binary_case_reduces_to_closed_form() {
        let data = binary_data(250, 7);
        let q = assemble(
            data.controls(),
            &build_bspline(&data.instruments().column(0).into_owned(), 3, 2).unwrap(),
        )
        .unwrap();
        let pm = PropensityModel::estimate(&data, &q).unwrap();
        let (alpha, gamma) = binary_h0(&pm).unwrap();

        let x2 = data.endogenous().column(0).into_owned();
        let n = data.n();
        let pi2 = DMatrix::from_fn(n, 2, |i, k| {
            let p = pm.pi_values()[i];
            if k == 0 {
                1.0 - p
            } else {
                p
            }
        });
        let disc = discrete_h0(&x2, &[0.0, 1.0], &pi2).unwrap();
        assert!(!disc.used_fallback);
        let h_disc = disc.h0_values();
        for i in 0..n {
            let expect = alpha + gamma * pm.pi_values()[i];
            assert_abs_diff_eq!(h_disc[i], expect, epsilon = 1e-8);
        }
    }

    #[test]
    fn discrete_moment_equalities_hold_by_construction() {
        // Three support points with sieve-estimated propensities. The true
        // class probabilities stay well inside the simplex so the spline fits
        // of the indicators remain nonnegative and renormalization is a
        // no-op, which is what the by-construction argument needs.
        let n = 120;
        let mut rng = StdRng::seed_from_u64(11);
        let z: DVector<f64> = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
        let x2 = DVector::from_fn(n, |i, _| {
            let s = 1.0 / (1.0 + (-z[i]).exp());
            let p0 = 0.2 + 0.25 * s;
            let p1 = 0.45 - 0.15 * s;
            let u: f64 = rng.gen_range(0.0..1.0);
            if u < p0 {
                0.0
            } else if u < p0 + p1 {
                1.0
            } else {
                2.0
            }
        });
        let support = [0.0, 1.0, 2.0];
        // Estimate generalized propensities by regressing each indicator on a
        // spline in z.
        let q = assemble(
            &DMatrix::from_element(n, 1, 1.0),
            &build_bspline(&z, 3, 1).unwrap(),
        )
        .unwrap();
        let svd = q.values().clone().svd(true, true);
        let mut pi = DMatrix::zeros(n, 3);
        for (k, &xk) in support.iter().enumerate() {
            let ind = DVector::from_fn(n, |i, _| if x2[i] == xk { 1.0 } else { 0.0 });
            let coef = svd.solve(&DMatrix::from_columns(&[ind]), 1e-12).unwrap();
            pi.set_column(k, &(q.values() * coef.column(0)));
        }
        // Keep the raw (un-renormalized) fits mild so renormalization is a
        // no-op up to clipping negatives; OLS fits of indicators on a basis
        // containing the intercept already sum to one across k.
        let disc = discrete_h0(&x2, &support, &pi).unwrap();
        assert!(!disc.used_fallback);
        let h = disc.h0_values();
        for &xk in support.iter() {
            let count = x2.iter().filter(|&&v| v == xk).count() as f64;
            let moment = h
                .iter()
                .zip(x2.iter())
                .filter(|(_, &xv)| xv == xk)
                .map(|(&hv, _)| hv)
                .sum::<f64>()
                / n as f64;
            let target = count / n as f64 * xk;
            assert_abs_diff_eq!(moment, target, epsilon = 1e-6);
        }
    }

    #[test]
    fn gamma_matches_dense_solve_for_three_levels() {
        let n = 30;
        let mut rng = StdRng::seed_from_u64(13);
        let support = [0.0, 1.0, 3.0];
        let x2 = DVector::from_fn(n, |_, _| support[rng.gen_range(0..3_usize)]);
        let mut pi = DMatrix::zeros(n, 3);
        for i in 0..n {
            let a = rng.gen_range(0.1..1.0);
            let b = rng.gen_range(0.1..1.0);
            let c = rng.gen_range(0.1..1.0);
            let s = a + b + c;
            pi[(i, 0)] = a / s;
            pi[(i, 1)] = b / s;
            pi[(i, 2)] = c / s;
        }
        let disc = discrete_h0(&x2, &support, &pi).unwrap();
        let m = pi.transpose() * &pi / n as f64;
        let expect = m.try_inverse().unwrap() * &disc.s;
        assert!((disc.gamma.clone() - expect).amax() < 1e-10);
    }

    #[test]
    fn constant_propensity_rows_fall_back_to_penalized_solver() {
        // z independent of x2: the propensity rows are constant, the moment
        // matrix has rank one, and the penalized fallback returns the best
        // constant instrument, the sample mean of x2. Only the aggregated
        // moment equality can hold in this degenerate design.
        let n = 60;
        let mut rng = StdRng::seed_from_u64(17);
        let support = [0.0, 1.0, 2.0];
        let x2 = DVector::from_fn(n, |_, _| support[rng.gen_range(0..3_usize)]);
        let freqs: Vec<f64> = support
            .iter()
            .map(|&sv| x2.iter().filter(|&&v| v == sv).count() as f64 / n as f64)
            .collect();
        let pi = DMatrix::from_fn(n, 3, |_, k| freqs[k]);
        let disc = discrete_h0(&x2, &support, &pi).unwrap();
        assert!(disc.used_fallback);
        let h = disc.h0_values();
        let x_bar = x2.mean();
        for &hv in h.iter() {
            assert_abs_diff_eq!(hv, x_bar, epsilon = 1e-6);
        }
        let agg: f64 = h.sum() / n as f64;
        assert_abs_diff_eq!(agg, x_bar, epsilon = 1e-6);
    }

    #[test]
    fn tikhonov_instrument_matches_closed_form_for_binary_treatment() {
        // Saturated regressor sieve, rich instrument sieve, tiny penalty: the
        // general estimator agrees with alpha + gamma pi(z).
        let data = binary_data(200, 19);
        let x2 = data.endogenous().column(0).into_owned();
        let z = data.instruments().column(0).into_owned();
        let p = assemble(
            data.controls(),
            &crate::design::build_indicator(&x2).unwrap(),
        )
        .unwrap();
        // Standardize the instrument sieve: the fit is invariant, the
        // condition number of the nearly-unpenalized system is not.
        let q = assemble(data.controls(), &build_bspline(&z, 3, 2).unwrap())
            .unwrap()
            .standardize()
            .unwrap();
        let fit = estimate_instrument(&data, &p, &q, 1e-10, None).unwrap();

        let pm = PropensityModel::estimate(&data, &q).unwrap();
        let (alpha, gamma) = binary_h0(&pm).unwrap();
        let h2 = fit.h2();
        for i in 0..data.n() {
            let expect = alpha + gamma * pm.pi_values()[i];
            assert_abs_diff_eq!(h2[(i, 0)], expect, epsilon = 1e-6);
        }
    }
}

