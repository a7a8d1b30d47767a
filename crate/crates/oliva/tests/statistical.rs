//! Statistical behavior of the estimators on the reference designs: checks
//! that need replications rather than algebra.

use nalgebra::{DMatrix, DVector};
use oliva::design::{sieve_design, KnotRule};
use oliva::exogeneity::standard_hausman;
use oliva::first_stage::{first_stage_diagnostics, FirstStageWorkspace};
use oliva::simulate::{derive_seed, gen_dgp, run_cell, Dgp, DgpConfig, EstimatorSet};
use oliva::special_cases::{binary_oliva, PropensityModel};
use oliva::stats::two_sided_p;
use oliva::structural::estimate_g;
use oliva::Dataset;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn dgp_cfg(dgp: Dgp, rho: f64, gamma: f64, n: usize, seed: u64) -> DgpConfig {
    DgpConfig {
        dgp,
        rho,
        gamma,
        n,
        seed,
    }
}

#[test]
fn first_stage_cross_moment_stays_well_conditioned_on_dgp1() {
    // Instrument strength: the smallest singular value of E_n[h x'] should
    // stay away from zero in nearly every draw.
    let mut strong = 0;
    let total = 40;
    for rep in 0..total {
        let data = gen_dgp(&dgp_cfg(Dgp::One, 0.3, 0.8, 1000, derive_seed(11, rep, 1))).unwrap();
        let p = sieve_design(data.controls(), data.endogenous(), 11, KnotRule::default()).unwrap();
        let q = sieve_design(data.controls(), data.instruments(), 5, KnotRule::default()).unwrap();
        let ws = FirstStageWorkspace::new(&data, &p, &q, None).unwrap();
        let fit = ws.fit(1e-4).unwrap();
        let diag = first_stage_diagnostics(&fit, &data).unwrap();
        if diag.smallest_singular_value > 0.1 {
            strong += 1;
        }
    }
    assert!(
        strong as f64 >= 0.95 * total as f64,
        "only {strong}/{total} draws had smallest singular value > 0.1"
    );
}

#[test]
fn structural_fit_error_decreases_with_sample_size_on_dgp2() {
    // Median L2(n) error of the structural fit against the true curve
    // x + x^2 - 1, across 100 seeds, penalty chosen by structural GCV.
    let lambdas = oliva::selection::default_lambda_grid();
    let mut medians = Vec::new();
    for &n in &[100usize, 500, 1000] {
        let mut errors = Vec::new();
        for rep in 0..100u64 {
            let data =
                gen_dgp(&dgp_cfg(Dgp::Two, 0.3, 0.8, n, derive_seed(23, rep, 2))).unwrap();
            // Structural tuning: swapped block sizes relative to the
            // instrument fit.
            let p = sieve_design(data.controls(), data.endogenous(), 5, KnotRule::default())
                .unwrap();
            let q = sieve_design(data.controls(), data.instruments(), 11, KnotRule::default())
                .unwrap();
            let mut best: Option<(f64, f64)> = None;
            for &lambda in &lambdas {
                let tau = oliva::first_stage::TuningTriple { j: 11, c: 1.0, lambda };
                let score = oliva::selection::gcv_score_structural(&data, &tau);
                if best.is_none_or(|(s, _)| score < s) {
                    best = Some((score, lambda));
                }
            }
            let (_, lambda) = best.unwrap();
            let fit = match estimate_g(&data, &p, &q, lambda) {
                Ok(f) => f,
                Err(_) => continue,
            };
            let x2 = data.endogenous().column(0);
            let mut sq = 0.0;
            for i in 0..n {
                let truth = x2[i] + x2[i] * x2[i] - 1.0;
                let d = fit.fitted()[i] - truth;
                sq += d * d;
            }
            errors.push((sq / n as f64).sqrt());
        }
        errors.sort_by(|a, b| a.partial_cmp(b).unwrap());
        medians.push(errors[errors.len() / 2]);
    }
    assert!(
        medians[0] > medians[1] && medians[1] > medians[2],
        "median structural errors not decreasing: {medians:?}"
    );
}

#[test]
fn stronger_instrument_reduces_iv_mse() {
    let set = EstimatorSet {
        ols: false,
        iv: true,
        tsiv: false,
        hausman: false,
    };
    let weak = run_cell(&dgp_cfg(Dgp::One, 0.3, 0.4, 1000, 0), 300, &set, 5).unwrap();
    let strong = run_cell(&dgp_cfg(Dgp::One, 0.3, 0.8, 1000, 0), 300, &set, 5).unwrap();
    assert!(
        strong.iv.unwrap().mse < weak.iv.unwrap().mse,
        "IV mse did not fall when gamma rose"
    );
}

#[test]
fn ols_bias_tracks_rho_on_the_linear_design() {
    let set = EstimatorSet {
        ols: true,
        iv: false,
        tsiv: false,
        hausman: false,
    };
    for &rho in &[0.0, 0.3, 0.9] {
        let s = run_cell(&dgp_cfg(Dgp::One, rho, 0.8, 1000, 0), 300, &set, 9).unwrap();
        let bias = s.ols.unwrap().bias;
        assert!(
            (bias - rho).abs() <= 0.03,
            "OLS bias {bias:.4} deviates from rho = {rho}"
        );
    }
}

#[test]
fn tsiv_is_competitive_with_the_oracle_instrument_on_dgp1() {
    // On the linear design the raw instrument is the infeasible oracle; the
    // feasible two-step fit should stay within a factor 1.5 in MSE.
    let s = run_cell(
        &dgp_cfg(Dgp::One, 0.3, 0.8, 1000, 0),
        500,
        &EstimatorSet {
            hausman: false,
            ..EstimatorSet::default()
        },
        42,
    )
    .unwrap();
    let tsiv = s.tsiv.unwrap().mse;
    let oracle = s.iv.unwrap().mse;
    assert!(
        tsiv <= 1.5 * oracle,
        "TSIV mse {tsiv:.5} not within 1.5x of oracle {oracle:.5}"
    );
}

#[test]
fn standard_hausman_size_is_nominal_on_the_exact_linear_design() {
    let set = EstimatorSet::default();
    for &gamma in &[0.4, 0.8] {
        let s = run_cell(&dgp_cfg(Dgp::One, 0.0, gamma, 1000, 0), 1000, &set, 13).unwrap();
        let size = s.hausman_standard.unwrap().rate;
        assert!(
            (size - 0.05).abs() <= 0.02,
            "standard Hausman size {size:.3} outside 0.05 ± 0.02 at gamma {gamma}"
        );
    }
}

#[test]
fn robust_hausman_p_values_are_roughly_uniform_under_the_null() {
    // Kolmogorov-Smirnov distance of the null p-values from uniform across
    // 200 draws; the 5% critical value at this sample size is about 0.096.
    let s = run_cell(
        &dgp_cfg(Dgp::One, 0.0, 0.8, 500, 0),
        200,
        &EstimatorSet::default(),
        17,
    )
    .unwrap();
    let mut p_values: Vec<f64> = s
        .robust_stats
        .iter()
        .map(|&t| two_sided_p(t))
        .collect();
    p_values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = p_values.len() as f64;
    let mut ks = 0.0f64;
    for (i, &p) in p_values.iter().enumerate() {
        let upper = (i + 1) as f64 / m - p;
        let lower = p - i as f64 / m;
        ks = ks.max(upper.max(lower));
    }
    assert!(ks < 0.12, "KS distance {ks:.3} too large for uniform p-values");
}

#[test]
fn propensity_iv_slope_is_null_when_outcome_ignores_treatment() {
    // y independent of everything: the slope estimate concentrates near zero.
    let n = 2000;
    let mut rng = StdRng::seed_from_u64(29);
    let z: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0_f64)).collect();
    let x2: Vec<f64> = z
        .iter()
        .map(|&zi| {
            let p = 0.5 + 0.3 * zi;
            if rng.gen_range(0.0..1.0) < p {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let data = Dataset::with_intercept_only(
        DVector::from_vec(y),
        DMatrix::from_column_slice(n, 1, &x2),
        DMatrix::from_column_slice(n, 1, &z),
    )
    .unwrap();
    let q = sieve_design(data.controls(), data.instruments(), 4, KnotRule::default()).unwrap();
    let pm = PropensityModel::estimate(&data, &q).unwrap();
    let (_, slope) = binary_oliva(&data, &pm).unwrap();
    // Crude scale bound: 3 standard errors of an IV slope with var(y) ~ 1/3.
    assert!(slope.abs() < 0.2, "null-effect slope {slope:.4} too large");
}

#[test]
fn endogenous_design_rejects_with_both_tests() {
    let data = gen_dgp(&dgp_cfg(Dgp::One, 0.9, 0.8, 1000, 99)).unwrap();
    let p = sieve_design(data.controls(), data.endogenous(), 11, KnotRule::default()).unwrap();
    let q = sieve_design(data.controls(), data.instruments(), 5, KnotRule::default()).unwrap();
    let fit = FirstStageWorkspace::new(&data, &p, &q, None)
        .unwrap()
        .fit(1e-4)
        .unwrap();
    let robust = oliva::exogeneity::robust_hausman(&data, &fit).unwrap();
    let standard = standard_hausman(&data).unwrap();
    assert!(robust.p_value < 0.01, "robust p {:.4}", robust.p_value);
    assert!(standard.p_value < 0.01, "standard p {:.4}", standard.p_value);
}
