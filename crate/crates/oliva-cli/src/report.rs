//! JSON and CSV report emission. All numbers are written with Rust's
//! shortest round-trip float formatting, so emitted tables re-parse to the
//! exact values and identical runs produce identical bytes.

use oliva::exogeneity::HausmanResult;
use oliva::simulate::McSummary;
use serde::Serialize;

use crate::data::ColumnRoles;
use crate::pipeline::EstimateOutcome;

#[derive(Serialize)]
struct Coefficient {
    name: String,
    estimate: f64,
    se: f64,
    ci_lower: f64,
    ci_upper: f64,
}

#[derive(Serialize)]
struct TuningReport {
    j: usize,
    c: f64,
    k: usize,
    lambda: f64,
    lambda_structural: f64,
}

#[derive(Serialize)]
struct EstimateReport<'a> {
    schema: u32,
    command: &'static str,
    n: usize,
    level: f64,
    coefficients: Vec<Coefficient>,
    tuning: TuningReport,
    diagnostics: &'a oliva::first_stage::FirstStageDiagnostics,
    instrument_condition: f64,
    score_table: &'a [oliva::selection::GcvEntry],
}

fn coefficients(outcome: &EstimateOutcome, names: &[String]) -> Vec<Coefficient> {
    names
        .iter()
        .enumerate()
        .map(|(i, name)| Coefficient {
            name: name.clone(),
            estimate: outcome.fit.beta[i],
            se: outcome.fit.se[i],
            ci_lower: outcome.fit.ci[i].0,
            ci_upper: outcome.fit.ci[i].1,
        })
        .collect()
}

pub fn estimate_json(outcome: &EstimateOutcome, roles: &ColumnRoles) -> String {
    let names = crate::data::coefficient_names(roles);
    let report = EstimateReport {
        schema: 1,
        command: "estimate",
        n: outcome.fit.n,
        level: outcome.fit.level,
        coefficients: coefficients(outcome, &names),
        tuning: TuningReport {
            j: outcome.chosen.j,
            c: outcome.chosen.c,
            k: outcome.chosen.k(),
            lambda: outcome.chosen.lambda,
            lambda_structural: outcome.lambda_structural,
        },
        diagnostics: &outcome.diagnostics,
        instrument_condition: outcome.fit.condition,
        score_table: &outcome.score_table,
    };
    serde_json::to_string_pretty(&report).expect("serializable report")
}

pub fn estimate_csv(outcome: &EstimateOutcome, roles: &ColumnRoles) -> String {
    let names = crate::data::coefficient_names(roles);
    let mut out = String::from("name,estimate,se,ci_lower,ci_upper\n");
    for c in coefficients(outcome, &names) {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            c.name, c.estimate, c.se, c.ci_lower, c.ci_upper
        ));
    }
    out
}

#[derive(Serialize)]
struct HausmanReport<'a> {
    schema: u32,
    command: &'static str,
    n: usize,
    robust: &'a HausmanResult,
    standard: &'a HausmanResult,
    tuning: TuningReport,
    diagnostics: &'a oliva::first_stage::FirstStageDiagnostics,
}

pub fn hausman_json(
    outcome: &EstimateOutcome,
    robust: &HausmanResult,
    standard: &HausmanResult,
) -> String {
    let report = HausmanReport {
        schema: 1,
        command: "hausman",
        n: outcome.fit.n,
        robust,
        standard,
        tuning: TuningReport {
            j: outcome.chosen.j,
            c: outcome.chosen.c,
            k: outcome.chosen.k(),
            lambda: outcome.chosen.lambda,
            lambda_structural: outcome.lambda_structural,
        },
        diagnostics: &outcome.diagnostics,
    };
    serde_json::to_string_pretty(&report).expect("serializable report")
}

pub fn hausman_csv(robust: &HausmanResult, standard: &HausmanResult) -> String {
    let mut out = String::from("variant,coefficient,statistic,p_value,rho_hat,se_rho\n");
    for r in [robust, standard] {
        let variant = match r.variant {
            oliva::exogeneity::HausmanVariant::Robust => "robust",
            oliva::exogeneity::HausmanVariant::Standard => "standard",
        };
        for j in 0..r.rho_hat.len() {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                variant, j, r.statistic, r.p_value, r.rho_hat[j], r.se_rho[j]
            ));
        }
    }
    out
}

/// One output row of the simulation table: cell summary plus optional
/// size-corrected power against the matching `rho = 0` cell.
pub struct SimRow {
    pub summary: McSummary,
    pub power_standard: Option<f64>,
    pub power_robust: Option<f64>,
}

pub const SIM_CSV_HEADER: &str = "dgp,rho,gamma,n,replications,failures,\
BIAS_OLS,BIAS_IV,BIAS_TSIV,MSE_OLS,MSE_IV,MSE_TSIV,COVERAGE_TSIV,REJ_STANDARD,REJ_ROBUST,\
POWER_STANDARD,POWER_ROBUST,\
SE_BIAS_OLS,SE_BIAS_IV,SE_BIAS_TSIV,SE_MSE_OLS,SE_MSE_IV,SE_MSE_TSIV,SE_COVERAGE_TSIV,\
SE_REJ_STANDARD,SE_REJ_ROBUST";

fn opt(value: Option<f64>) -> String {
    value.map_or(String::new(), |v| format!("{v}"))
}

pub fn simulate_csv(rows: &[SimRow]) -> String {
    let mut out = String::from(SIM_CSV_HEADER);
    out.push('\n');
    for row in rows {
        let s = &row.summary;
        let ols = s.ols.as_ref();
        let iv = s.iv.as_ref();
        let tsiv = s.tsiv.as_ref();
        let cov = s.coverage.as_ref();
        let hs = s.hausman_standard.as_ref();
        let hr = s.hausman_robust.as_ref();
        let fields: Vec<String> = vec![
            format!("{}", s.dgp),
            format!("{}", s.rho),
            format!("{}", s.gamma),
            format!("{}", s.n),
            format!("{}", s.replications),
            format!("{}", s.failures),
            opt(ols.map(|c| c.bias)),
            opt(iv.map(|c| c.bias)),
            opt(tsiv.map(|c| c.bias)),
            opt(ols.map(|c| c.mse)),
            opt(iv.map(|c| c.mse)),
            opt(tsiv.map(|c| c.mse)),
            opt(cov.map(|c| c.rate)),
            opt(hs.map(|c| c.rate)),
            opt(hr.map(|c| c.rate)),
            opt(row.power_standard),
            opt(row.power_robust),
            opt(ols.map(|c| c.bias_se)),
            opt(iv.map(|c| c.bias_se)),
            opt(tsiv.map(|c| c.bias_se)),
            opt(ols.map(|c| c.mse_se)),
            opt(iv.map(|c| c.mse_se)),
            opt(tsiv.map(|c| c.mse_se)),
            opt(cov.map(|c| c.se)),
            opt(hs.map(|c| c.se)),
            opt(hr.map(|c| c.se)),
        ];
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

#[derive(Serialize)]
struct SimJsonRow<'a> {
    #[serde(flatten)]
    summary: &'a McSummary,
    power_standard: Option<f64>,
    power_robust: Option<f64>,
}

pub fn simulate_json(rows: &[SimRow]) -> String {
    #[derive(Serialize)]
    struct Wrapper<'a> {
        schema: u32,
        command: &'static str,
        cells: Vec<SimJsonRow<'a>>,
    }
    let wrapper = Wrapper {
        schema: 1,
        command: "simulate",
        cells: rows
            .iter()
            .map(|r| SimJsonRow {
                summary: &r.summary,
                power_standard: r.power_standard,
                power_robust: r.power_robust,
            })
            .collect(),
    };
    serde_json::to_string_pretty(&wrapper).expect("serializable report")
}
