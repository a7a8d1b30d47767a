//! Command-line front end: data ingestion, estimation, exogeneity testing
//! and the replication harness.
//!
//! Exit codes: 0 on success, 2 for input problems (files, roles, malformed
//! values), 3 for numerical failures (singular systems, rank-deficient
//! instruments).

mod config;
mod data;
mod pipeline;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use config::{fall_back, ConfigFile};
use data::ColumnRoles;
use oliva::design::KnotRule;
use oliva::selection::{GcvGrid, GcvTarget};
use oliva::simulate::{
    run_cell_with, size_corrected_power, Dgp, DgpConfig, EstimatorSet, McOptions, McTuning,
};
use oliva::{OlivaError, Result};
use report::SimRow;

#[derive(Parser)]
#[command(
    name = "oliva",
    about = "Two-step IV estimation with a regularized nonparametric first stage",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the IV coefficients on a CSV dataset.
    Estimate(EstimateArgs),
    /// Run the robust and standard Hausman exogeneity tests.
    Hausman(EstimateArgs),
    /// Reproduce Monte Carlo table cells.
    Simulate(SimulateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputFormat {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum KnotsArg {
    Uniform,
    Quantile,
}

#[derive(Args)]
struct EstimateArgs {
    /// Input CSV with a header row.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Outcome column name.
    #[arg(long)]
    outcome: Option<String>,
    /// Endogenous column names (comma separated).
    #[arg(long, value_delimiter = ',')]
    endogenous: Vec<String>,
    /// Exogenous control column names (comma separated; an intercept is
    /// always prepended).
    #[arg(long, value_delimiter = ',')]
    controls: Vec<String>,
    /// Excluded instrument column names (comma separated).
    #[arg(long, value_delimiter = ',')]
    instruments: Vec<String>,
    /// Confidence level for the reported intervals.
    #[arg(long)]
    level: Option<f64>,
    /// Instrument-block sizes searched by GCV.
    #[arg(long, value_delimiter = ',')]
    j_values: Vec<usize>,
    /// Sieve ratios searched by GCV.
    #[arg(long, value_delimiter = ',')]
    c_values: Vec<f64>,
    /// Penalties searched by GCV.
    #[arg(long, value_delimiter = ',')]
    lambda_values: Vec<f64>,
    /// Interior knot placement for spline blocks.
    #[arg(long, value_enum)]
    knots: Option<KnotsArg>,
    /// Report format.
    #[arg(long, value_enum)]
    format: Option<OutputFormat>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
    /// key=value config file mirroring these flags.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Data generating process (1, 2 or 3).
    #[arg(long)]
    dgp: Option<u8>,
    /// Endogeneity levels (comma separated).
    #[arg(long, value_delimiter = ',')]
    rho: Vec<f64>,
    /// Instrument-strength levels (comma separated).
    #[arg(long, value_delimiter = ',')]
    gamma: Vec<f64>,
    /// Sample sizes (comma separated).
    #[arg(long, value_delimiter = ',')]
    n: Vec<usize>,
    /// Replications per cell.
    #[arg(long)]
    reps: Option<usize>,
    /// Base seed; replication streams are derived positionally.
    #[arg(long)]
    seed: Option<u64>,
    /// Scale applied to the GCV-selected penalty before inference.
    #[arg(long)]
    lambda_multiplier: Option<f64>,
    /// Penalty grid for the first-stage search.
    #[arg(long, value_delimiter = ',')]
    lambda_values: Vec<f64>,
    /// Spline columns for the instrument block.
    #[arg(long)]
    j_block: Option<usize>,
    /// Spline columns for the regressor block.
    #[arg(long)]
    k_block: Option<usize>,
    /// Interior knot placement for spline blocks.
    #[arg(long, value_enum)]
    knots: Option<KnotsArg>,
    /// Report format.
    #[arg(long, value_enum)]
    format: Option<OutputFormat>,
    /// Write the table here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
    /// key=value config file mirroring these flags.
    #[arg(long)]
    config: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Ok(threads) = std::env::var("OLIVA_THREADS") {
        match threads.parse::<usize>() {
            Ok(t) if t > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
            }
            _ => {
                eprintln!("error: OLIVA_THREADS must be a positive integer, got '{threads}'");
                return ExitCode::from(2);
            }
        }
    }
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Estimate(args) => run_estimate_command(args, false),
        Command::Hausman(args) => run_estimate_command(args, true),
        Command::Simulate(args) => run_simulate_command(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            if let Some(hint) = remediation_hint(&err) {
                eprintln!("hint: {hint}");
            }
            ExitCode::from(error_code(&err))
        }
    }
}

/// 2 for input problems, 3 for numerical failures.
fn error_code(err: &OlivaError) -> u8 {
    match err {
        OlivaError::ParseError { .. }
        | OlivaError::RoleError(_)
        | OlivaError::InvalidLevel(_)
        | OlivaError::InvalidDgp(_)
        | OlivaError::DegenerateInput(_)
        | OlivaError::ShapeMismatch(_)
        | OlivaError::SchemaMismatch(_)
        | OlivaError::UnsupportedDegree(_)
        | OlivaError::InsufficientSamples
        | OlivaError::InsufficientData { .. } => 2,
        OlivaError::SingularSystem { .. }
        | OlivaError::RankDeficient { .. }
        | OlivaError::InstrumentRankDeficient { .. }
        | OlivaError::CollinearAugmentation
        | OlivaError::DegenerateTrace { .. }
        | OlivaError::AllScoresInfinite
        | OlivaError::DegenerateTreatment(_)
        | OlivaError::ConstantPropensity(_)
        | OlivaError::WeakPropensity(_) => 3,
    }
}

fn remediation_hint(err: &OlivaError) -> Option<&'static str> {
    match err {
        OlivaError::SingularSystem { .. } | OlivaError::AllScoresInfinite => Some(
            "enlarge the penalty grid (--lambda-values) or reduce the sieve sizes (--j-values, --c-values)",
        ),
        OlivaError::InstrumentRankDeficient { .. } => Some(
            "the instrument cross moment matches E[xx'] when the first stage holds, so near-singularity signals multicollinearity among the regressors",
        ),
        OlivaError::RankDeficient { .. } => {
            Some("the sieve design has collinear columns; reduce the block sizes")
        }
        OlivaError::CollinearAugmentation => Some(
            "the first stage is an exact linear function of the controls; the test is uninformative",
        ),
        _ => None,
    }
}

fn write_report(output: Option<&PathBuf>, body: &str) -> Result<()> {
    match output {
        Some(path) => std::fs::write(path, body).map_err(|e| OlivaError::ParseError {
            line: 0,
            column: path.display().to_string(),
            message: e.to_string(),
        }),
        None => {
            print!("{body}");
            Ok(())
        }
    }
}

struct EstimateSetup {
    roles: ColumnRoles,
    input: PathBuf,
    level: f64,
    grid: GcvGrid,
    format: OutputFormat,
    output: Option<PathBuf>,
}

fn resolve_estimate(mut args: EstimateArgs) -> Result<EstimateSetup> {
    let config = match &args.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    fall_back(&mut args.input, &config, "input")?;
    fall_back(&mut args.outcome, &config, "outcome")?;
    fall_back(&mut args.level, &config, "level")?;
    let list_fallback = |current: &mut Vec<String>, key: &str| {
        if current.is_empty() {
            if let Some(raw) = config.get(key) {
                *current = raw.split(',').map(|s| s.trim().to_string()).collect();
            }
        }
    };
    list_fallback(&mut args.endogenous, "endogenous");
    list_fallback(&mut args.controls, "controls");
    list_fallback(&mut args.instruments, "instruments");
    if args.j_values.is_empty() {
        if let Some(raw) = config.get("j-values") {
            args.j_values = parse_list(raw, "j-values")?;
        }
    }
    if args.c_values.is_empty() {
        if let Some(raw) = config.get("c-values") {
            args.c_values = parse_list(raw, "c-values")?;
        }
    }
    if args.lambda_values.is_empty() {
        if let Some(raw) = config.get("lambda-values") {
            args.lambda_values = parse_list(raw, "lambda-values")?;
        }
    }
    if args.knots.is_none() {
        if let Some(raw) = config.get("knots") {
            args.knots = Some(parse_knots(raw)?);
        }
    }
    if args.format.is_none() {
        if let Some(raw) = config.get("format") {
            args.format = Some(parse_format(raw)?);
        }
    }
    if args.output.is_none() {
        if let Some(raw) = config.get("output") {
            args.output = Some(PathBuf::from(raw));
        }
    }

    let input = args
        .input
        .ok_or_else(|| OlivaError::RoleError("--input is required".into()))?;
    let outcome = args
        .outcome
        .ok_or_else(|| OlivaError::RoleError("--outcome is required".into()))?;
    let roles = ColumnRoles {
        outcome,
        endogenous: args.endogenous,
        controls: args.controls,
        instruments: args.instruments,
    };
    let mut grid = GcvGrid::default_for(GcvTarget::Tsiv);
    if !args.j_values.is_empty() {
        grid.j_values = args.j_values;
    }
    if !args.c_values.is_empty() {
        grid.c_values = args.c_values;
    }
    if !args.lambda_values.is_empty() {
        grid.lambda_values = args.lambda_values;
    }
    if let Some(knots) = args.knots {
        grid.knot_rule = knot_rule(knots);
    }
    Ok(EstimateSetup {
        roles,
        input,
        level: args.level.unwrap_or(0.95),
        grid,
        format: args.format.unwrap_or(OutputFormat::Json),
        output: args.output,
    })
}

fn parse_knots(raw: &str) -> Result<KnotsArg> {
    match raw {
        "uniform" => Ok(KnotsArg::Uniform),
        "quantile" => Ok(KnotsArg::Quantile),
        other => Err(OlivaError::ParseError {
            line: 0,
            column: "knots".into(),
            message: format!("unknown knot rule '{other}'"),
        }),
    }
}

fn parse_format(raw: &str) -> Result<OutputFormat> {
    match raw {
        "json" => Ok(OutputFormat::Json),
        "csv" => Ok(OutputFormat::Csv),
        other => Err(OlivaError::ParseError {
            line: 0,
            column: "format".into(),
            message: format!("unknown format '{other}'"),
        }),
    }
}

fn knot_rule(arg: KnotsArg) -> KnotRule {
    match arg {
        KnotsArg::Uniform => KnotRule::Uniform,
        KnotsArg::Quantile => KnotRule::Quantile,
    }
}

fn parse_list<T: std::str::FromStr>(raw: &str, key: &str) -> Result<Vec<T>> {
    raw.split(',')
        .map(|v| {
            v.trim().parse().map_err(|_| OlivaError::ParseError {
                line: 0,
                column: key.to_string(),
                message: format!("cannot parse '{v}'"),
            })
        })
        .collect()
}

fn run_estimate_command(args: EstimateArgs, hausman: bool) -> Result<()> {
    let setup = resolve_estimate(args)?;
    let data = data::read_dataset(&setup.input, &setup.roles)?;
    let outcome = pipeline::run_estimate(&data, &setup.grid, setup.level)?;
    let body = if hausman {
        let robust = oliva::exogeneity::robust_hausman(&data, &outcome.instrument)?;
        let standard = oliva::exogeneity::standard_hausman(&data)?;
        match setup.format {
            OutputFormat::Json => report::hausman_json(&outcome, &robust, &standard),
            OutputFormat::Csv => report::hausman_csv(&robust, &standard),
        }
    } else {
        match setup.format {
            OutputFormat::Json => report::estimate_json(&outcome, &setup.roles),
            OutputFormat::Csv => report::estimate_csv(&outcome, &setup.roles),
        }
    };
    write_report(setup.output.as_ref(), &body)
}

fn run_simulate_command(mut args: SimulateArgs) -> Result<()> {
    let config = match &args.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    fall_back(&mut args.dgp, &config, "dgp")?;
    fall_back(&mut args.reps, &config, "reps")?;
    fall_back(&mut args.seed, &config, "seed")?;
    fall_back(&mut args.lambda_multiplier, &config, "lambda-multiplier")?;
    fall_back(&mut args.j_block, &config, "j-block")?;
    fall_back(&mut args.k_block, &config, "k-block")?;
    if args.rho.is_empty() {
        if let Some(raw) = config.get("rho") {
            args.rho = parse_list(raw, "rho")?;
        }
    }
    if args.gamma.is_empty() {
        if let Some(raw) = config.get("gamma") {
            args.gamma = parse_list(raw, "gamma")?;
        }
    }
    if args.n.is_empty() {
        if let Some(raw) = config.get("n") {
            args.n = parse_list(raw, "n")?;
        }
    }
    if args.lambda_values.is_empty() {
        if let Some(raw) = config.get("lambda-values") {
            args.lambda_values = parse_list(raw, "lambda-values")?;
        }
    }
    if args.knots.is_none() {
        if let Some(raw) = config.get("knots") {
            args.knots = Some(parse_knots(raw)?);
        }
    }
    if args.format.is_none() {
        if let Some(raw) = config.get("format") {
            args.format = Some(parse_format(raw)?);
        }
    }
    if args.output.is_none() {
        if let Some(raw) = config.get("output") {
            args.output = Some(PathBuf::from(raw));
        }
    }

    let dgp = Dgp::from_index(
        args.dgp
            .ok_or_else(|| OlivaError::InvalidDgp("--dgp is required".into()))?,
    )?;
    let reps = args.reps.unwrap_or(1000);
    let seed = args.seed.unwrap_or(0);
    if args.rho.is_empty() {
        args.rho = vec![0.0, 0.3, 0.9];
    }
    if args.gamma.is_empty() {
        args.gamma = vec![0.4, 0.8];
    }
    if args.n.is_empty() {
        args.n = vec![1000];
    }

    let mut tuning = McTuning::default();
    if let Some(j) = args.j_block {
        tuning.instrument_block = j;
    }
    if let Some(k) = args.k_block {
        tuning.regressor_block = k;
    }
    if !args.lambda_values.is_empty() {
        tuning.lambda_grid = args.lambda_values.clone();
    }
    if let Some(mult) = args.lambda_multiplier {
        tuning.lambda_multiplier = mult;
    }
    if let Some(knots) = args.knots {
        tuning.knot_rule = knot_rule(knots);
    }
    let options = McOptions {
        tuning,
        ..McOptions::default()
    };

    // One cell per (gamma, n, rho); null cells (rho = 0) anchor the
    // size-corrected power for the other rows of the same (gamma, n).
    let mut rows: Vec<SimRow> = Vec::new();
    for &gamma in &args.gamma {
        for &n in &args.n {
            let mut null_stats: Option<(Vec<f64>, Vec<f64>)> = None;
            let mut block: Vec<SimRow> = Vec::new();
            for &rho in &args.rho {
                let cfg = DgpConfig {
                    dgp,
                    rho,
                    gamma,
                    n,
                    seed: 0,
                };
                let summary = run_cell_with(&cfg, reps, &EstimatorSet::default(), seed, &options)?;
                if rho == 0.0 {
                    null_stats =
                        Some((summary.standard_stats.clone(), summary.robust_stats.clone()));
                }
                block.push(SimRow {
                    summary,
                    power_standard: None,
                    power_robust: None,
                });
            }
            if let Some((null_s, null_r)) = &null_stats {
                for row in &mut block {
                    if row.summary.rho > 0.0 {
                        row.power_standard =
                            size_corrected_power(null_s, &row.summary.standard_stats, 0.05).ok();
                        row.power_robust =
                            size_corrected_power(null_r, &row.summary.robust_stats, 0.05).ok();
                    }
                }
            }
            rows.extend(block);
        }
    }

    let body = match args.format.unwrap_or(OutputFormat::Csv) {
        OutputFormat::Csv => report::simulate_csv(&rows),
        OutputFormat::Json => report::simulate_json(&rows),
    };
    write_report(args.output.as_ref(), &body)
}
