//! Full-data estimation flow shared by the `estimate` and `hausman`
//! commands: grid search, instrument fit, structural fit, inference.

use oliva::design::sieve_design;
use oliva::first_stage::{
    first_stage_diagnostics, FirstStageDiagnostics, FirstStageWorkspace, InstrumentFit,
    TuningTriple,
};
use oliva::selection::{select, GcvEntry, GcvGrid};
use oliva::structural::estimate_g;
use oliva::tsiv::TsivFit;
use oliva::{Dataset, OlivaError, Result};

pub struct EstimateOutcome {
    pub fit: TsivFit,
    pub instrument: InstrumentFit,
    pub chosen: TuningTriple,
    pub lambda_structural: f64,
    pub score_table: Vec<GcvEntry>,
    pub diagnostics: FirstStageDiagnostics,
}

/// Run the full pipeline: choose the tuning triple by GCV over `grid`, fit
/// the instrument and the structural regression, and assemble the IV fit
/// with sandwich standard errors.
pub fn run_estimate(data: &Dataset, grid: &GcvGrid, level: f64) -> Result<EstimateOutcome> {
    let selection = select(data, grid)?;
    let chosen = selection.chosen;

    let p = sieve_design(
        data.controls(),
        data.endogenous(),
        chosen.k(),
        grid.knot_rule,
    )?;
    let q = sieve_design(data.controls(), data.instruments(), chosen.j, grid.knot_rule)?;
    let ws = FirstStageWorkspace::new(data, &p, &q, None)?;
    let instrument = ws.fit(chosen.lambda)?;

    // Structural fit on the same sieve pair; its penalty gets its own GCV
    // pass over the grid's penalty list.
    let mut best: Option<(f64, f64)> = None;
    for &lambda in &grid.lambda_values {
        let tau = TuningTriple {
            j: chosen.j,
            c: chosen.c,
            lambda,
        };
        let score = oliva::selection::gcv_score_structural(data, &tau);
        let replace = match best {
            None => score.is_finite(),
            Some((s, l)) => score < s || (score == s && lambda > l),
        };
        if replace {
            best = Some((score, lambda));
        }
    }
    let (_, lambda_structural) = best.ok_or(OlivaError::AllScoresInfinite)?;
    let structural = estimate_g(data, &p, &q, lambda_structural)?;

    let fit = oliva::tsiv::estimate(data, &instrument, &structural, level, Some(chosen))?;
    let diagnostics = first_stage_diagnostics(&instrument, data)?;
    Ok(EstimateOutcome {
        fit,
        instrument,
        chosen,
        lambda_structural,
        score_table: selection.table,
        diagnostics,
    })
}
