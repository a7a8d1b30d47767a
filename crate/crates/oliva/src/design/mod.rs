//! Sieve design matrices: B-spline, indicator and linear blocks assembled
//! next to exogenous controls, plus standardization and projection.

mod bspline;
mod projector;

pub use bspline::{BSplineBasis, KnotRule};
pub use projector::Projector;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{OlivaError, Result};

/// Relative eigenvalue tolerance below which a second-moment matrix is
/// treated as singular.
const MOMENT_RANK_TOLERANCE: f64 = 1e-12;

/// Description of one nonparametric block of a design matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum BasisSpec {
    /// B-spline block; the intercept-redundant first basis function is
    /// dropped, leaving `degree + interior_knots` columns.
    BSpline { degree: usize, interior_knots: usize },
    /// One column per level after the first (the first level is absorbed by
    /// the intercept among the controls).
    Indicator { levels: Vec<f64> },
    /// Raw column passthrough.
    Linear,
}

impl BasisSpec {
    pub fn column_count(&self) -> usize {
        match self {
            BasisSpec::BSpline {
                degree,
                interior_knots,
            } => degree + interior_knots,
            BasisSpec::Indicator { levels } => levels.len() - 1,
            BasisSpec::Linear => 1,
        }
    }
}

#[derive(Debug, Clone)]
enum BlockEval {
    BSpline(BSplineBasis),
    Indicator { levels: Vec<f64> },
    Linear,
}

#[derive(Debug, Clone)]
struct Block {
    spec: BasisSpec,
    eval: BlockEval,
}

/// An evaluated sieve basis with column metadata.
///
/// Layout is `[controls | block columns]`; the block may itself consist of
/// several univariate bases (one per raw source column, used for additive
/// multi-instrument designs). The standardizing transform, once applied, is
/// stored so out-of-sample evaluation reproduces the training columns.
#[derive(Debug, Clone)]
pub struct DesignMatrix {
    values: DMatrix<f64>,
    control_cols: usize,
    blocks: Vec<Block>,
    standardizer: Option<DMatrix<f64>>,
}

/// Build a B-spline block for `x` with the default (uniform) knot rule.
pub fn build_bspline(x: &DVector<f64>, degree: usize, interior_knots: usize) -> Result<DesignMatrix> {
    build_bspline_with(x, degree, interior_knots, KnotRule::default())
}

/// Build a B-spline block for `x` with an explicit knot placement rule.
pub fn build_bspline_with(
    x: &DVector<f64>,
    degree: usize,
    interior_knots: usize,
    rule: KnotRule,
) -> Result<DesignMatrix> {
    let basis = BSplineBasis::from_data(x, degree, interior_knots, rule)?;
    let (full, _) = basis.eval_matrix(x);
    // Drop the first basis function: together with an intercept the full
    // partition-of-unity basis would be collinear.
    let values = full.columns(1, full.ncols() - 1).into_owned();
    Ok(DesignMatrix {
        values,
        control_cols: 0,
        blocks: vec![Block {
            spec: BasisSpec::BSpline {
                degree,
                interior_knots,
            },
            eval: BlockEval::BSpline(basis),
        }],
        standardizer: None,
    })
}

/// Build an indicator block for a discrete regressor, dropping the first
/// level.
pub fn build_indicator(x: &DVector<f64>) -> Result<DesignMatrix> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(OlivaError::DegenerateInput(
            "discrete regressor contains non-finite values".into(),
        ));
    }
    let mut levels: Vec<f64> = x.iter().copied().collect();
    levels.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    levels.dedup();
    if levels.len() < 2 {
        return Err(OlivaError::DegenerateInput(
            "discrete regressor has a single level".into(),
        ));
    }
    let n = x.len();
    let cols = levels.len() - 1;
    let values = DMatrix::from_fn(n, cols, |i, k| if x[i] == levels[k + 1] { 1.0 } else { 0.0 });
    Ok(DesignMatrix {
        values,
        control_cols: 0,
        blocks: vec![Block {
            spec: BasisSpec::Indicator {
                levels: levels.clone(),
            },
            eval: BlockEval::Indicator { levels },
        }],
        standardizer: None,
    })
}

/// Concatenate exogenous controls (which must include an intercept column)
/// with a nonparametric block, recording the block boundary.
pub fn assemble(controls: &DMatrix<f64>, block: &DesignMatrix) -> Result<DesignMatrix> {
    if controls.nrows() != block.values.nrows() {
        return Err(OlivaError::ShapeMismatch(format!(
            "controls have {} rows, block has {}",
            controls.nrows(),
            block.values.nrows()
        )));
    }
    if block.control_cols != 0 {
        return Err(OlivaError::ShapeMismatch(
            "block already contains control columns".into(),
        ));
    }
    let has_intercept = (0..controls.ncols())
        .any(|j| controls.column(j).iter().all(|&v| v == 1.0));
    if !has_intercept {
        return Err(OlivaError::DegenerateInput(
            "controls must contain an intercept column".into(),
        ));
    }
    let n = controls.nrows();
    let p1 = controls.ncols();
    let bc = block.values.ncols();
    let mut values = DMatrix::zeros(n, p1 + bc);
    values.view_mut((0, 0), (n, p1)).copy_from(controls);
    values.view_mut((0, p1), (n, bc)).copy_from(&block.values);
    Ok(DesignMatrix {
        values,
        control_cols: p1,
        blocks: block.blocks.clone(),
        standardizer: block.standardizer.clone(),
    })
}

/// Stack several control-free blocks side by side (additive multivariate
/// designs: one univariate basis per raw column).
pub fn concat_blocks(parts: &[DesignMatrix]) -> Result<DesignMatrix> {
    let first = parts
        .first()
        .ok_or_else(|| OlivaError::DegenerateInput("no blocks to concatenate".into()))?;
    let n = first.values.nrows();
    let mut blocks = Vec::new();
    let mut total = 0;
    for part in parts {
        if part.values.nrows() != n {
            return Err(OlivaError::ShapeMismatch(
                "blocks have differing row counts".into(),
            ));
        }
        if part.control_cols != 0 || part.standardizer.is_some() {
            return Err(OlivaError::ShapeMismatch(
                "only raw control-free blocks can be concatenated".into(),
            ));
        }
        total += part.values.ncols();
        blocks.extend(part.blocks.iter().cloned());
    }
    let mut values = DMatrix::zeros(n, total);
    let mut at = 0;
    for part in parts {
        let c = part.values.ncols();
        values.view_mut((0, at), (n, c)).copy_from(&part.values);
        at += c;
    }
    Ok(DesignMatrix {
        values,
        control_cols: 0,
        blocks,
        standardizer: None,
    })
}

impl DesignMatrix {
    /// Wrap raw columns as linear blocks (saturated or hand-built bases).
    pub fn from_columns(values: DMatrix<f64>) -> Self {
        let blocks = (0..values.ncols())
            .map(|_| Block {
                spec: BasisSpec::Linear,
                eval: BlockEval::Linear,
            })
            .collect();
        Self {
            values,
            control_cols: 0,
            blocks,
            standardizer: None,
        }
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    pub fn control_cols(&self) -> usize {
        self.control_cols
    }

    pub fn block_cols(&self) -> usize {
        self.values.ncols() - self.control_cols
    }

    /// The control columns (empty matrix when the design has none).
    pub fn controls(&self) -> DMatrix<f64> {
        self.values
            .columns(0, self.control_cols)
            .into_owned()
    }

    /// The nonparametric block columns.
    pub fn block(&self) -> DMatrix<f64> {
        self.values
            .columns(self.control_cols, self.block_cols())
            .into_owned()
    }

    pub fn specs(&self) -> Vec<&BasisSpec> {
        self.blocks.iter().map(|b| &b.spec).collect()
    }

    pub fn standardizer(&self) -> Option<&DMatrix<f64>> {
        self.standardizer.as_ref()
    }

    /// Replace the block by `block * M` where `M` is the inverse symmetric
    /// square root of the block's sample second-moment matrix, so that the
    /// standardized block satisfies `B'B / n = I`.
    pub fn standardize(&self) -> Result<DesignMatrix> {
        let bc = self.block_cols();
        if bc == 0 {
            return Ok(self.clone());
        }
        let n = self.n() as f64;
        let block = self.block();
        let moment = block.transpose() * &block / n;
        let eig = SymmetricEigen::new(moment);
        let max = eig.eigenvalues.amax();
        let min = eig.eigenvalues.min();
        if max <= 0.0 || max.is_nan() || min < MOMENT_RANK_TOLERANCE * max {
            return Err(OlivaError::RankDeficient {
                ratio: if max > 0.0 { min / max } else { 0.0 },
                tolerance: MOMENT_RANK_TOLERANCE,
            });
        }
        let inv_sqrt = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()));
        let m = &eig.eigenvectors * inv_sqrt * eig.eigenvectors.transpose();
        let new_block = block * &m;
        let mut values = self.values.clone();
        values
            .view_mut((0, self.control_cols), (self.n(), bc))
            .copy_from(&new_block);
        let standardizer = match &self.standardizer {
            Some(prev) => prev * &m,
            None => m,
        };
        Ok(DesignMatrix {
            values,
            control_cols: self.control_cols,
            blocks: self.blocks.clone(),
            standardizer: Some(standardizer),
        })
    }

    /// Re-evaluate the design at new data.
    ///
    /// `controls_new` must have as many columns as the training controls and
    /// `raw_new` one column per block (the raw regressor each basis was built
    /// from). Returns the design rows and the number of rows that required
    /// extrapolation outside a spline's training range.
    pub fn evaluate(
        &self,
        controls_new: &DMatrix<f64>,
        raw_new: &DMatrix<f64>,
    ) -> Result<(DMatrix<f64>, usize)> {
        if controls_new.ncols() != self.control_cols {
            return Err(OlivaError::SchemaMismatch(format!(
                "expected {} control columns, got {}",
                self.control_cols,
                controls_new.ncols()
            )));
        }
        if raw_new.ncols() != self.blocks.len() {
            return Err(OlivaError::SchemaMismatch(format!(
                "expected {} raw block columns, got {}",
                self.blocks.len(),
                raw_new.ncols()
            )));
        }
        let m = raw_new.nrows();
        if self.control_cols > 0 && controls_new.nrows() != m {
            return Err(OlivaError::SchemaMismatch(
                "control rows differ from block rows".into(),
            ));
        }
        let mut extrapolated = 0;
        let mut block_vals = DMatrix::zeros(m, self.block_cols());
        let mut at = 0;
        for (b, block) in self.blocks.iter().enumerate() {
            let xcol = raw_new.column(b).into_owned();
            let cols = block.spec.column_count();
            match &block.eval {
                BlockEval::BSpline(basis) => {
                    let (full, ex) = basis.eval_matrix(&xcol);
                    extrapolated += ex;
                    block_vals
                        .view_mut((0, at), (m, cols))
                        .copy_from(&full.columns(1, cols).into_owned());
                }
                BlockEval::Indicator { levels } => {
                    for (i, &v) in xcol.iter().enumerate() {
                        if !levels.contains(&v) {
                            return Err(OlivaError::SchemaMismatch(format!(
                                "value {v} not among training levels"
                            )));
                        }
                        for k in 0..cols {
                            block_vals[(i, at + k)] = if v == levels[k + 1] { 1.0 } else { 0.0 };
                        }
                    }
                }
                BlockEval::Linear => {
                    block_vals.view_mut((0, at), (m, 1)).copy_from(&xcol);
                }
            }
            at += cols;
        }
        if let Some(mtx) = &self.standardizer {
            block_vals *= mtx;
        }
        let mut out = DMatrix::zeros(m, self.control_cols + self.block_cols());
        out.view_mut((0, 0), (m, self.control_cols))
            .copy_from(controls_new);
        out.view_mut((0, self.control_cols), (m, self.block_cols()))
            .copy_from(&block_vals);
        Ok((out, extrapolated))
    }
}

/// Default spline degree for sieve blocks.
pub const DEFAULT_SPLINE_DEGREE: usize = 3;

/// Univariate sieve block with `cols` columns for one raw regressor.
///
/// Continuous data get a cubic B-spline (degree reduced when `cols` is very
/// small); when the variable takes too few distinct values to support that
/// many spline columns, a saturated indicator block is used instead, which is
/// the natural sieve for discrete data.
pub fn sieve_block(x: &DVector<f64>, cols: usize, rule: KnotRule) -> Result<DesignMatrix> {
    if cols == 0 {
        return Err(OlivaError::DegenerateInput(
            "sieve block needs at least one column".into(),
        ));
    }
    let mut distinct: Vec<f64> = x.iter().copied().collect();
    distinct.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    distinct.dedup();
    if distinct.len() <= cols + 1 {
        build_indicator(x)
    } else {
        let degree = DEFAULT_SPLINE_DEGREE.min(cols);
        build_bspline_with(x, degree, cols - degree, rule)
    }
}

/// Assemble `[controls | block(raw_1) | ... | block(raw_m)]` with `cols`
/// sieve columns per raw variable (additive multivariate design).
pub fn sieve_design(
    controls: &DMatrix<f64>,
    raw: &DMatrix<f64>,
    cols: usize,
    rule: KnotRule,
) -> Result<DesignMatrix> {
    if raw.ncols() == 0 {
        return Err(OlivaError::DegenerateInput(
            "need at least one raw variable for a sieve design".into(),
        ));
    }
    let blocks: Vec<DesignMatrix> = (0..raw.ncols())
        .map(|j| sieve_block(&raw.column(j).into_owned(), cols, rule))
        .collect::<Result<_>>()?;
    assemble(controls, &concat_blocks(&blocks)?)
}
