//! CSV ingestion with column-role mapping.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use oliva::{Dataset, OlivaError, Result};

pub struct ColumnRoles {
    pub outcome: String,
    pub endogenous: Vec<String>,
    pub controls: Vec<String>,
    pub instruments: Vec<String>,
}

impl ColumnRoles {
    fn validate(&self) -> Result<()> {
        if self.endogenous.is_empty() {
            return Err(OlivaError::RoleError(
                "at least one endogenous column is required".into(),
            ));
        }
        if self.instruments.is_empty() {
            return Err(OlivaError::RoleError(
                "at least one instrument column is required".into(),
            ));
        }
        let mut seen = vec![self.outcome.clone()];
        for name in self
            .endogenous
            .iter()
            .chain(self.controls.iter())
            .chain(self.instruments.iter())
        {
            if seen.contains(name) {
                return Err(OlivaError::RoleError(format!(
                    "column '{name}' is assigned to more than one role"
                )));
            }
            seen.push(name.clone());
        }
        Ok(())
    }
}

/// Read a headered CSV and split it into a [`Dataset`]; an intercept column
/// is prepended to the controls.
pub fn read_dataset(path: &Path, roles: &ColumnRoles) -> Result<Dataset> {
    roles.validate()?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| OlivaError::ParseError {
            line: 0,
            column: path.display().to_string(),
            message: e.to_string(),
        })?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| OlivaError::ParseError {
            line: 1,
            column: "header".into(),
            message: e.to_string(),
        })?
        .iter()
        .map(|s| s.to_string())
        .collect();

    let index_of = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| OlivaError::RoleError(format!("column '{name}' not found in header")))
    };
    let outcome_idx = index_of(&roles.outcome)?;
    let endo_idx: Vec<usize> = roles
        .endogenous
        .iter()
        .map(|n| index_of(n))
        .collect::<Result<_>>()?;
    let ctrl_idx: Vec<usize> = roles
        .controls
        .iter()
        .map(|n| index_of(n))
        .collect::<Result<_>>()?;
    let inst_idx: Vec<usize> = roles
        .instruments
        .iter()
        .map(|n| index_of(n))
        .collect::<Result<_>>()?;

    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (recno, record) in reader.records().enumerate() {
        let record = record.map_err(|e| OlivaError::ParseError {
            line: recno + 2,
            column: "row".into(),
            message: e.to_string(),
        })?;
        let mut row = Vec::with_capacity(record.len());
        for (col, field) in record.iter().enumerate() {
            let value: f64 = field.parse().map_err(|_| OlivaError::ParseError {
                line: recno + 2,
                column: headers
                    .get(col)
                    .cloned()
                    .unwrap_or_else(|| format!("{col}")),
                message: format!("cannot parse '{field}' as a number"),
            })?;
            row.push(value);
        }
        if row.len() != headers.len() {
            return Err(OlivaError::ParseError {
                line: recno + 2,
                column: "row".into(),
                message: format!("expected {} fields, got {}", headers.len(), row.len()),
            });
        }
        rows.push(row);
    }
    let n = rows.len();
    if n == 0 {
        return Err(OlivaError::InsufficientData {
            required: 1,
            actual: 0,
        });
    }

    let y = DVector::from_fn(n, |i, _| rows[i][outcome_idx]);
    let mut controls = DMatrix::zeros(n, 1 + ctrl_idx.len());
    for i in 0..n {
        controls[(i, 0)] = 1.0;
        for (j, &c) in ctrl_idx.iter().enumerate() {
            controls[(i, j + 1)] = rows[i][c];
        }
    }
    let endogenous = DMatrix::from_fn(n, endo_idx.len(), |i, j| rows[i][endo_idx[j]]);
    let instruments = DMatrix::from_fn(n, inst_idx.len(), |i, j| rows[i][inst_idx[j]]);
    Dataset::new(y, controls, endogenous, instruments)
}

/// Coefficient labels in regressor order: intercept, controls, endogenous.
pub fn coefficient_names(roles: &ColumnRoles) -> Vec<String> {
    let mut names = vec!["intercept".to_string()];
    names.extend(roles.controls.iter().cloned());
    names.extend(roles.endogenous.iter().cloned());
    names
}
