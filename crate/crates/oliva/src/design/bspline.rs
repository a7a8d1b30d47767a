//! Open-uniform B-spline bases.
//!
//! The regressor is affinely mapped onto `[0, 1]` before the knot vector is
//! built; the map is stored so the basis can be re-evaluated out of sample.
//! Interior knots are either equally spaced on the mapped range (the default,
//! which is what reproduces the reference simulation tables) or placed at
//! empirical quantiles (more stable under strongly skewed designs). Points
//! outside the training range are extrapolated linearly from the edge values
//! and slopes of the basis functions, which preserves the partition of
//! unity.

use nalgebra::{DMatrix, DVector};

use crate::error::{OlivaError, Result};

/// Interior knot placement rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KnotRule {
    /// Equally spaced interior knots on the mapped range.
    #[default]
    Uniform,
    /// Interior knots at empirical quantiles of the regressor.
    Quantile,
}

/// A full (partition-of-unity) B-spline basis on a mapped `[0, 1]` range.
#[derive(Debug, Clone)]
pub struct BSplineBasis {
    degree: usize,
    /// Clamped knot vector on `[0, 1]`: `degree + 1` copies of each boundary
    /// plus the interior knots.
    knots: Vec<f64>,
    /// Source range of the regressor; the affine map onto `[0, 1]`.
    range: (f64, f64),
}

impl BSplineBasis {
    /// Build a degree-`degree` basis with `interior_knots` interior knots at
    /// the empirical quantiles of `x`.
    pub fn from_quantiles(x: &DVector<f64>, degree: usize, interior_knots: usize) -> Result<Self> {
        Self::from_data(x, degree, interior_knots, KnotRule::Quantile)
    }

    /// Build a degree-`degree` basis with `interior_knots` interior knots
    /// placed by `rule`.
    pub fn from_data(
        x: &DVector<f64>,
        degree: usize,
        interior_knots: usize,
        rule: KnotRule,
    ) -> Result<Self> {
        if degree == 0 {
            return Err(OlivaError::DegenerateInput(
                "B-spline degree must be at least 1".into(),
            ));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(OlivaError::DegenerateInput(
                "regressor contains non-finite values".into(),
            ));
        }
        let n = x.len();
        let required = degree + interior_knots + 2;
        if n < required {
            return Err(OlivaError::InsufficientData {
                required,
                actual: n,
            });
        }
        let lo = x.min();
        let hi = x.max();
        if !(hi - lo).is_finite() || hi <= lo {
            return Err(OlivaError::DegenerateInput(
                "regressor is constant; cannot place spline knots".into(),
            ));
        }

        let mut mapped: Vec<f64> = x.iter().map(|&v| (v - lo) / (hi - lo)).collect();
        mapped.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));

        let mut knots = Vec::with_capacity(interior_knots + 2 * (degree + 1));
        knots.extend(std::iter::repeat_n(0.0, degree + 1));
        for i in 1..=interior_knots {
            let p = i as f64 / (interior_knots + 1) as f64;
            knots.push(match rule {
                KnotRule::Uniform => p,
                KnotRule::Quantile => quantile_sorted(&mapped, p),
            });
        }
        knots.extend(std::iter::repeat_n(1.0, degree + 1));

        Ok(Self {
            degree,
            knots,
            range: (lo, hi),
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Number of basis functions `interior_knots + degree + 1`.
    pub fn num_basis(&self) -> usize {
        self.knots.len() - self.degree - 1
    }

    pub fn range(&self) -> (f64, f64) {
        self.range
    }

    /// Evaluate every basis function at raw coordinate `x`.
    ///
    /// Returns the basis values and a flag that is true when `x` lies outside
    /// the training range (linear extrapolation was used).
    pub fn eval_full(&self, x: f64) -> (DVector<f64>, bool) {
        let (lo, hi) = self.range;
        let t = (x - lo) / (hi - lo);
        if t < 0.0 {
            let base = self.basis_at(0.0);
            let slope = self.deriv_at(0.0);
            (base + slope * t, true)
        } else if t > 1.0 {
            let base = self.basis_at(1.0);
            let slope = self.deriv_at(1.0);
            (base + slope * (t - 1.0), true)
        } else {
            (self.basis_at(t), false)
        }
    }

    /// Rows of basis values for a whole vector of raw coordinates.
    ///
    /// The second component counts extrapolated rows.
    pub fn eval_matrix(&self, x: &DVector<f64>) -> (DMatrix<f64>, usize) {
        let nb = self.num_basis();
        let mut out = DMatrix::zeros(x.len(), nb);
        let mut extrapolated = 0;
        for (i, &xi) in x.iter().enumerate() {
            let (row, ex) = self.eval_full(xi);
            if ex {
                extrapolated += 1;
            }
            out.row_mut(i).copy_from_slice(row.as_slice());
        }
        (out, extrapolated)
    }

    /// Cox–de Boor triangle at mapped coordinate `t` in `[0, 1]`.
    fn basis_at(&self, t: f64) -> DVector<f64> {
        let u = &self.knots;
        let nk = u.len();
        let mut n = vec![0.0; nk - 1];
        n[self.span_index(t)] = 1.0;
        for k in 1..=self.degree {
            for j in 0..nk - 1 - k {
                let left = safe_ratio(t - u[j], u[j + k] - u[j]) * n[j];
                let right = safe_ratio(u[j + k + 1] - t, u[j + k + 1] - u[j + 1]) * n[j + 1];
                n[j] = left + right;
            }
        }
        DVector::from_iterator(self.num_basis(), n.into_iter().take(self.num_basis()))
    }

    /// First derivatives of the basis functions at mapped coordinate `t`.
    fn deriv_at(&self, t: f64) -> DVector<f64> {
        let u = &self.knots;
        let nk = u.len();
        let d = self.degree;
        // Degree d-1 basis values, then the standard derivative formula.
        let mut n = vec![0.0; nk - 1];
        n[self.span_index(t)] = 1.0;
        for k in 1..d {
            for j in 0..nk - 1 - k {
                let left = safe_ratio(t - u[j], u[j + k] - u[j]) * n[j];
                let right = safe_ratio(u[j + k + 1] - t, u[j + k + 1] - u[j + 1]) * n[j + 1];
                n[j] = left + right;
            }
        }
        let nb = self.num_basis();
        let mut out = DVector::zeros(nb);
        for j in 0..nb {
            let a = safe_ratio(d as f64, u[j + d] - u[j]) * n[j];
            let b = safe_ratio(d as f64, u[j + d + 1] - u[j + 1]) * n[j + 1];
            out[j] = a - b;
        }
        out
    }

    /// Index of the knot span containing `t`, with `t = 1` assigned to the
    /// last span of positive width.
    fn span_index(&self, t: f64) -> usize {
        let u = &self.knots;
        let last = u.len() - 1;
        if t >= u[last] {
            // Walk back to the last positive-width span.
            let mut j = last - 1;
            while j > 0 && u[j] >= u[j + 1] {
                j -= 1;
            }
            return j;
        }
        let mut j = 0;
        while j + 1 < last && !(u[j] <= t && t < u[j + 1]) {
            j += 1;
        }
        j
    }
}

fn safe_ratio(num: f64, den: f64) -> f64 {
    if den.abs() < f64::EPSILON {
        0.0
    } else {
        num / den
    }
}

/// Type-7 (linear interpolation) empirical quantile of pre-sorted data.
fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let h = p * (n - 1) as f64;
    let idx = h.floor() as usize;
    if idx + 1 >= n {
        return sorted[n - 1];
    }
    let frac = h - idx as f64;
    sorted[idx] * (1.0 - frac) + sorted[idx + 1] * frac
}
