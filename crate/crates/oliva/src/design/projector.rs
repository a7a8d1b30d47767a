//! Orthogonal projection onto the column space of a design matrix.
//!
//! The projector is stored as a thin orthonormal factor from a column-pivoted
//! QR decomposition; the dense `n x n` matrix `A (A'A)^{-1} A'` is never
//! formed.

use nalgebra::{DMatrix, DVector};

use crate::error::{OlivaError, Result};

/// Relative tolerance for the rank decision on the pivoted `R` diagonal.
const RANK_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct Projector {
    basis: DMatrix<f64>,
}

impl Projector {
    /// Factor the column space of `a`, discarding numerically dependent
    /// columns at relative tolerance 1e-12.
    pub fn from_matrix(a: &DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if n == 0 || a.ncols() == 0 {
            return Err(OlivaError::DegenerateInput(
                "cannot project onto an empty matrix".into(),
            ));
        }
        let qr = a.clone().col_piv_qr();
        let r = qr.r();
        let lead = r[(0, 0)].abs();
        if lead <= 0.0 {
            return Err(OlivaError::DegenerateInput(
                "cannot project onto the zero matrix".into(),
            ));
        }
        let mut rank = 0;
        for i in 0..r.nrows().min(r.ncols()) {
            if r[(i, i)].abs() > RANK_TOLERANCE * lead {
                rank = i + 1;
            } else {
                break;
            }
        }
        let q = qr.q();
        Ok(Self {
            basis: q.columns(0, rank).into_owned(),
        })
    }

    pub fn n(&self) -> usize {
        self.basis.nrows()
    }

    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    /// Apply the projection to the columns of `v`.
    pub fn apply(&self, v: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if v.nrows() != self.n() {
            return Err(OlivaError::ShapeMismatch(format!(
                "projector expects {} rows, got {}",
                self.n(),
                v.nrows()
            )));
        }
        Ok(&self.basis * (self.basis.transpose() * v))
    }

    /// Apply the projection to a single vector.
    pub fn apply_vec(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        if v.nrows() != self.n() {
            return Err(OlivaError::ShapeMismatch(format!(
                "projector expects {} rows, got {}",
                self.n(),
                v.nrows()
            )));
        }
        Ok(&self.basis * (self.basis.transpose() * v))
    }

    /// The stored orthonormal factor (columns span the design's column space).
    pub(crate) fn orthonormal_basis(&self) -> &DMatrix<f64> {
        &self.basis
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn random_matrix(rng: &mut StdRng, n: usize, c: usize) -> DMatrix<f64> {
        DMatrix::from_fn(n, c, |_, _| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn full_rank_square_projects_to_identity() {
        let mut rng = StdRng::seed_from_u64(1);
        let a = random_matrix(&mut rng, 5, 5) + DMatrix::identity(5, 5) * 3.0;
        let p = Projector::from_matrix(&a).unwrap();
        let v = DVector::from_vec(vec![1.0, -2.0, 0.5, 4.0, 0.0]);
        let pv = p.apply_vec(&v).unwrap();
        for i in 0..5 {
            assert_abs_diff_eq!(pv[i], v[i], epsilon = 1e-10);
        }
    }

    #[test]
    fn ones_column_projects_to_mean() {
        let a = DMatrix::from_element(2, 1, 1.0);
        let p = Projector::from_matrix(&a).unwrap();
        let v = DVector::from_vec(vec![1.0, 3.0]);
        let pv = p.apply_vec(&v).unwrap();
        assert_abs_diff_eq!(pv[0], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(pv[1], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn matches_dense_projection_formula() {
        let mut rng = StdRng::seed_from_u64(7);
        let a = random_matrix(&mut rng, 30, 3);
        let v = random_matrix(&mut rng, 30, 2);
        let p = Projector::from_matrix(&a).unwrap();
        let dense = &a * (a.transpose() * &a).try_inverse().unwrap() * a.transpose();
        let expect = &dense * &v;
        let got = p.apply(&v).unwrap();
        assert!((expect - got).amax() < 1e-10);
    }

    #[test]
    fn rank_detects_duplicated_column() {
        let mut rng = StdRng::seed_from_u64(3);
        let mut a = random_matrix(&mut rng, 20, 3);
        let dup = a.column(0).into_owned();
        a.set_column(2, &dup);
        let p = Projector::from_matrix(&a).unwrap();
        assert_eq!(p.rank(), 2);
        // Still a projection: idempotent.
        let v = random_matrix(&mut rng, 20, 1);
        let pv = p.apply(&v).unwrap();
        let ppv = p.apply(&pv).unwrap();
        assert!((pv - ppv).amax() < 1e-10);
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let a = DMatrix::from_element(4, 1, 1.0);
        let p = Projector::from_matrix(&a).unwrap();
        let v = DVector::from_vec(vec![1.0, 2.0]);
        assert!(matches!(
            p.apply_vec(&v),
            Err(OlivaError::ShapeMismatch(_))
        ));
    }
}
