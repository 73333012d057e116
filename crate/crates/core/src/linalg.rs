//! Small dense symmetric-matrix helpers shared by the covariance and
//! sensitivity code. Every inverse goes through a symmetric
//! eigendecomposition so that the condition number comes along with it.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative asymmetry accepted (and removed) when symmetrizing inputs.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Condition-number ceiling beyond which a matrix is treated as singular.
pub const CONDITION_CEILING: f64 = 1e12;

/// Relative singular-value cutoff for the column-rank check on `G`.
pub const RANK_TOL: f64 = 1e-10;

/// Largest absolute entry; zero for an empty matrix.
pub fn max_abs(a: &DMatrix<f64>) -> f64 {
    a.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// Relative asymmetry `max|A - A'| / max|A|`.
pub fn asymmetry(a: &DMatrix<f64>) -> f64 {
    let scale = max_abs(a);
    if scale == 0.0 {
        return 0.0;
    }
    let mut worst = 0.0_f64;
    for i in 0..a.nrows() {
        for j in (i + 1)..a.ncols() {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    worst / scale
}

/// Returns `(A + A')/2`, rejecting inputs whose asymmetry exceeds [`SYMMETRY_TOL`].
pub fn symmetrized(a: &DMatrix<f64>, name: &'static str) -> Result<DMatrix<f64>> {
    if !a.is_square() {
        return Err(Error::Dimension(format!(
            "{name} must be square, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("{name} has non-finite entries")));
    }
    let asym = asymmetry(a);
    if asym > SYMMETRY_TOL {
        return Err(Error::Asymmetric {
            name,
            asymmetry: asym,
        });
    }
    Ok(symmetrize(a))
}

/// Unchecked `(A + A')/2`.
pub fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

/// Eigen-based inverse of a symmetric matrix together with its spectrum bounds.
#[derive(Debug, Clone)]
pub struct SymInverse {
    pub inverse: DMatrix<f64>,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    /// `max|λ| / min|λ|`; infinite when some eigenvalue is exactly zero.
    pub condition: f64,
}

impl SymInverse {
    pub fn is_positive_definite(&self) -> bool {
        self.min_eigenvalue > 0.0
    }

    /// Singular for our purposes: indefinite, or conditioned beyond the ceiling.
    pub fn is_singular(&self) -> bool {
        !self.is_positive_definite() || self.condition > CONDITION_CEILING
    }
}

/// Inverts a symmetric matrix through its eigendecomposition.
///
/// Eigenvalues that are exactly zero produce an infinite condition number and
/// a zero contribution to the inverse; callers are expected to check
/// [`SymInverse::is_singular`] before trusting the result.
pub fn sym_inverse(a: &DMatrix<f64>) -> SymInverse {
    let n = a.nrows();
    if n == 0 {
        return SymInverse {
            inverse: DMatrix::zeros(0, 0),
            min_eigenvalue: f64::INFINITY,
            max_eigenvalue: f64::NEG_INFINITY,
            condition: 1.0,
        };
    }
    let eig = SymmetricEigen::new(symmetrize(a));
    let values = &eig.eigenvalues;
    let min_eigenvalue = values.min();
    let max_eigenvalue = values.max();
    let max_abs = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let min_abs = values.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    let condition = if min_abs == 0.0 {
        f64::INFINITY
    } else {
        max_abs / min_abs
    };
    let inv_values = DVector::from_iterator(
        n,
        values.iter().map(|&v| if v == 0.0 { 0.0 } else { 1.0 / v }),
    );
    let v = &eig.eigenvectors;
    let inverse = symmetrize(&(v * DMatrix::from_diagonal(&inv_values) * v.transpose()));
    SymInverse {
        inverse,
        min_eigenvalue,
        max_eigenvalue,
        condition,
    }
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 {
        return f64::INFINITY;
    }
    SymmetricEigen::new(symmetrize(a)).eigenvalues.min()
}

/// Ratio of smallest to largest singular value of `g`.
pub fn singular_value_ratio(g: &DMatrix<f64>) -> f64 {
    let sv = g.clone().svd(false, false).singular_values;
    let max = sv.max();
    if max == 0.0 {
        return 0.0;
    }
    sv.min() / max
}

/// Removes row `k` (and column `k` when `square`) from a matrix.
pub fn drop_index(a: &DMatrix<f64>, k: usize, square: bool) -> DMatrix<f64> {
    let a = a.clone().remove_row(k);
    if square {
        a.remove_column(k)
    } else {
        a
    }
}

/// Largest elementwise relative difference, measured against the larger matrix scale.
pub fn relative_difference(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let scale = max_abs(a).max(max_abs(b));
    if scale == 0.0 {
        return 0.0;
    }
    max_abs(&(a - b)) / scale
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_of_diagonal() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 0.25]));
        let inv = sym_inverse(&a);
        assert!((inv.inverse[(0, 0)] - 0.25).abs() < 1e-15);
        assert!((inv.inverse[(1, 1)] - 4.0).abs() < 1e-14);
        assert!((inv.condition - 16.0).abs() < 1e-12);
        assert!(!inv.is_singular());
    }

    #[test]
    fn rejects_asymmetric() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]);
        assert!(matches!(
            symmetrized(&a, "W"),
            Err(Error::Asymmetric { .. })
        ));
        let b = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5 + 1e-13, 1.0]);
        let s = symmetrized(&b, "W").unwrap();
        assert_eq!(s[(0, 1)], s[(1, 0)]);
    }

    #[test]
    fn singular_matrix_flagged() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(sym_inverse(&a).is_singular());
    }
}
