use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, ArrayView1};

use super::DesignMatrix;
use crate::error::{Error, Result};

/// Least-squares refit restricted to a column subset.
#[derive(Debug, Clone, PartialEq)]
pub struct LeastSquaresFit {
    /// Coefficients aligned with the support passed in.
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub residual: Array1<f64>,
    pub rank: usize,
    /// The selected submatrix was rank deficient; the minimum-norm solution
    /// was returned.
    pub rank_deficient: bool,
}

impl LeastSquaresFit {
    pub fn residual_norm(&self) -> f64 {
        self.residual.dot(&self.residual).sqrt()
    }
}

/// Minimize `||y - intercept - X_S b||` over `b` (and the intercept when
/// `fit_intercept` is set, handled by centering y and the selected columns).
pub fn least_squares_on_support(
    x: &DesignMatrix,
    y: ArrayView1<f64>,
    support: &[usize],
    fit_intercept: bool,
) -> Result<LeastSquaresFit> {
    let (n, d) = x.values.dim();
    if y.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "response has {} entries, design has {n} rows",
            y.len()
        )));
    }
    let mut seen = vec![false; d];
    for &j in support {
        if j >= d {
            return Err(Error::Validation(format!("support index {j} out of range 0..{d}")));
        }
        if std::mem::replace(&mut seen[j], true) {
            return Err(Error::Validation(format!("support index {j} repeated")));
        }
    }
    if support.len() > n {
        return Err(Error::Validation(format!(
            "support of size {} exceeds {n} samples",
            support.len()
        )));
    }

    let y_mean = if fit_intercept { y.sum() / n as f64 } else { 0.0 };
    let k = support.len();
    if k == 0 {
        return Ok(LeastSquaresFit {
            coefficients: Vec::new(),
            intercept: y_mean,
            residual: y.mapv(|v| v - y_mean),
            rank: 0,
            rank_deficient: false,
        });
    }

    let col_mean = |j: usize| if fit_intercept { x.column_means[j] } else { 0.0 };
    let a = DMatrix::from_fn(n, k, |i, c| {
        let j = support[c];
        x.values[(i, j)] - col_mean(j)
    });
    let b = DVector::from_iterator(n, y.iter().map(|v| v - y_mean));

    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let cutoff = (n.max(k) as f64) * f64::EPSILON * smax;
    let rank = svd.singular_values.iter().filter(|&&s| s > cutoff).count();
    let solve = |rhs: &DVector<f64>| -> Result<DVector<f64>> {
        if rank == 0 {
            return Ok(DVector::zeros(k));
        }
        svd.solve(rhs, cutoff).map_err(|e| Error::Internal(format!("svd solve: {e}")))
    };

    let mut beta = solve(&b)?;
    // one step of iterative refinement tightens the residual's orthogonality
    let r0 = &b - &a * &beta;
    beta += solve(&r0)?;
    let r = &b - &a * &beta;

    let intercept = y_mean
        - support
            .iter()
            .zip(beta.iter())
            .map(|(&j, bj)| bj * col_mean(j))
            .sum::<f64>();

    Ok(LeastSquaresFit {
        coefficients: beta.iter().copied().collect(),
        intercept,
        residual: Array1::from_iter(r.iter().copied()),
        rank,
        rank_deficient: rank < k,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};

    #[test]
    fn identity_design_interpolates_selected_coordinates() {
        let x = DesignMatrix::from_array(Array2::eye(4)).unwrap();
        let y = array![0.0, 3.0, 0.0, -2.0];
        let fit = least_squares_on_support(&x, y.view(), &[1, 3], true).unwrap();
        assert!((fit.coefficients[0] - 3.0).abs() < 1e-12);
        assert!((fit.coefficients[1] + 2.0).abs() < 1e-12);
        assert!(fit.intercept.abs() < 1e-12);
        assert!(fit.residual_norm() < 1e-12);
    }

    #[test]
    fn empty_support_is_the_mean_model() {
        let x = DesignMatrix::from_array(array![[1.0], [0.0], [5.0]]).unwrap();
        let y = array![2.0, 4.0, 6.0];
        let fit = least_squares_on_support(&x, y.view(), &[], true).unwrap();
        assert_eq!(fit.intercept, 4.0);
        assert!(fit.coefficients.is_empty());
        assert_eq!(fit.residual, array![-2.0, 0.0, 2.0]);
    }

    #[test]
    fn duplicate_columns_flag_rank_deficiency() {
        let x = DesignMatrix::from_array(array![[1.0, 1.0], [2.0, 2.0], [4.0, 4.0], [3.0, 3.0]]).unwrap();
        let y = array![1.0, 2.0, 4.0, 3.0];
        let fit = least_squares_on_support(&x, y.view(), &[0, 1], true).unwrap();
        assert!(fit.rank_deficient);
        assert_eq!(fit.rank, 1);
        // minimum norm splits the weight evenly
        assert!((fit.coefficients[0] - 0.5).abs() < 1e-10);
        assert!((fit.coefficients[1] - 0.5).abs() < 1e-10);
        assert!(fit.residual_norm() < 1e-10);
    }

    #[test]
    fn invalid_support_is_rejected() {
        let x = DesignMatrix::from_array(Array2::eye(3)).unwrap();
        let y = array![1.0, 2.0, 3.0];
        assert!(least_squares_on_support(&x, y.view(), &[3], true).is_err());
        assert!(least_squares_on_support(&x, y.view(), &[1, 1], true).is_err());
    }
}
