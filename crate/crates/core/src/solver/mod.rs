//! Greedy sparse-recovery solvers (ROMP, OMP, MP) and the least-squares and
//! standardization primitives they share.

mod lstsq;
mod pursuit;
mod select;
mod standardize;

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use lstsq::{least_squares_on_support, LeastSquaresFit};
pub use pursuit::{mp_solve, omp_solve, romp_solve, solve, solve_traced, IterationRecord, Pursuit};
pub use select::{regularize_select, Selection};
pub use standardize::{standardize_columns, StandardizationParams};

/// A finite, non-empty design matrix with identified columns.
///
/// Column means and centered column norms are cached at construction since
/// every solver call needs them.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub values: Array2<f64>,
    pub column_ids: Vec<String>,
    column_means: Vec<f64>,
    centered_norms: Vec<f64>,
}

impl DesignMatrix {
    pub fn new(values: Array2<f64>, column_ids: Vec<String>) -> Result<Self> {
        let (n, d) = values.dim();
        if n == 0 || d == 0 {
            return Err(Error::Validation(format!(
                "design matrix must be non-empty, got {n}x{d}"
            )));
        }
        if column_ids.len() != d {
            return Err(Error::DimensionMismatch(format!(
                "{} column ids for {d} columns",
                column_ids.len()
            )));
        }
        check_finite(values.view())?;
        let column_means: Vec<f64> = values
            .axis_iter(Axis(1))
            .map(|c| c.sum() / n as f64)
            .collect();
        let centered_norms = values
            .axis_iter(Axis(1))
            .zip(&column_means)
            .map(|(c, m)| c.iter().map(|v| (v - m).powi(2)).sum::<f64>().sqrt())
            .collect();
        Ok(DesignMatrix {
            values,
            column_ids,
            column_means,
            centered_norms,
        })
    }

    /// Columns identified by their position.
    pub fn from_array(values: Array2<f64>) -> Result<Self> {
        let ids = (0..values.ncols()).map(|j| j.to_string()).collect();
        Self::new(values, ids)
    }

    pub fn n_samples(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.values.ncols()
    }

    pub fn column_means(&self) -> &[f64] {
        &self.column_means
    }

    pub(crate) fn column_norm(&self, j: usize, centered: bool) -> f64 {
        if centered {
            self.centered_norms[j]
        } else {
            self.values.column(j).dot(&self.values.column(j)).sqrt()
        }
    }
}

/// Knobs shared by every pursuit variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    /// Candidates kept per identification step (ROMP's `s`).
    pub sparsity: usize,
    pub comparability_ratio: f64,
    /// Absolute residual norm at which pursuit stops.
    pub residual_tol: f64,
    pub max_support: usize,
    /// Fit an intercept by centering responses and columns.
    pub fit_intercept: bool,
    /// Hard cap on iterations; only binding for MP, which can revisit columns.
    pub max_iterations: usize,
}

impl SolverConfig {
    pub fn new(sparsity: usize) -> Self {
        SolverConfig {
            sparsity,
            comparability_ratio: 2.0,
            residual_tol: 0.0,
            max_support: 2 * sparsity,
            fit_intercept: true,
            max_iterations: 16 * sparsity.max(1),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sparsity == 0 {
            return Err(Error::Validation("sparsity must be positive".into()));
        }
        if !(self.comparability_ratio.is_finite() && self.comparability_ratio >= 1.0) {
            return Err(Error::Validation(format!(
                "comparability_ratio must be >= 1, got {}",
                self.comparability_ratio
            )));
        }
        if !(self.residual_tol.is_finite() && self.residual_tol >= 0.0) {
            return Err(Error::Validation(format!(
                "residual_tol must be finite and nonnegative, got {}",
                self.residual_tol
            )));
        }
        if self.max_support < self.sparsity {
            return Err(Error::Validation(format!(
                "max_support ({}) must be at least sparsity ({})",
                self.max_support, self.sparsity
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::Validation("max_iterations must be positive".into()));
        }
        Ok(())
    }
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig::new(16)
    }
}

/// Why a pursuit loop ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxSupport,
    ResidualTolerance,
    ZeroCorrelation,
    NoProgress,
    IterationLimit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseSolution {
    /// Sorted, unique column indices.
    pub support: Vec<usize>,
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub residual_norm: f64,
    pub iterations: usize,
    pub stop: StopReason,
    #[serde(default)]
    pub rank_deficient: bool,
}

impl SparseSolution {
    /// The intercept-only model.
    pub fn empty(intercept: f64, residual_norm: f64, stop: StopReason) -> Self {
        SparseSolution {
            support: Vec::new(),
            coefficients: Vec::new(),
            intercept,
            residual_norm,
            iterations: 0,
            stop,
            rank_deficient: false,
        }
    }

    pub fn predict_row(&self, row: ndarray::ArrayView1<f64>) -> f64 {
        self.intercept
            + self
                .support
                .iter()
                .zip(&self.coefficients)
                .map(|(&j, c)| c * row[j])
                .sum::<f64>()
    }

    /// Dense coefficient vector of length `dim`.
    pub fn dense(&self, dim: usize) -> Vec<f64> {
        let mut out = vec![0.0; dim];
        for (&j, &c) in self.support.iter().zip(&self.coefficients) {
            out[j] = c;
        }
        out
    }
}

pub(crate) fn check_finite(x: ArrayView2<f64>) -> Result<()> {
    for ((row, col), v) in x.indexed_iter() {
        if !v.is_finite() {
            return Err(Error::NonFinite { row, col });
        }
    }
    Ok(())
}
