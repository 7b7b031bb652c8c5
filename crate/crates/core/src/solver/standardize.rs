use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Column centering and scaling recorded at fit time.
///
/// Standard deviations use the population (1/n) convention. Columns whose
/// spread is at rounding level are treated as constant and get std 1, so
/// they standardize to exact zeros.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizationParams {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl StandardizationParams {
    /// Parameters that leave every column unchanged.
    pub fn identity(dim: usize) -> Self {
        StandardizationParams {
            means: vec![0.0; dim],
            stds: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.means.len()
    }

    pub fn apply(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_dim(x.ncols())?;
        let mut out = x.to_owned();
        for (j, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
            let (m, s) = (self.means[j], self.stds[j]);
            col.mapv_inplace(|v| (v - m) / s);
        }
        Ok(out)
    }

    pub fn apply_row(&self, row: ArrayView1<f64>) -> Result<Array1<f64>> {
        self.check_dim(row.len())?;
        Ok(Array1::from_iter(
            row.iter()
                .zip(self.means.iter().zip(&self.stds))
                .map(|(&v, (&m, &s))| (v - m) / s),
        ))
    }

    pub fn invert(&self, z: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_dim(z.ncols())?;
        let mut out = z.to_owned();
        for (j, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
            let (m, s) = (self.means[j], self.stds[j]);
            col.mapv_inplace(|v| v * s + m);
        }
        Ok(out)
    }

    fn check_dim(&self, d: usize) -> Result<()> {
        if d != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "standardization fitted on {} columns, got {d}",
                self.dim()
            )));
        }
        Ok(())
    }
}

/// Center every column and scale it to unit population standard deviation.
pub fn standardize_columns(x: ArrayView2<f64>) -> Result<(Array2<f64>, StandardizationParams)> {
    let (n, d) = x.dim();
    if n == 0 || d == 0 {
        return Err(Error::Validation(format!(
            "design matrix must be non-empty, got {n}x{d}"
        )));
    }
    crate::solver::check_finite(x)?;

    let mut means = Vec::with_capacity(d);
    let mut stds = Vec::with_capacity(d);
    for col in x.axis_iter(Axis(1)) {
        let mean = col.sum() / n as f64;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        let scale = col.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let std = var.sqrt();
        means.push(mean);
        stds.push(if std <= 64.0 * f64::EPSILON * scale || std == 0.0 {
            1.0
        } else {
            std
        });
    }
    let params = StandardizationParams { means, stds };
    let z = params.apply(x)?;
    Ok((z, params))
}
