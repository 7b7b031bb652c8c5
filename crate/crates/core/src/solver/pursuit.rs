use ndarray::{Array1, ArrayView1};
use serde::{Deserialize, Serialize};

use super::{least_squares_on_support, regularize_select, DesignMatrix, SolverConfig, SparseSolution, StopReason};
use crate::error::{Error, Result};

/// Correlations below `ZERO_REL * ||x_j|| * ||y||` count as zero.
const ZERO_REL: f64 = 1e-11;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pursuit {
    #[default]
    Romp,
    Omp,
    Mp,
}

/// Snapshot taken after each iteration of a pursuit loop.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    /// Columns chosen in this iteration (MP may repeat earlier ones).
    pub added: Vec<usize>,
    pub support: Vec<usize>,
    pub residual: Array1<f64>,
    pub residual_norm: f64,
}

pub fn romp_solve(x: &DesignMatrix, y: ArrayView1<f64>, cfg: &SolverConfig) -> Result<SparseSolution> {
    solve(Pursuit::Romp, x, y, cfg)
}

pub fn omp_solve(x: &DesignMatrix, y: ArrayView1<f64>, cfg: &SolverConfig) -> Result<SparseSolution> {
    solve(Pursuit::Omp, x, y, cfg)
}

pub fn mp_solve(x: &DesignMatrix, y: ArrayView1<f64>, cfg: &SolverConfig) -> Result<SparseSolution> {
    solve(Pursuit::Mp, x, y, cfg)
}

pub fn solve(kind: Pursuit, x: &DesignMatrix, y: ArrayView1<f64>, cfg: &SolverConfig) -> Result<SparseSolution> {
    run(kind, x, y, cfg, None)
}

/// Like [`solve`], also returning the state after every iteration.
pub fn solve_traced(
    kind: Pursuit,
    x: &DesignMatrix,
    y: ArrayView1<f64>,
    cfg: &SolverConfig,
) -> Result<(SparseSolution, Vec<IterationRecord>)> {
    let mut trace = Vec::new();
    let sol = run(kind, x, y, cfg, Some(&mut trace))?;
    Ok((sol, trace))
}

struct Ctx<'a> {
    x: &'a DesignMatrix,
    fit_intercept: bool,
    zero_scale: f64,
}

impl Ctx<'_> {
    /// `X_c^T r` for the (optionally centered) design.
    fn correlations(&self, r: &Array1<f64>) -> Array1<f64> {
        let mut u = self.x.values.t().dot(r);
        if self.fit_intercept {
            let rsum = r.sum();
            for (uj, m) in u.iter_mut().zip(self.x.column_means()) {
                *uj -= m * rsum;
            }
        }
        u
    }

    fn is_zero(&self, j: usize, uj: f64) -> bool {
        uj.abs() <= self.zero_scale * self.x.column_norm(j, self.fit_intercept)
    }
}

fn run(
    kind: Pursuit,
    x: &DesignMatrix,
    y: ArrayView1<f64>,
    cfg: &SolverConfig,
    mut trace: Option<&mut Vec<IterationRecord>>,
) -> Result<SparseSolution> {
    cfg.validate()?;
    let (n, d) = x.values.dim();
    if y.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "response has {} entries, design has {n} rows",
            y.len()
        )));
    }
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { row: i, col: 0 });
    }
    if n <= cfg.sparsity {
        return Err(Error::Validation(format!(
            "need more samples ({n}) than sparsity ({})",
            cfg.sparsity
        )));
    }
    let max_support = cfg.max_support.min(d).min(n);

    let base = least_squares_on_support(x, y, &[], cfg.fit_intercept)?;
    let ctx = Ctx {
        x,
        fit_intercept: cfg.fit_intercept,
        zero_scale: ZERO_REL * base.residual_norm(),
    };

    let mut state = State {
        support: Vec::new(),
        coefficients: Vec::new(),
        intercept: base.intercept,
        residual: base.residual,
        rank_deficient: false,
        iterations: 0,
    };

    let stop = match kind {
        Pursuit::Romp | Pursuit::Omp => {
            projection_loop(kind, &ctx, y, cfg, max_support, &mut state, &mut trace)?
        }
        Pursuit::Mp => mp_loop(&ctx, y, cfg, max_support, &mut state, &mut trace),
    };

    // recompute the residual from the final coefficients
    let mut residual_sq = 0.0;
    for (i, row) in x.values.outer_iter().enumerate() {
        let pred = state.intercept
            + state
                .support
                .iter()
                .zip(&state.coefficients)
                .map(|(&j, c)| c * row[j])
                .sum::<f64>();
        residual_sq += (y[i] - pred).powi(2);
    }

    Ok(SparseSolution {
        support: state.support,
        coefficients: state.coefficients,
        intercept: state.intercept,
        residual_norm: residual_sq.sqrt(),
        iterations: state.iterations,
        stop,
        rank_deficient: state.rank_deficient,
    })
}

struct State {
    support: Vec<usize>,
    coefficients: Vec<f64>,
    intercept: f64,
    residual: Array1<f64>,
    rank_deficient: bool,
    iterations: usize,
}

impl State {
    fn residual_norm(&self) -> f64 {
        self.residual.dot(&self.residual).sqrt()
    }

    fn record(&self, added: Vec<usize>, trace: &mut Option<&mut Vec<IterationRecord>>) {
        if let Some(t) = trace.as_deref_mut() {
            t.push(IterationRecord {
                added,
                support: self.support.clone(),
                residual: self.residual.clone(),
                residual_norm: self.residual_norm(),
            });
        }
    }
}

fn projection_loop(
    kind: Pursuit,
    ctx: &Ctx,
    y: ArrayView1<f64>,
    cfg: &SolverConfig,
    max_support: usize,
    state: &mut State,
    trace: &mut Option<&mut Vec<IterationRecord>>,
) -> Result<StopReason> {
    loop {
        if state.support.len() >= max_support {
            return Ok(StopReason::MaxSupport);
        }
        if state.residual_norm() <= cfg.residual_tol {
            return Ok(StopReason::ResidualTolerance);
        }
        if state.iterations >= cfg.max_iterations {
            return Ok(StopReason::IterationLimit);
        }

        let u = ctx.correlations(&state.residual);
        let mut cands: Vec<(usize, f64)> = u
            .iter()
            .enumerate()
            .filter(|&(j, &uj)| !ctx.is_zero(j, uj))
            .map(|(j, uj)| (j, uj.abs()))
            .collect();
        if cands.is_empty() {
            return Ok(StopReason::ZeroCorrelation);
        }
        cands.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));

        let mut added: Vec<(usize, f64)> = match kind {
            Pursuit::Omp => vec![cands[0]],
            _ => {
                cands.truncate(cfg.sparsity);
                let sel = regularize_select(&cands, cfg.comparability_ratio)?;
                cands
                    .into_iter()
                    .filter(|(j, _)| sel.indices.binary_search(j).is_ok())
                    .collect()
            }
        };
        added.retain(|(j, _)| state.support.binary_search(j).is_err());
        if added.is_empty() {
            return Ok(StopReason::NoProgress);
        }
        // `added` is still in magnitude order; keep the strongest that fit
        added.truncate(max_support - state.support.len());

        let added: Vec<usize> = added.into_iter().map(|(j, _)| j).collect();
        let mut support = state.support.clone();
        support.extend(&added);
        support.sort_unstable();

        let fit = least_squares_on_support(ctx.x, y, &support, cfg.fit_intercept)?;
        state.support = support;
        state.coefficients = fit.coefficients;
        state.intercept = fit.intercept;
        state.residual = fit.residual;
        state.rank_deficient |= fit.rank_deficient;
        state.iterations += 1;
        state.record(added, trace);
    }
}

fn mp_loop(
    ctx: &Ctx,
    y: ArrayView1<f64>,
    cfg: &SolverConfig,
    max_support: usize,
    state: &mut State,
    trace: &mut Option<&mut Vec<IterationRecord>>,
) -> StopReason {
    let x = ctx.x;
    let d = x.n_features();
    let mut dense = vec![0.0; d];
    let mut selected = vec![false; d];
    let means = x.column_means();

    let stop = loop {
        if state.residual_norm() <= cfg.residual_tol {
            break StopReason::ResidualTolerance;
        }
        if state.iterations >= cfg.max_iterations {
            break StopReason::IterationLimit;
        }
        let u = ctx.correlations(&state.residual);
        let best = u
            .iter()
            .enumerate()
            .filter(|&(j, &uj)| !ctx.is_zero(j, uj))
            .map(|(j, uj)| (j, uj.abs() / x.column_norm(j, ctx.fit_intercept)))
            .fold(None, |acc: Option<(usize, f64)>, c| match acc {
                Some(a) if a.1 >= c.1 => Some(a),
                _ => Some(c),
            });
        let Some((j, _)) = best else {
            break StopReason::ZeroCorrelation;
        };
        if !selected[j] && state.support.len() >= max_support {
            break StopReason::MaxSupport;
        }

        let norm = x.column_norm(j, ctx.fit_intercept);
        let step = u[j] / (norm * norm);
        dense[j] += step;
        let m = if ctx.fit_intercept { means[j] } else { 0.0 };
        for (ri, xij) in state.residual.iter_mut().zip(x.values.column(j)) {
            *ri -= step * (xij - m);
        }
        if !selected[j] {
            selected[j] = true;
            let pos = state.support.binary_search(&j).unwrap_err();
            state.support.insert(pos, j);
        }
        state.iterations += 1;
        state.record(vec![j], trace);
    };

    state.coefficients = state.support.iter().map(|&j| dense[j]).collect();
    let y_mean = if ctx.fit_intercept {
        y.sum() / y.len() as f64
    } else {
        0.0
    };
    state.intercept = if ctx.fit_intercept {
        y_mean
            - state
                .support
                .iter()
                .map(|&j| dense[j] * means[j])
                .sum::<f64>()
    } else {
        0.0
    };
    stop
}
