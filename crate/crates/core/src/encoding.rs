//! Voxel-wise sparse linear encoding models.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, FormatError, Result};
use crate::features::{check_unique, FeatureMatrix, FeatureSource};
use crate::par::{self, Execution};
use crate::solver::{self, DesignMatrix, Pursuit, SolverConfig, SparseSolution, StandardizationParams, StopReason};

pub const MODEL_FORMAT: &str = "voxenc.models";
pub const MODEL_VERSION: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Roi {
    EV,
    LOC,
    OPA,
    PPA,
    RSC,
}

impl Roi {
    pub const ALL: [Roi; 5] = [Roi::EV, Roi::LOC, Roi::OPA, Roi::PPA, Roi::RSC];

    pub fn level(self) -> Level {
        match self {
            Roi::EV => Level::Low,
            _ => Level::High,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Roi::EV => "EV",
            Roi::LOC => "LOC",
            Roi::OPA => "OPA",
            Roi::PPA => "PPA",
            Roi::RSC => "RSC",
        }
    }
}

impl fmt::Display for Roi {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Roi {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Roi::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| s.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Hemisphere {
    L,
    R,
}

impl Hemisphere {
    pub fn as_str(self) -> &'static str {
        match self {
            Hemisphere::L => "L",
            Hemisphere::R => "R",
        }
    }
}

impl fmt::Display for Hemisphere {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Hemisphere {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "L" => Ok(Hemisphere::L),
            "R" => Ok(Hemisphere::R),
            _ => Err(s.to_string()),
        }
    }
}

/// Low = early visual cortex; high = LOC, OPA, PPA and RSC together.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Level {
    Low,
    High,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoxelInfo {
    pub voxel_id: String,
    pub subject: String,
    pub roi: Roi,
    pub hemisphere: Hemisphere,
}

/// Responses of `V` voxels to `n` images.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelResponseMatrix {
    pub values: Array2<f64>,
    pub image_ids: Vec<String>,
    pub voxels: Vec<VoxelInfo>,
}

impl VoxelResponseMatrix {
    pub fn new(values: Array2<f64>, image_ids: Vec<String>, voxels: Vec<VoxelInfo>) -> Result<Self> {
        if values.nrows() != image_ids.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} image ids for {} response rows",
                image_ids.len(),
                values.nrows()
            )));
        }
        if values.ncols() != voxels.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} voxel records for {} response columns",
                voxels.len(),
                values.ncols()
            )));
        }
        check_unique(&image_ids)?;
        let vids: Vec<String> = voxels.iter().map(|v| v.voxel_id.clone()).collect();
        check_unique(&vids).map_err(|e| match e {
            Error::DuplicateIds(d) => Error::Validation(format!("duplicate voxel ids: {}", d.join(", "))),
            other => other,
        })?;
        crate::solver::check_finite(values.view())?;
        Ok(VoxelResponseMatrix {
            values,
            image_ids,
            voxels,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_voxels(&self) -> usize {
        self.values.ncols()
    }

    pub fn select_rows(&self, rows: &[usize]) -> VoxelResponseMatrix {
        VoxelResponseMatrix {
            values: self.values.select(Axis(0), rows),
            image_ids: rows.iter().map(|&i| self.image_ids[i].clone()).collect(),
            voxels: self.voxels.clone(),
        }
    }

    pub fn select_voxels(&self, cols: &[usize]) -> VoxelResponseMatrix {
        VoxelResponseMatrix {
            values: self.values.select(Axis(1), cols),
            image_ids: self.image_ids.clone(),
            voxels: cols.iter().map(|&j| self.voxels[j].clone()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodingConfig {
    pub solver: SolverConfig,
    pub pursuit: Pursuit,
    /// Standardize feature columns on the training set before fitting.
    pub standardize_features: bool,
    /// Subtract each voxel's training mean before fitting.
    pub center_responses: bool,
    #[serde(skip)]
    pub execution: Execution,
}

impl Default for EncodingConfig {
    fn default() -> Self {
        EncodingConfig {
            solver: SolverConfig::default(),
            pursuit: Pursuit::Romp,
            standardize_features: true,
            center_responses: false,
            execution: Execution::Auto,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoxelEncodingModel {
    pub voxel_id: String,
    #[serde(flatten)]
    pub solution: SparseSolution,
    /// Solver error for this voxel; the solution is then the mean model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

/// One fitted model per voxel plus the feature standardization they share.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodingModelSet {
    pub feature_source: FeatureSource,
    pub feature_dim: usize,
    pub pursuit: Pursuit,
    pub solver_config: SolverConfig,
    pub center_responses: bool,
    pub standardization: StandardizationParams,
    pub training_ids: Vec<String>,
    pub models: Vec<VoxelEncodingModel>,
}

/// A single voxel's model together with the standardization it was fit under.
#[derive(Debug, Clone, Copy)]
pub struct VoxelPredictor<'a> {
    pub model: &'a VoxelEncodingModel,
    pub standardization: &'a StandardizationParams,
}

impl VoxelPredictor<'_> {
    /// Predict from one raw (unstandardized) feature vector.
    pub fn predict_raw(&self, raw: impl IntoIterator<Item = f64>) -> Result<f64> {
        let raw: Vec<f64> = raw.into_iter().collect();
        let z = self.standardization.apply_row(Array1::from(raw).view())?;
        Ok(self.model.solution.predict_row(z.view()))
    }
}

impl EncodingModelSet {
    pub fn n_voxels(&self) -> usize {
        self.models.len()
    }

    pub fn voxel_ids(&self) -> Vec<String> {
        self.models.iter().map(|m| m.voxel_id.clone()).collect()
    }

    pub fn predictor(&self, voxel: usize) -> VoxelPredictor<'_> {
        VoxelPredictor {
            model: &self.models[voxel],
            standardization: &self.standardization,
        }
    }

    pub fn find(&self, voxel_id: &str) -> Option<VoxelPredictor<'_>> {
        self.models
            .iter()
            .position(|m| m.voxel_id == voxel_id)
            .map(|i| self.predictor(i))
    }

    pub fn failures(&self) -> usize {
        self.models.iter().filter(|m| m.failure.is_some()).count()
    }

    fn validate(&self) -> Result<()> {
        if self.standardization.dim() != self.feature_dim {
            return Err(Error::DimensionMismatch(format!(
                "standardization has {} columns, feature_dim is {}",
                self.standardization.dim(),
                self.feature_dim
            )));
        }
        let ids = self.voxel_ids();
        check_unique(&ids).map_err(|e| Error::Validation(format!("model set: {e}")))?;
        for m in &self.models {
            let s = &m.solution;
            if s.coefficients.len() != s.support.len() {
                return Err(Error::Validation(format!(
                    "voxel {}: {} coefficients for support of size {}",
                    m.voxel_id,
                    s.coefficients.len(),
                    s.support.len()
                )));
            }
            if !s.support.windows(2).all(|w| w[0] < w[1]) {
                return Err(Error::Validation(format!("voxel {}: support not sorted/unique", m.voxel_id)));
            }
            if let Some(&j) = s.support.iter().find(|&&j| j >= self.feature_dim) {
                return Err(Error::Validation(format!(
                    "voxel {}: support index {j} outside feature dimension {}",
                    m.voxel_id, self.feature_dim
                )));
            }
        }
        Ok(())
    }
}

/// Fit one sparse model per voxel on a shared standardized feature matrix.
///
/// Inputs must already be aligned (see [`crate::features::align`]). A voxel
/// whose solve fails gets the intercept-only model and a recorded failure;
/// training continues.
pub fn train_voxelwise(
    features: &FeatureMatrix,
    responses: &VoxelResponseMatrix,
    cfg: &EncodingConfig,
) -> Result<EncodingModelSet> {
    if features.image_ids != responses.image_ids {
        return Err(Error::Alignment(
            "features and responses are not aligned; run align() first".into(),
        ));
    }
    let n = features.n_samples();
    if n < 2 {
        return Err(Error::Validation(format!("need at least 2 training samples, got {n}")));
    }
    cfg.solver.validate()?;

    let (z, standardization) = if cfg.standardize_features {
        solver::standardize_columns(features.values.view())?
    } else {
        (features.values.clone(), StandardizationParams::identity(features.dim()))
    };
    let design = DesignMatrix::from_array(z)?;

    let models = par::map_indexed(cfg.execution, responses.n_voxels(), |v| {
        let mut y = responses.values.column(v).to_owned();
        if cfg.center_responses {
            let mean = y.mean().unwrap_or(0.0);
            y.mapv_inplace(|x| x - mean);
        }
        fit_voxel(&design, &y, &responses.voxels[v].voxel_id, cfg)
    });

    let set = EncodingModelSet {
        feature_source: features.source.clone(),
        feature_dim: features.dim(),
        pursuit: cfg.pursuit,
        solver_config: cfg.solver.clone(),
        center_responses: cfg.center_responses,
        standardization,
        training_ids: features.image_ids.clone(),
        models,
    };
    let failed = set.failures();
    if failed > 0 {
        log::warn!("{failed} of {} voxels fell back to the mean model", set.n_voxels());
    }
    Ok(set)
}

fn fit_voxel(design: &DesignMatrix, y: &Array1<f64>, voxel_id: &str, cfg: &EncodingConfig) -> VoxelEncodingModel {
    match solver::solve(cfg.pursuit, design, y.view(), &cfg.solver) {
        Ok(solution) => VoxelEncodingModel {
            voxel_id: voxel_id.to_string(),
            solution,
            failure: None,
        },
        Err(e) => {
            let mean = y.mean().unwrap_or(0.0);
            let rn = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>().sqrt();
            VoxelEncodingModel {
                voxel_id: voxel_id.to_string(),
                solution: SparseSolution::empty(mean, rn, StopReason::NoProgress),
                failure: Some(e.to_string()),
            }
        }
    }
}

/// Predicted responses, one column per model in the set.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub values: Array2<f64>,
    pub image_ids: Vec<String>,
    pub voxel_ids: Vec<String>,
}

/// Apply every voxel model to `features`, standardized with the stored
/// training parameters.
pub fn predict(set: &EncodingModelSet, features: &FeatureMatrix, exec: Execution) -> Result<Prediction> {
    if features.dim() != set.feature_dim {
        return Err(Error::DimensionMismatch(format!(
            "models expect {} features, got {}",
            set.feature_dim,
            features.dim()
        )));
    }
    let z = set.standardization.apply(features.values.view())?;
    let cols = par::map_indexed(exec, set.n_voxels(), |v| {
        let sol = &set.models[v].solution;
        z.outer_iter().map(|row| sol.predict_row(row)).collect::<Vec<f64>>()
    });
    let n = features.n_samples();
    let mut values = Array2::<f64>::zeros((n, set.n_voxels()));
    for (mut col, c) in values.axis_iter_mut(Axis(1)).zip(cols) {
        for (dst, src) in col.iter_mut().zip(c) {
            *dst = src;
        }
    }
    Ok(Prediction {
        values,
        image_ids: features.image_ids.clone(),
        voxel_ids: set.voxel_ids(),
    })
}

#[derive(Serialize)]
struct ModelFileOut<'a> {
    format: &'static str,
    version: u64,
    #[serde(flatten)]
    set: &'a EncodingModelSet,
}

#[derive(Deserialize)]
struct ModelFileHeader {
    format: Option<String>,
    version: Option<u64>,
}

#[derive(Deserialize)]
struct ModelFileIn {
    #[allow(dead_code)]
    format: String,
    #[allow(dead_code)]
    version: u64,
    #[serde(flatten)]
    set: EncodingModelSet,
}

pub fn models_to_json(set: &EncodingModelSet) -> Result<String> {
    serde_json::to_string(&ModelFileOut {
        format: MODEL_FORMAT,
        version: MODEL_VERSION,
        set,
    })
    .map_err(|e| Error::Internal(format!("serializing models: {e}")))
}

pub fn models_from_json(bytes: &[u8]) -> Result<EncodingModelSet> {
    let header: ModelFileHeader = serde_json::from_slice(bytes).map_err(|e| json_error(bytes, &e))?;
    match header.format.as_deref() {
        Some(MODEL_FORMAT) => {}
        other => {
            return Err(FormatError::Header {
                offset: 0,
                message: format!("expected format `{MODEL_FORMAT}`, found {other:?}"),
            }
            .into())
        }
    }
    match header.version {
        Some(MODEL_VERSION) => {}
        Some(v) => return Err(FormatError::UnsupportedVersion(v).into()),
        None => {
            return Err(FormatError::Header {
                offset: 0,
                message: "missing version".into(),
            }
            .into())
        }
    }
    let file: ModelFileIn = serde_json::from_slice(bytes).map_err(|e| json_error(bytes, &e))?;
    file.set.validate()?;
    Ok(file.set)
}

pub fn save_models(set: &EncodingModelSet, path: &Path) -> Result<()> {
    let json = models_to_json(set)?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(json.as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn load_models(path: &Path) -> Result<EncodingModelSet> {
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    models_from_json(&bytes)
}

/// Convert a serde_json line/column position into a byte offset.
pub(crate) fn json_error(bytes: &[u8], e: &serde_json::Error) -> Error {
    let line = e.line();
    let mut offset = 0usize;
    if line > 1 {
        let mut seen = 1;
        for (i, &b) in bytes.iter().enumerate() {
            if b == b'\n' {
                seen += 1;
                if seen == line {
                    offset = i + 1;
                    break;
                }
            }
        }
    }
    let offset = (offset + e.column().saturating_sub(1)).min(bytes.len());
    FormatError::Parse {
        offset: offset as u64,
        message: e.to_string(),
    }
    .into()
}
