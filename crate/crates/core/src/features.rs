//! Fixed-size image features: caption features pooled from decoder word
//! states, and CNN layer activations.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use crate::encoding::VoxelResponseMatrix;
use crate::error::{Error, Result};
use crate::par::{self, Execution};

pub const DEFAULT_STATE_DIM: usize = 512;
pub const START_TOKEN: &str = "<start>";
pub const END_TOKEN: &str = "<end>";

/// Decoder hidden states for one caption, one row per token.
#[derive(Debug, Clone, PartialEq)]
pub struct WordStateSequence {
    pub image_id: String,
    pub tokens: Vec<String>,
    pub states: Array2<f32>,
}

impl WordStateSequence {
    pub fn new(image_id: impl Into<String>, tokens: Vec<String>, states: Array2<f32>) -> Result<Self> {
        let image_id = image_id.into();
        if tokens.len() != states.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "image {image_id}: {} tokens but {} state rows",
                tokens.len(),
                states.nrows()
            )));
        }
        Ok(WordStateSequence {
            image_id,
            tokens,
            states,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Which rows of a sequence take part in pooling and attribution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoolOptions {
    pub state_dim: usize,
    /// Drop rows whose token is `<start>` (the image-initialized state).
    pub exclude_start: bool,
    /// Drop rows whose token is `<end>`.
    pub exclude_end: bool,
}

impl Default for PoolOptions {
    fn default() -> Self {
        PoolOptions {
            state_dim: DEFAULT_STATE_DIM,
            exclude_start: true,
            exclude_end: true,
        }
    }
}

impl PoolOptions {
    pub fn with_state_dim(state_dim: usize) -> Self {
        PoolOptions {
            state_dim,
            ..Default::default()
        }
    }

    /// Row positions of `seq` that carry a word.
    pub fn word_rows(&self, seq: &WordStateSequence) -> Result<Vec<usize>> {
        if seq.states.ncols() != self.state_dim {
            return Err(Error::DimensionMismatch(format!(
                "image {}: state dimension {} but {} configured",
                seq.image_id,
                seq.states.ncols(),
                self.state_dim
            )));
        }
        if seq.tokens.len() != seq.states.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "image {}: {} tokens but {} state rows",
                seq.image_id,
                seq.tokens.len(),
                seq.states.nrows()
            )));
        }
        let rows: Vec<usize> = seq
            .tokens
            .iter()
            .enumerate()
            .filter(|(_, t)| {
                !(self.exclude_start && t.as_str() == START_TOKEN || self.exclude_end && t.as_str() == END_TOKEN)
            })
            .map(|(i, _)| i)
            .collect();
        if rows.is_empty() {
            return Err(Error::Validation(format!(
                "image {}: no word states to pool",
                seq.image_id
            )));
        }
        Ok(rows)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PooledFeature {
    pub image_id: String,
    pub vector: Array1<f32>,
}

/// Coordinate-wise maximum over a caption's word states.
pub fn pool_max(seq: &WordStateSequence, opts: &PoolOptions) -> Result<PooledFeature> {
    let rows = opts.word_rows(seq)?;
    let mut out = seq.states.row(rows[0]).to_owned();
    for &r in &rows[1..] {
        out.zip_mut_with(&seq.states.row(r), |a, &b| {
            if b > *a {
                *a = b;
            }
        });
    }
    if let Some(j) = out.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { row: rows[0], col: j });
    }
    Ok(PooledFeature {
        image_id: seq.image_id.clone(),
        vector: out,
    })
}

/// Where a feature matrix came from.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FeatureSource {
    Icf,
    Cnn(String),
}

impl FeatureSource {
    /// Layer name for CNN features, `ICF` otherwise.
    pub fn name(&self) -> &str {
        match self {
            FeatureSource::Icf => "ICF",
            FeatureSource::Cnn(name) => name,
        }
    }
}

impl fmt::Display for FeatureSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureSource::Icf => f.write_str("ICF"),
            FeatureSource::Cnn(name) => write!(f, "CNN:{name}"),
        }
    }
}

impl FromStr for FeatureSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("icf") {
            return Ok(FeatureSource::Icf);
        }
        match s.split_once(':') {
            Some((tag, name)) if tag.eq_ignore_ascii_case("cnn") && !name.is_empty() => {
                Ok(FeatureSource::Cnn(name.to_string()))
            }
            _ => Err(Error::Validation(format!(
                "feature source `{s}` is neither ICF nor CNN:<layer>"
            ))),
        }
    }
}

impl Serialize for FeatureSource {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for FeatureSource {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Image features, one row per image.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub values: Array2<f64>,
    pub image_ids: Vec<String>,
    pub source: FeatureSource,
}

impl FeatureMatrix {
    pub fn new(values: Array2<f64>, image_ids: Vec<String>, source: FeatureSource) -> Result<Self> {
        if image_ids.len() != values.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "{} image ids for {} rows",
                image_ids.len(),
                values.nrows()
            )));
        }
        check_unique(&image_ids)?;
        crate::solver::check_finite(values.view())?;
        Ok(FeatureMatrix {
            values,
            image_ids,
            source,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.values.nrows()
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.values.row(i)
    }

    /// Rows in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            values: self.values.select(Axis(0), rows),
            image_ids: rows.iter().map(|&i| self.image_ids[i].clone()).collect(),
            source: self.source.clone(),
        }
    }
}

pub(crate) fn check_unique(ids: &[String]) -> Result<()> {
    let mut seen = HashSet::with_capacity(ids.len());
    let mut dups: Vec<String> = ids
        .iter()
        .filter(|id| !seen.insert(id.as_str()))
        .cloned()
        .collect();
    if dups.is_empty() {
        return Ok(());
    }
    dups.sort();
    dups.dedup();
    Err(Error::DuplicateIds(dups))
}

/// Stack the pooled caption features of `seqs` into an ICF matrix.
pub fn build_feature_matrix(
    seqs: &[WordStateSequence],
    opts: &PoolOptions,
    exec: Execution,
) -> Result<FeatureMatrix> {
    if seqs.is_empty() {
        return Err(Error::Validation("no word-state sequences to pool".into()));
    }
    let ids: Vec<String> = seqs.iter().map(|s| s.image_id.clone()).collect();
    check_unique(&ids)?;

    let pooled = par::map_indexed(exec, seqs.len(), |i| pool_max(&seqs[i], opts));
    let mut values = Array2::<f64>::zeros((seqs.len(), opts.state_dim));
    for (mut row, p) in values.outer_iter_mut().zip(pooled) {
        let p = p?;
        row.zip_mut_with(&p.vector, |a, &b| *a = f64::from(b));
    }
    Ok(FeatureMatrix {
        values,
        image_ids: ids,
        source: FeatureSource::Icf,
    })
}

/// Ids dropped while aligning features with responses.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AlignReport {
    pub dropped_from_features: Vec<String>,
    pub dropped_from_responses: Vec<String>,
}

impl AlignReport {
    pub fn dropped(&self) -> usize {
        self.dropped_from_features.len() + self.dropped_from_responses.len()
    }
}

/// Restrict both matrices to their common image ids, in feature order.
pub fn align(
    features: &FeatureMatrix,
    responses: &VoxelResponseMatrix,
) -> Result<(FeatureMatrix, VoxelResponseMatrix, AlignReport)> {
    if features.n_samples() == 0 || responses.n_samples() == 0 {
        return Err(Error::Alignment("cannot align empty matrices".into()));
    }
    let resp_index: HashMap<&str, usize> = responses
        .image_ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();

    let mut feat_rows = Vec::new();
    let mut resp_rows = Vec::new();
    let mut report = AlignReport::default();
    for (i, id) in features.image_ids.iter().enumerate() {
        match resp_index.get(id.as_str()) {
            Some(&j) => {
                feat_rows.push(i);
                resp_rows.push(j);
            }
            None => report.dropped_from_features.push(id.clone()),
        }
    }
    if feat_rows.is_empty() {
        return Err(Error::Alignment(
            "features and responses share no image ids".into(),
        ));
    }
    let feat_ids: HashSet<&str> = features.image_ids.iter().map(String::as_str).collect();
    report.dropped_from_responses = responses
        .image_ids
        .iter()
        .filter(|id| !feat_ids.contains(id.as_str()))
        .cloned()
        .collect();
    if report.dropped() > 0 {
        log::warn!(
            "alignment dropped {} image ids ({} feature rows, {} response rows)",
            report.dropped(),
            report.dropped_from_features.len(),
            report.dropped_from_responses.len()
        );
    }
    Ok((
        features.select_rows(&feat_rows),
        responses.select_rows(&resp_rows),
        report,
    ))
}

/// Pick CNN feature matrices by layer name, in the requested order.
pub fn select_layer_sets<'a>(
    available: &'a [FeatureMatrix],
    names: &[String],
) -> Result<Vec<&'a FeatureMatrix>> {
    if names.is_empty() {
        return Err(Error::Validation("no layer names requested".into()));
    }
    names
        .iter()
        .map(|name| {
            available
                .iter()
                .find(|m| matches!(&m.source, FeatureSource::Cnn(l) if l == name))
                .ok_or_else(|| Error::UnknownLayer(name.clone()))
        })
        .collect()
}
