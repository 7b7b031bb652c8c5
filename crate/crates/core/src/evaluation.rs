//! Pearson-correlation evaluation, significance thresholds, layer profiles
//! and two-model comparisons.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::encoding::{predict, EncodingModelSet, Hemisphere, Level, Prediction, Roi, VoxelInfo, VoxelResponseMatrix};
use crate::error::{Error, Result};
use crate::features::{FeatureMatrix, FeatureSource};
use crate::par::{self, Execution};

/// Significance threshold on PC used by default.
pub const DEFAULT_THRESHOLD: f64 = 0.27;
pub const DEFAULT_HISTOGRAM_BINS: usize = 40;

/// Product-moment correlation. Returns NaN when either input is constant.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "pearson inputs have lengths {} and {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 3 {
        return Err(Error::Validation(format!(
            "pearson needs at least 3 observations, got {}",
            x.len()
        )));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Validation("pearson inputs must be finite".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(f64::NAN);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tails {
    One,
    #[default]
    Two,
}

impl FromStr for Tails {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "one" | "1" => Ok(Tails::One),
            "two" | "2" => Ok(Tails::Two),
            _ => Err(Error::Validation(format!("tails must be `one` or `two`, got `{s}`"))),
        }
    }
}

/// Smallest correlation significant at level `p` for `n_test` samples, from
/// `t = r sqrt(n-2) / sqrt(1-r^2)` against Student's t with `n-2` degrees
/// of freedom.
pub fn significance_threshold(n_test: usize, p: f64, tails: Tails) -> Result<f64> {
    if n_test < 4 {
        return Err(Error::Validation(format!("n_test must be at least 4, got {n_test}")));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Validation(format!("p must lie in (0, 1), got {p}")));
    }
    let df = (n_test - 2) as f64;
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::Internal(e.to_string()))?;
    let tail_p = match tails {
        Tails::One => p,
        Tails::Two => p / 2.0,
    };
    let t = dist.inverse_cdf(1.0 - tail_p);
    Ok(t / (df + t * t).sqrt())
}

/// A grouping of voxels for aggregate statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RegionGroup {
    /// Hemisphere x level, written `LL`, `LH`, `RL`, `RH`.
    Level(Hemisphere, Level),
    /// One ROI in one hemisphere, written like `L-PPA`.
    SubRegion(Hemisphere, Roi),
}

impl RegionGroup {
    pub fn contains(&self, v: &VoxelInfo) -> bool {
        match *self {
            RegionGroup::Level(h, l) => v.hemisphere == h && v.roi.level() == l,
            RegionGroup::SubRegion(h, r) => v.hemisphere == h && v.roi == r,
        }
    }

    /// The four level groups followed by the ten sub-regions.
    pub fn all() -> Vec<RegionGroup> {
        let mut out = Vec::with_capacity(14);
        for h in [Hemisphere::L, Hemisphere::R] {
            for l in [Level::Low, Level::High] {
                out.push(RegionGroup::Level(h, l));
            }
        }
        out.extend(Self::sub_regions());
        out
    }

    pub fn sub_regions() -> Vec<RegionGroup> {
        [Hemisphere::L, Hemisphere::R]
            .into_iter()
            .flat_map(|h| Roi::ALL.into_iter().map(move |r| RegionGroup::SubRegion(h, r)))
            .collect()
    }

    /// Groups with at least one member among `voxels`, in canonical order.
    pub fn present(voxels: &[VoxelInfo], groups: &[RegionGroup]) -> Vec<RegionGroup> {
        groups
            .iter()
            .copied()
            .filter(|g| voxels.iter().any(|v| g.contains(v)))
            .collect()
    }
}

impl fmt::Display for RegionGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RegionGroup::Level(h, l) => {
                let l = match l {
                    Level::Low => "L",
                    Level::High => "H",
                };
                write!(f, "{h}{l}")
            }
            RegionGroup::SubRegion(h, r) => write!(f, "{h}-{r}"),
        }
    }
}

impl FromStr for RegionGroup {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Validation(format!("unknown region group `{s}`"));
        if let Some((h, r)) = s.split_once('-') {
            let h = h.parse::<Hemisphere>().map_err(|_| bad())?;
            let r = r.parse::<Roi>().map_err(|_| bad())?;
            return Ok(RegionGroup::SubRegion(h, r));
        }
        let mut chars = s.chars();
        let (Some(h), Some(l), None) = (chars.next(), chars.next(), chars.next()) else {
            return Err(bad());
        };
        let h = h.to_string().parse::<Hemisphere>().map_err(|_| bad())?;
        let l = match l {
            'L' => Level::Low,
            'H' => Level::High,
            _ => return Err(bad()),
        };
        Ok(RegionGroup::Level(h, l))
    }
}

impl Serialize for RegionGroup {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for RegionGroup {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionStat {
    pub group: RegionGroup,
    /// Mean PC over non-degenerate voxels; absent when there are none.
    pub mean_pc: Option<f64>,
    pub n_voxels: usize,
    pub n_degenerate: usize,
}

/// NaN-flagged floats are written as JSON `null`.
mod nan_as_null {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        v.iter()
            .map(|x| if x.is_nan() { None } else { Some(*x) })
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        Ok(Vec::<Option<f64>>::deserialize(d)?
            .into_iter()
            .map(|x| x.unwrap_or(f64::NAN))
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub feature_source: FeatureSource,
    pub n_test: usize,
    pub voxels: Vec<VoxelInfo>,
    /// One PC per voxel; NaN marks a degenerate (constant) prediction or response.
    #[serde(with = "nan_as_null")]
    pub per_voxel_pc: Vec<f64>,
    pub region_means: Vec<RegionStat>,
}

impl EvaluationReport {
    pub fn n_degenerate(&self) -> usize {
        self.per_voxel_pc.iter().filter(|v| v.is_nan()).count()
    }

    pub fn region_mean(&self, group: RegionGroup) -> Option<f64> {
        self.region_means
            .iter()
            .find(|r| r.group == group)
            .and_then(|r| r.mean_pc)
    }

    /// Mean PC over all non-degenerate voxels.
    pub fn mean_pc(&self) -> Option<f64> {
        mean_finite(self.per_voxel_pc.iter().copied()).0
    }
}

fn mean_finite(values: impl Iterator<Item = f64>) -> (Option<f64>, usize, usize) {
    let (mut sum, mut n, mut nan) = (0.0, 0usize, 0usize);
    for v in values {
        if v.is_nan() {
            nan += 1;
        } else {
            sum += v;
            n += 1;
        }
    }
    ((n > 0).then(|| sum / n as f64), n + nan, nan)
}

fn region_stats(voxels: &[VoxelInfo], pcs: &[f64]) -> Vec<RegionStat> {
    RegionGroup::present(voxels, &RegionGroup::all())
        .into_iter()
        .map(|group| {
            let members = voxels.iter().zip(pcs).filter(|(v, _)| group.contains(v)).map(|(_, &pc)| pc);
            let (mean_pc, n_voxels, n_degenerate) = mean_finite(members);
            RegionStat {
                group,
                mean_pc,
                n_voxels,
                n_degenerate,
            }
        })
        .collect()
}

/// Score a prediction against observed test responses.
pub fn evaluate_prediction(
    pred: &Prediction,
    observed: &VoxelResponseMatrix,
    source: FeatureSource,
    exec: Execution,
) -> Result<EvaluationReport> {
    if pred.image_ids != observed.image_ids {
        return Err(Error::Alignment(
            "test features and responses are not aligned; run align() first".into(),
        ));
    }
    let observed_ids: Vec<&str> = observed.voxels.iter().map(|v| v.voxel_id.as_str()).collect();
    if pred.voxel_ids.iter().map(String::as_str).ne(observed_ids.iter().copied()) {
        return Err(Error::Validation(
            "model voxel ids do not match test response voxels".into(),
        ));
    }
    let n = observed.n_samples();
    if n < 3 {
        return Err(Error::Validation(format!("need at least 3 test samples, got {n}")));
    }
    let pcs = par::map_indexed(exec, observed.n_voxels(), |v| {
        let p: Vec<f64> = pred.values.column(v).to_vec();
        let o: Vec<f64> = observed.values.column(v).to_vec();
        pearson(&p, &o)
    })
    .into_iter()
    .collect::<Result<Vec<f64>>>()?;

    let report = EvaluationReport {
        feature_source: source,
        n_test: n,
        region_means: region_stats(&observed.voxels, &pcs),
        voxels: observed.voxels.clone(),
        per_voxel_pc: pcs,
    };
    let nd = report.n_degenerate();
    if nd > 0 {
        log::warn!("{nd} degenerate voxels excluded from region means");
    }
    Ok(report)
}

/// Predict the test set with `set` and score every voxel.
pub fn evaluate(
    set: &EncodingModelSet,
    test_features: &FeatureMatrix,
    test_responses: &VoxelResponseMatrix,
    exec: Execution,
) -> Result<EvaluationReport> {
    if test_features.image_ids != test_responses.image_ids {
        return Err(Error::Alignment(
            "test features and responses are not aligned; run align() first".into(),
        ));
    }
    let pred = predict(set, test_features, exec)?;
    evaluate_prediction(&pred, test_responses, set.feature_source.clone(), exec)
}

/// Mean PC per layer (rows) and region group (columns).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerProfile {
    pub layers: Vec<String>,
    pub groups: Vec<RegionGroup>,
    pub means: Vec<Vec<Option<f64>>>,
}

pub fn layer_profile(reports: &[EvaluationReport]) -> Result<LayerProfile> {
    let first = reports
        .first()
        .ok_or_else(|| Error::Validation("layer profile needs at least one report".into()))?;
    for r in &reports[1..] {
        if r.voxels != first.voxels {
            return Err(Error::Validation(format!(
                "report for {} covers different voxels than {}",
                r.feature_source, first.feature_source
            )));
        }
    }
    let groups = RegionGroup::present(&first.voxels, &RegionGroup::all());
    let means = reports
        .iter()
        .map(|r| groups.iter().map(|&g| r.region_mean(g)).collect())
        .collect();
    Ok(LayerProfile {
        layers: reports.iter().map(|r| r.feature_source.name().to_string()).collect(),
        groups,
        means,
    })
}

/// Layer with the highest mean PC for `group`; ties go to the earliest layer.
pub fn best_layer(profile: &LayerProfile, group: RegionGroup) -> Result<&str> {
    let col = profile
        .groups
        .iter()
        .position(|&g| g == group)
        .ok_or_else(|| Error::Validation(format!("region group {group} not in profile")))?;
    let mut best: Option<(usize, f64)> = None;
    for (i, row) in profile.means.iter().enumerate() {
        if let Some(v) = row[col] {
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((i, v));
            }
        }
    }
    best.map(|(i, _)| profile.layers[i].as_str())
        .ok_or_else(|| Error::Validation(format!("no layer has a defined mean for {group}")))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VoxelClass {
    NeitherSignificant,
    ABetter,
    BBetter,
    Tie,
}

impl VoxelClass {
    pub fn as_str(self) -> &'static str {
        match self {
            VoxelClass::NeitherSignificant => "neither_significant",
            VoxelClass::ABetter => "a_better",
            VoxelClass::BBetter => "b_better",
            VoxelClass::Tie => "tie",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    /// Uniform bins over `[-h, h]` with `h = max |value|` (1 when all values are 0).
    pub fn symmetric(values: &[f64], bins: usize) -> Self {
        let bins = bins.max(1);
        let mut h = values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if h == 0.0 {
            h = 1.0;
        }
        let width = 2.0 * h / bins as f64;
        let edges: Vec<f64> = (0..=bins).map(|i| -h + width * i as f64).collect();
        let mut counts = vec![0; bins];
        for v in values {
            let b = (((v + h) / width).floor() as usize).min(bins - 1);
            counts[b] += 1;
        }
        Histogram { edges, counts }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionDistance {
    pub group: RegionGroup,
    /// Mean |PC_a - PC_b| over the sub-region's non-degenerate voxels.
    pub mean_abs_diff: Option<f64>,
    pub n_voxels: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub neither_significant: usize,
    pub a_better: usize,
    pub b_better: usize,
    pub tie: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub source_a: FeatureSource,
    pub source_b: FeatureSource,
    pub threshold: f64,
    pub voxels: Vec<VoxelInfo>,
    #[serde(with = "nan_as_null")]
    pub pc_a: Vec<f64>,
    #[serde(with = "nan_as_null")]
    pub pc_b: Vec<f64>,
    pub classes: Vec<VoxelClass>,
    pub class_counts: ClassCounts,
    /// Voxels where both models reach the threshold.
    pub n_joint_significant: usize,
    pub fraction_a_better: f64,
    pub fraction_b_better: f64,
    pub fraction_tie: f64,
    /// Distribution of PC_a - PC_b over the jointly significant voxels.
    pub histogram: Histogram,
    pub sub_region_distance: Vec<RegionDistance>,
}

fn significant(pc: f64, threshold: f64) -> bool {
    !pc.is_nan() && pc >= threshold
}

/// Compare two evaluations of the same voxels.
///
/// Voxels below threshold under both models are `neither_significant`;
/// otherwise the sign of `PC_a - PC_b` decides, with exact ties kept apart.
/// Fractions and the histogram cover voxels significant under both models;
/// sub-region distances cover every voxel.
pub fn compare(
    a: &EvaluationReport,
    b: &EvaluationReport,
    threshold: f64,
    bins: usize,
) -> Result<ComparisonReport> {
    if a.voxels != b.voxels {
        return Err(Error::Validation("reports cover different voxel sets".into()));
    }
    if !threshold.is_finite() {
        return Err(Error::Validation(format!("threshold must be finite, got {threshold}")));
    }
    let mut counts = ClassCounts {
        neither_significant: 0,
        a_better: 0,
        b_better: 0,
        tie: 0,
    };
    let mut joint_diffs = Vec::new();
    let (mut ja, mut jb, mut jt) = (0usize, 0usize, 0usize);
    let classes: Vec<VoxelClass> = a
        .per_voxel_pc
        .iter()
        .zip(&b.per_voxel_pc)
        .map(|(&pa, &pb)| {
            let (sa, sb) = (significant(pa, threshold), significant(pb, threshold));
            let class = if !sa && !sb {
                VoxelClass::NeitherSignificant
            } else {
                let ka = if pa.is_nan() { f64::NEG_INFINITY } else { pa };
                let kb = if pb.is_nan() { f64::NEG_INFINITY } else { pb };
                if ka > kb {
                    VoxelClass::ABetter
                } else if kb > ka {
                    VoxelClass::BBetter
                } else {
                    VoxelClass::Tie
                }
            };
            match class {
                VoxelClass::NeitherSignificant => counts.neither_significant += 1,
                VoxelClass::ABetter => counts.a_better += 1,
                VoxelClass::BBetter => counts.b_better += 1,
                VoxelClass::Tie => counts.tie += 1,
            }
            if sa && sb {
                joint_diffs.push(pa - pb);
                match class {
                    VoxelClass::ABetter => ja += 1,
                    VoxelClass::BBetter => jb += 1,
                    _ => jt += 1,
                }
            }
            class
        })
        .collect();

    let nj = joint_diffs.len();
    let frac = |k: usize| if nj == 0 { 0.0 } else { k as f64 / nj as f64 };

    let sub_region_distance = RegionGroup::present(&a.voxels, &RegionGroup::sub_regions())
        .into_iter()
        .map(|group| {
            let diffs = a
                .voxels
                .iter()
                .zip(a.per_voxel_pc.iter().zip(&b.per_voxel_pc))
                .filter(|(v, _)| group.contains(v))
                .map(|(_, (pa, pb))| (pa - pb).abs());
            let (mean_abs_diff, n_voxels, _) = mean_finite(diffs);
            RegionDistance {
                group,
                mean_abs_diff,
                n_voxels,
            }
        })
        .collect();

    Ok(ComparisonReport {
        source_a: a.feature_source.clone(),
        source_b: b.feature_source.clone(),
        threshold,
        voxels: a.voxels.clone(),
        pc_a: a.per_voxel_pc.clone(),
        pc_b: b.per_voxel_pc.clone(),
        classes,
        class_counts: counts,
        n_joint_significant: nj,
        fraction_a_better: frac(ja),
        fraction_b_better: frac(jb),
        fraction_tie: frac(jt),
        histogram: Histogram::symmetric(&joint_diffs, bins),
        sub_region_distance,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            _ => Err(Error::Validation(format!("unknown report format `{s}`"))),
        }
    }
}

/// Reports that can be written as CSV and JSON.
pub trait Export: Serialize {
    fn to_csv(&self) -> Result<String>;

    fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Internal(e.to_string()))
    }
}

fn fmt_pc(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else {
        v.to_string()
    }
}

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new())
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Internal(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Internal(e.to_string()))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Internal(e.to_string())
}

pub const EVALUATION_CSV_HEADER: [&str; 5] = ["voxel_id", "subject", "roi", "hemisphere", "pc"];
pub const SCATTER_CSV_HEADER: [&str; 7] = ["voxel_id", "subject", "roi", "hemisphere", "pc_a", "pc_b", "class"];

impl Export for EvaluationReport {
    /// `voxel_id,subject,roi,hemisphere,pc`, one row per voxel.
    fn to_csv(&self) -> Result<String> {
        let mut w = csv_writer();
        w.write_record(EVALUATION_CSV_HEADER).map_err(csv_err)?;
        for (v, &pc) in self.voxels.iter().zip(&self.per_voxel_pc) {
            w.write_record([
                v.voxel_id.as_str(),
                &v.subject,
                v.roi.as_str(),
                v.hemisphere.as_str(),
                &fmt_pc(pc),
            ])
            .map_err(csv_err)?;
        }
        finish(w)
    }
}

impl Export for ComparisonReport {
    /// Scatter rows: `voxel_id,subject,roi,hemisphere,pc_a,pc_b,class`.
    fn to_csv(&self) -> Result<String> {
        let mut w = csv_writer();
        w.write_record(SCATTER_CSV_HEADER).map_err(csv_err)?;
        for (i, v) in self.voxels.iter().enumerate() {
            w.write_record([
                v.voxel_id.as_str(),
                &v.subject,
                v.roi.as_str(),
                v.hemisphere.as_str(),
                &fmt_pc(self.pc_a[i]),
                &fmt_pc(self.pc_b[i]),
                self.classes[i].as_str(),
            ])
            .map_err(csv_err)?;
        }
        finish(w)
    }
}

impl ComparisonReport {
    /// `bin_lo,bin_hi,count` for the difference histogram.
    pub fn histogram_csv(&self) -> Result<String> {
        let mut w = csv_writer();
        w.write_record(["bin_lo", "bin_hi", "count"]).map_err(csv_err)?;
        for (i, c) in self.histogram.counts.iter().enumerate() {
            w.write_record([
                self.histogram.edges[i].to_string(),
                self.histogram.edges[i + 1].to_string(),
                c.to_string(),
            ])
            .map_err(csv_err)?;
        }
        finish(w)
    }
}

impl Export for LayerProfile {
    /// `layer,<group>...` with empty cells for undefined means.
    fn to_csv(&self) -> Result<String> {
        let mut w = csv_writer();
        let mut header = vec!["layer".to_string()];
        header.extend(self.groups.iter().map(|g| g.to_string()));
        w.write_record(&header).map_err(csv_err)?;
        for (layer, row) in self.layers.iter().zip(&self.means) {
            let mut rec = vec![layer.clone()];
            rec.extend(row.iter().map(|m| m.map(|v| v.to_string()).unwrap_or_default()));
            w.write_record(&rec).map_err(csv_err)?;
        }
        finish(w)
    }
}

pub fn export_report<T: Export>(report: &T, format: ReportFormat, path: &Path) -> Result<()> {
    let text = match format {
        ReportFormat::Csv => report.to_csv()?,
        ReportFormat::Json => report.to_json()?,
    };
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Read back the per-voxel rows of an evaluation CSV.
pub fn read_evaluation_csv(text: &str) -> Result<Vec<(VoxelInfo, f64)>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = rdr
        .headers()
        .map_err(csv_err)?
        .iter()
        .map(str::to_string)
        .collect();
    if header != EVALUATION_CSV_HEADER {
        return Err(Error::Validation(format!("unexpected evaluation CSV header {header:?}")));
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let bad = |what: &str| Error::Validation(format!("row {}: bad {what}", i + 2));
        let info = VoxelInfo {
            voxel_id: rec[0].to_string(),
            subject: rec[1].to_string(),
            roi: rec[2].parse().map_err(|_| bad("roi"))?,
            hemisphere: rec[3].parse().map_err(|_| bad("hemisphere"))?,
        };
        let pc: f64 = rec[4].parse().map_err(|_| bad("pc"))?;
        out.push((info, pc));
    }
    Ok(out)
}

pub fn read_evaluation_json(path: &Path) -> Result<EvaluationReport> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| crate::encoding::json_error(&bytes, &e))
}
