use std::fs;
use std::path::Path;

use log::{info, warn};
use voxenc::encoding::{self, EncodingConfig, EncodingModelSet, VoxelInfo};
use voxenc::evaluation::{self, Export, ReportFormat, Tails};
use voxenc::features::{self, FeatureMatrix, FeatureSource, PoolOptions};
use voxenc::interchange::{self, Dtype};
use voxenc::interpretation::{self, CloudStyle, LabeledTable, StopWords, WordFrequencyTable};
use voxenc::solver::Pursuit;
use voxenc::{synth, Error, Result};

use crate::config::PipelineConfig;
use crate::{
    CompareArgs, EvaluateArgs, InterpretArgs, PoolArgs, PredictArgs, ProfileArgs, SynthArgs, ThresholdArgs,
    TrainArgs, WordcloudArgs,
};

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })
}

fn report_format(explicit: Option<&str>, path: &Path) -> Result<ReportFormat> {
    match explicit {
        Some(f) => f.parse(),
        None if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) => Ok(ReportFormat::Json),
        None => Ok(ReportFormat::Csv),
    }
}

fn parse_pursuit(s: &str) -> Result<Pursuit> {
    match s.to_ascii_lowercase().as_str() {
        "romp" => Ok(Pursuit::Romp),
        "omp" => Ok(Pursuit::Omp),
        "mp" => Ok(Pursuit::Mp),
        _ => Err(Error::Validation(format!("pursuit must be romp, omp or mp, got `{s}`"))),
    }
}

/// Voxel ids become file names; keep them portable.
fn file_stem(voxel_id: &str) -> String {
    voxel_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') { c } else { '_' })
        .collect()
}

fn aligned(features: &FeatureMatrix, responses: &encoding::VoxelResponseMatrix) -> Result<(FeatureMatrix, encoding::VoxelResponseMatrix)> {
    let (f, r, report) = features::align(features, responses)?;
    if report.dropped() > 0 {
        warn!(
            "alignment dropped {} feature rows and {} response rows",
            report.dropped_from_features.len(),
            report.dropped_from_responses.len()
        );
    }
    Ok((f, r))
}

pub fn pool(cfg: &mut PipelineConfig, a: PoolArgs) -> Result<()> {
    if let Some(d) = a.state_dim {
        cfg.state_dim = d;
    }
    cfg.validate()?;
    let seqs = interchange::read_word_states(&a.index, &a.states, Some(cfg.state_dim))?;
    let opts = PoolOptions {
        state_dim: cfg.state_dim,
        exclude_start: !a.keep_start,
        exclude_end: !a.keep_end,
    };
    let m = features::build_feature_matrix(&seqs, &opts, cfg.execution())?;
    let dtype = if a.f64 { Dtype::F64 } else { Dtype::F32 };
    interchange::write_feature_matrix(&m, &a.out, dtype)?;
    info!("pooled {} images into {}x{}", seqs.len(), m.n_samples(), m.dim());
    Ok(())
}

pub fn train(cfg: &mut PipelineConfig, a: TrainArgs) -> Result<()> {
    if let Some(s) = a.sparsity {
        cfg.sparsity_s = s;
    }
    if let Some(r) = a.ratio {
        cfg.comparability_ratio = r;
    }
    if a.max_support.is_some() {
        cfg.max_support = a.max_support;
    }
    if let Some(p) = &a.pursuit {
        cfg.pursuit = parse_pursuit(p)?;
    }
    cfg.validate()?;
    let source: FeatureSource = a.source.parse()?;
    let features = interchange::read_feature_matrix(&a.features, source)?;
    let responses = interchange::read_responses(&a.responses, &a.voxels)?;
    let (features, responses) = aligned(&features, &responses)?;
    let enc = EncodingConfig {
        solver: cfg.solver(),
        pursuit: cfg.pursuit,
        standardize_features: true,
        center_responses: a.center_responses,
        execution: cfg.execution(),
    };
    let set = encoding::train_voxelwise(&features, &responses, &enc)?;
    encoding::save_models(&set, &a.out)?;
    info!("trained {} voxel models on {} images", set.n_voxels(), features.n_samples());
    Ok(())
}

pub fn predict(cfg: &mut PipelineConfig, a: PredictArgs) -> Result<()> {
    cfg.validate()?;
    let set = encoding::load_models(&a.models)?;
    let features = interchange::read_feature_matrix(&a.features, set.feature_source.clone())?;
    let pred = encoding::predict(&set, &features, cfg.execution())?;
    interchange::write_fmat(&interchange::Fmat::from_f64(&pred.values, Some(pred.image_ids)), &a.out)
}

pub fn evaluate(cfg: &mut PipelineConfig, a: EvaluateArgs) -> Result<()> {
    cfg.validate()?;
    let format = report_format(a.format.as_deref(), &a.out)?;
    let set = encoding::load_models(&a.models)?;
    let features = interchange::read_feature_matrix(&a.features, set.feature_source.clone())?;
    let responses = interchange::read_responses(&a.responses, &a.voxels)?;
    let (features, responses) = aligned(&features, &responses)?;
    let report = evaluation::evaluate(&set, &features, &responses, cfg.execution())?;
    evaluation::export_report(&report, format, &a.out)?;
    let above = report.per_voxel_pc.iter().filter(|&&pc| pc >= cfg.threshold).count();
    match report.mean_pc() {
        Some(m) => println!(
            "{}: mean PC {m:.4} over {} voxels, {above} at or above {}",
            report.feature_source,
            report.per_voxel_pc.len(),
            cfg.threshold
        ),
        None => println!("{}: no voxel has a defined PC", report.feature_source),
    }
    Ok(())
}

pub fn layer_profile(a: ProfileArgs) -> Result<()> {
    let format = report_format(a.format.as_deref(), &a.out)?;
    let reports = a
        .reports
        .iter()
        .map(|p| evaluation::read_evaluation_json(p))
        .collect::<Result<Vec<_>>>()?;
    let profile = evaluation::layer_profile(&reports)?;
    evaluation::export_report(&profile, format, &a.out)?;
    for &g in &profile.groups {
        if let Ok(best) = evaluation::best_layer(&profile, g) {
            println!("{g}\t{best}");
        }
    }
    Ok(())
}

pub fn compare(cfg: &mut PipelineConfig, a: CompareArgs) -> Result<()> {
    if let Some(t) = a.threshold {
        cfg.threshold = t;
    }
    if let Some(b) = a.bins {
        cfg.histogram_bins = b;
    }
    cfg.validate()?;
    let ra = evaluation::read_evaluation_json(&a.a)?;
    let rb = evaluation::read_evaluation_json(&a.b)?;
    let c = evaluation::compare(&ra, &rb, cfg.threshold, cfg.histogram_bins)?;
    create_dir(&a.out_dir)?;
    write_text(&a.out_dir.join("comparison.json"), &c.to_json()?)?;
    write_text(&a.out_dir.join("scatter.csv"), &c.to_csv()?)?;
    write_text(&a.out_dir.join("histogram.csv"), &c.histogram_csv()?)?;
    println!(
        "{} vs {}: {} jointly significant; fraction better A {:.4}, B {:.4}, tie {:.4}",
        c.source_a, c.source_b, c.n_joint_significant, c.fraction_a_better, c.fraction_b_better, c.fraction_tie
    );
    Ok(())
}

fn group_label(v: &VoxelInfo, by: &str) -> Result<String> {
    Ok(match by {
        "region" => format!("{}-{}", v.hemisphere, v.roi),
        "roi" => v.roi.to_string(),
        "hemisphere" => v.hemisphere.to_string(),
        "subject" => v.subject.clone(),
        _ => {
            return Err(Error::Validation(format!(
                "group-by must be region, roi, hemisphere or subject, got `{by}`"
            )))
        }
    })
}

fn interpreted_voxels(set: &EncodingModelSet, a: &InterpretArgs, threshold: f64) -> Result<Vec<String>> {
    if !a.voxel_ids.is_empty() {
        return Ok(a.voxel_ids.clone());
    }
    let Some(path) = &a.report else {
        return Ok(set.voxel_ids());
    };
    let report = evaluation::read_evaluation_json(path)?;
    let ids: Vec<String> = report
        .voxels
        .iter()
        .zip(&report.per_voxel_pc)
        .filter(|(_, &pc)| pc >= threshold)
        .map(|(v, _)| v.voxel_id.clone())
        .collect();
    if ids.is_empty() {
        return Err(Error::Validation(format!("no voxel in {} reaches PC {threshold}", path.display())));
    }
    Ok(ids)
}

pub fn interpret(cfg: &mut PipelineConfig, a: InterpretArgs) -> Result<()> {
    if let Some(k) = a.words_per_image {
        cfg.words_per_image = k;
    }
    if let Some(t) = a.threshold {
        cfg.threshold = t;
    }
    cfg.validate()?;
    let set = encoding::load_models(&a.models)?;
    let responses = interchange::read_responses(&a.responses, &a.voxels)?;
    // word states must live in the space the models were fit in
    let seqs = interchange::read_word_states(&a.index, &a.states, Some(set.feature_dim))?;
    let ids = interpreted_voxels(&set, &a, cfg.threshold)?;
    let opts = PoolOptions::with_state_dim(set.feature_dim);
    let atts = interpretation::attribute_voxels(
        &set,
        &ids,
        &seqs,
        &responses,
        cfg.words_per_image,
        &opts,
        cfg.execution(),
    )?;

    create_dir(&a.out_dir)?;
    let stopwords = StopWords::new(&cfg.stopwords);
    let style = CloudStyle {
        seed: cfg.seed,
        ..Default::default()
    };
    let mut labeled = Vec::new();
    for att in &atts {
        let table = interpretation::build_frequency_table(&att.voxel_id, &att.per_image, &stopwords)?;
        let stem = file_stem(&att.voxel_id);
        write_text(&a.out_dir.join(format!("{stem}.csv")), &table.to_csv())?;
        if table.is_empty() {
            continue;
        }
        if a.clouds {
            let svg = interpretation::render_wordcloud_svg(&table, &style)?;
            write_text(&a.out_dir.join(format!("{stem}.svg")), &svg)?;
        }
        let info = responses
            .voxels
            .iter()
            .find(|v| v.voxel_id == att.voxel_id)
            .expect("attribution found this voxel");
        labeled.push(LabeledTable {
            group: group_label(info, &a.group_by)?,
            table,
        });
    }
    if labeled.len() >= 2 {
        let m = interpretation::similarity_matrix(&labeled, a.top)?;
        write_text(&a.out_dir.join("similarity.csv"), &m.to_csv())?;
        let pairs = serde_json::to_string_pretty(&m.top_pairs).map_err(|e| Error::Internal(e.to_string()))?;
        write_text(&a.out_dir.join("similar_pairs.json"), &(pairs + "\n"))?;
    }
    println!("interpreted {} voxels over {} captions", atts.len(), seqs.len());
    Ok(())
}

pub fn wordcloud(cfg: &mut PipelineConfig, a: WordcloudArgs) -> Result<()> {
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    let text = fs::read_to_string(&a.table).map_err(|source| Error::Io {
        path: a.table.clone(),
        source,
    })?;
    let title = a
        .title
        .clone()
        .or_else(|| a.table.file_stem().map(|s| s.to_string_lossy().into_owned()))
        .unwrap_or_default();
    let table = WordFrequencyTable::from_csv(&title, &text)?;
    let style = CloudStyle {
        seed: cfg.seed,
        ..Default::default()
    };
    write_text(&a.out, &interpretation::render_wordcloud_svg(&table, &style)?)
}

pub fn threshold(cfg: &mut PipelineConfig, a: ThresholdArgs) -> Result<()> {
    if let Some(p) = a.p {
        cfg.p_value = p;
    }
    if let Some(t) = &a.tails {
        cfg.tails = t.parse::<Tails>()?;
    }
    cfg.validate()?;
    let r = evaluation::significance_threshold(a.n, cfg.p_value, cfg.tails)?;
    println!("{r:.6}");
    Ok(())
}

pub fn synth(cfg: &mut PipelineConfig, a: SynthArgs) -> Result<()> {
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    let bundle = synth::generate(&cfg.synth_config())?;
    let written = synth::write_bundle(&bundle, &a.out_dir)?;
    println!("wrote {} files to {}", written.len(), a.out_dir.display());
    Ok(())
}
