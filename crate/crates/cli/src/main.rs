mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use voxenc::{Error, ErrorCategory};

use crate::config::PipelineConfig;

const POOL_KEYS: &str = "Config keys read: state_dim, worker_count";
const TRAIN_KEYS: &str =
    "Config keys read: sparsity_s, comparability_ratio, max_support, pursuit, worker_count";
const PREDICT_KEYS: &str = "Config keys read: worker_count";
const EVALUATE_KEYS: &str = "Config keys read: threshold (summary only), worker_count";
const PROFILE_KEYS: &str = "Config keys read: none";
const COMPARE_KEYS: &str = "Config keys read: threshold, histogram_bins";
const INTERPRET_KEYS: &str =
    "Config keys read: words_per_image, stopwords, threshold, seed (word clouds), worker_count";
const WORDCLOUD_KEYS: &str = "Config keys read: seed";
const THRESHOLD_KEYS: &str = "Config keys read: p_value, tails";
const SYNTH_KEYS: &str = "Config keys read: seed, [synth] n_train, n_test, state_dim, voxels_per_region, \
subjects, planted_sparsity, planted_weight, noise_sigma, min_words, max_words, state_noise, layers";

#[derive(Parser)]
#[command(name = "voxenc", version, about = "Voxel-wise sparse encoding of fMRI responses from caption features")]
struct Cli {
    /// TOML file with pipeline settings; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (overrides worker_count).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Print failures as a JSON object on stderr.
    #[arg(long, global = true)]
    error_json: bool,
    /// Increase log detail (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Max-pool caption word states into one feature row per image.
    #[command(after_help = POOL_KEYS)]
    Pool(PoolArgs),
    /// Fit one sparse model per voxel.
    #[command(after_help = TRAIN_KEYS)]
    Train(TrainArgs),
    /// Apply a model file to a feature matrix.
    #[command(after_help = PREDICT_KEYS)]
    Predict(PredictArgs),
    /// Score test predictions with Pearson correlation per voxel.
    #[command(after_help = EVALUATE_KEYS)]
    Evaluate(EvaluateArgs),
    /// Tabulate region means across several evaluation reports.
    #[command(after_help = PROFILE_KEYS)]
    LayerProfile(ProfileArgs),
    /// Compare two evaluations of the same voxels.
    #[command(after_help = COMPARE_KEYS)]
    Compare(CompareArgs),
    /// Attribute caption words to voxels and count them.
    #[command(after_help = INTERPRET_KEYS)]
    Interpret(InterpretArgs),
    /// Render a word-frequency table as an SVG word cloud.
    #[command(after_help = WORDCLOUD_KEYS)]
    Wordcloud(WordcloudArgs),
    /// Critical correlation for a test-set size and significance level.
    #[command(after_help = THRESHOLD_KEYS)]
    Threshold(ThresholdArgs),
    /// Write a synthetic dataset with planted sparse voxel models.
    #[command(after_help = SYNTH_KEYS)]
    Synth(SynthArgs),
}

#[derive(Args)]
struct PoolArgs {
    /// Word-state index (JSON lines).
    #[arg(long)]
    index: PathBuf,
    /// Stacked word states (FMAT).
    #[arg(long)]
    states: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    state_dim: Option<usize>,
    /// Pool the `<start>` state too.
    #[arg(long)]
    keep_start: bool,
    /// Pool the `<end>` state too.
    #[arg(long)]
    keep_end: bool,
    /// Store features as f64 instead of f32.
    #[arg(long)]
    f64: bool,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    features: PathBuf,
    /// Response matrix (FMAT, one column per voxel).
    #[arg(long)]
    responses: PathBuf,
    /// Voxel metadata CSV for the response columns.
    #[arg(long)]
    voxels: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// `ICF` or `CNN:<layer>`.
    #[arg(long, default_value = "ICF")]
    source: String,
    #[arg(long)]
    sparsity: Option<usize>,
    #[arg(long)]
    ratio: Option<f64>,
    #[arg(long)]
    max_support: Option<usize>,
    /// romp, omp or mp.
    #[arg(long)]
    pursuit: Option<String>,
    /// Subtract each voxel's training mean first.
    #[arg(long)]
    center_responses: bool,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    models: PathBuf,
    #[arg(long)]
    features: PathBuf,
    /// Prediction matrix (FMAT); columns follow the model file's voxel order.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    models: PathBuf,
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    responses: PathBuf,
    #[arg(long)]
    voxels: PathBuf,
    /// Report path; `.json` selects JSON unless --format says otherwise.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    format: Option<String>,
}

#[derive(Args)]
struct ProfileArgs {
    /// Evaluation reports (JSON), one per layer, in layer order.
    #[arg(long, num_args = 1.., required = true)]
    reports: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    format: Option<String>,
}

#[derive(Args)]
struct CompareArgs {
    /// Evaluation report (JSON) for model A.
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
    /// Receives comparison.json, scatter.csv and histogram.csv.
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    bins: Option<usize>,
}

#[derive(Args)]
struct InterpretArgs {
    #[arg(long)]
    models: PathBuf,
    #[arg(long)]
    index: PathBuf,
    #[arg(long)]
    states: PathBuf,
    #[arg(long)]
    responses: PathBuf,
    #[arg(long)]
    voxels: PathBuf,
    /// Receives one `<voxel>.csv` table per voxel, plus similarity files.
    #[arg(long)]
    out_dir: PathBuf,
    /// Voxels to interpret (repeatable). Default: all, or the significant
    /// ones when --report is given.
    #[arg(long = "voxel")]
    voxel_ids: Vec<String>,
    /// Evaluation report used to keep voxels at or above the threshold.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    words_per_image: Option<usize>,
    #[arg(long)]
    threshold: Option<f64>,
    /// Grouping for cross-group similar pairs: region, roi, hemisphere or subject.
    #[arg(long, default_value = "region")]
    group_by: String,
    /// Number of cross-group pairs to list.
    #[arg(long, default_value_t = 10)]
    top: usize,
    /// Also render an SVG word cloud per voxel.
    #[arg(long)]
    clouds: bool,
}

#[derive(Args)]
struct WordcloudArgs {
    /// Frequency table CSV (`token,count`).
    #[arg(long)]
    table: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Title for the document; defaults to the table's file stem.
    #[arg(long)]
    title: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct ThresholdArgs {
    /// Number of test samples.
    #[arg(long)]
    n: usize,
    #[arg(long)]
    p: Option<f64>,
    /// one or two.
    #[arg(long)]
    tails: Option<String>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
}

fn exit_status(e: &Error) -> u8 {
    match e.category() {
        ErrorCategory::Validation => 1,
        ErrorCategory::Io => 2,
        ErrorCategory::Internal => 3,
    }
}

fn report_error(e: &Error, json: bool) -> ExitCode {
    let status = exit_status(e);
    if json {
        let category = match e.category() {
            ErrorCategory::Validation => "validation",
            ErrorCategory::Io => "io",
            ErrorCategory::Internal => "internal",
        };
        let obj = serde_json::json!({
            "error": { "code": e.code(), "category": category, "message": e.to_string() },
            "exit_status": status,
        });
        eprintln!("{obj}");
    } else {
        eprintln!("error: {e}");
    }
    ExitCode::from(status)
}

fn load_config(cli: &Cli) -> voxenc::Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(n) = cli.workers {
        cfg.worker_count = Some(n);
    }
    Ok(cfg)
}

fn run(cli: Cli) -> voxenc::Result<()> {
    let mut cfg = load_config(&cli)?;
    match cli.command {
        Command::Pool(a) => commands::pool(&mut cfg, a),
        Command::Train(a) => commands::train(&mut cfg, a),
        Command::Predict(a) => commands::predict(&mut cfg, a),
        Command::Evaluate(a) => commands::evaluate(&mut cfg, a),
        Command::LayerProfile(a) => commands::layer_profile(a),
        Command::Compare(a) => commands::compare(&mut cfg, a),
        Command::Interpret(a) => commands::interpret(&mut cfg, a),
        Command::Wordcloud(a) => commands::wordcloud(&mut cfg, a),
        Command::Threshold(a) => commands::threshold(&mut cfg, a),
        Command::Synth(a) => commands::synth(&mut cfg, a),
    }
}

fn main() -> ExitCode {
    let wants_json = std::env::args().any(|a| a == "--error-json");
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            if wants_json {
                let msg = e.to_string();
                let first = msg.lines().next().unwrap_or_default();
                return report_error(&Error::Validation(first.trim_start_matches("error: ").to_string()), true);
            }
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let json = cli.error_json;
    match std::panic::catch_unwind(|| run(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => report_error(&e, json),
        Err(_) => report_error(&Error::Internal("unexpected panic".into()), json),
    }
}
