use std::path::Path;

use serde::{Deserialize, Serialize};
use voxenc::evaluation::{Tails, DEFAULT_HISTOGRAM_BINS, DEFAULT_THRESHOLD};
use voxenc::features::DEFAULT_STATE_DIM;
use voxenc::interpretation::{DEFAULT_STOPWORDS, DEFAULT_WORDS_PER_IMAGE};
use voxenc::par::Execution;
use voxenc::solver::{Pursuit, SolverConfig};
use voxenc::synth::SynthConfig;
use voxenc::{Error, Result};

/// Settings shared by every subcommand, read from a TOML file.
/// Command-line flags override them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub state_dim: usize,
    pub sparsity_s: usize,
    pub comparability_ratio: f64,
    /// Defaults to twice `sparsity_s`.
    pub max_support: Option<usize>,
    pub pursuit: Pursuit,
    pub threshold: f64,
    pub p_value: f64,
    pub tails: Tails,
    pub words_per_image: usize,
    pub stopwords: Vec<String>,
    pub histogram_bins: usize,
    pub seed: u64,
    /// Unset means one worker per core.
    pub worker_count: Option<usize>,
    pub synth: SynthConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            state_dim: DEFAULT_STATE_DIM,
            sparsity_s: 16,
            comparability_ratio: 2.0,
            max_support: None,
            pursuit: Pursuit::Romp,
            threshold: DEFAULT_THRESHOLD,
            p_value: 0.001,
            tails: Tails::Two,
            words_per_image: DEFAULT_WORDS_PER_IMAGE,
            stopwords: DEFAULT_STOPWORDS.map(String::from).to_vec(),
            histogram_bins: DEFAULT_HISTOGRAM_BINS,
            seed: 0,
            worker_count: None,
            synth: SynthConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text).map_err(|e| match e {
            Error::Validation(m) => Error::Validation(format!("{}: {m}", path.display())),
            e => e,
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| Error::Validation(e.message().to_string()))?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Validation(format!("config: {m}")));
        if self.state_dim == 0 {
            return bad("state_dim must be positive".into());
        }
        if !(-1.0..=1.0).contains(&self.threshold) {
            return bad(format!("threshold must lie in [-1, 1], got {}", self.threshold));
        }
        if !(self.p_value > 0.0 && self.p_value < 1.0) {
            return bad(format!("p_value must lie in (0, 1), got {}", self.p_value));
        }
        if self.words_per_image == 0 {
            return bad("words_per_image must be at least 1".into());
        }
        if self.histogram_bins == 0 {
            return bad("histogram_bins must be at least 1".into());
        }
        if self.worker_count == Some(0) {
            return bad("worker_count must be at least 1".into());
        }
        self.solver().validate()?;
        self.synth_config().validate()
    }

    pub fn solver(&self) -> SolverConfig {
        let mut s = SolverConfig::new(self.sparsity_s);
        s.comparability_ratio = self.comparability_ratio;
        if let Some(m) = self.max_support {
            s.max_support = m;
        }
        s
    }

    pub fn execution(&self) -> Execution {
        match self.worker_count {
            Some(n) => Execution::workers(n),
            None => Execution::Auto,
        }
    }

    /// The `[synth]` table with the top-level seed applied.
    pub fn synth_config(&self) -> SynthConfig {
        SynthConfig {
            seed: self.seed,
            ..self.synth.clone()
        }
    }
}
