//! Seeded synthetic datasets with planted sparse voxel models.
//!
//! Captions are random token strings over a small vocabulary; each word
//! state is the word's embedding plus noise. ICF features are pooled from
//! those states, and every voxel responds to a handful of standardized ICF
//! columns plus Gaussian noise. Degraded "CNN layers" are the standardized
//! ICF with extra feature noise, so they carry strictly less signal.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2, Axis};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::encoding::{Hemisphere, Roi, VoxelInfo, VoxelResponseMatrix};
use crate::error::{Error, Result};
use crate::features::{
    build_feature_matrix, FeatureMatrix, FeatureSource, PoolOptions, WordStateSequence, END_TOKEN, START_TOKEN,
};
use crate::interchange::{responses_to_fmat, write_feature_matrix, write_fmat, write_voxel_meta, write_word_states, Dtype};
use crate::par::Execution;
use crate::solver::standardize_columns;

const VOCABULARY: [&str; 64] = [
    "a", "the", "of", "on", "with", "in", "man", "woman", "people", "child", "dog", "cat", "horse", "bird", "car",
    "bus", "train", "boat", "plane", "bike", "street", "road", "building", "house", "room", "kitchen", "table",
    "chair", "bed", "window", "door", "tree", "grass", "field", "water", "beach", "sky", "mountain", "snow",
    "city", "park", "food", "plate", "pizza", "cake", "ball", "next", "close", "standing", "sitting", "riding",
    "walking", "holding", "large", "small", "red", "white", "black", "green", "blue", "old", "young", "group",
    "front",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthLayer {
    pub name: String,
    /// Standard deviation of the noise added to standardized ICF.
    pub noise_sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_train: usize,
    pub n_test: usize,
    pub state_dim: usize,
    /// Voxels per (hemisphere, ROI) sub-region.
    pub voxels_per_region: usize,
    pub subjects: Vec<String>,
    pub planted_sparsity: usize,
    pub planted_weight: f64,
    pub noise_sigma: f64,
    pub min_words: usize,
    pub max_words: usize,
    /// Per-element noise on top of a word's embedding.
    pub state_noise: f64,
    pub layers: Vec<SynthLayer>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 0,
            n_train: 1000,
            n_test: 113,
            state_dim: crate::features::DEFAULT_STATE_DIM,
            voxels_per_region: 20,
            subjects: vec!["S1".into()],
            planted_sparsity: 4,
            planted_weight: 0.5,
            noise_sigma: 1.0,
            min_words: 6,
            max_words: 12,
            state_noise: 0.5,
            layers: [("layer1", 4.0), ("layer2", 2.0), ("layer3", 1.0), ("layer4", 0.5)]
                .into_iter()
                .map(|(name, noise_sigma)| SynthLayer {
                    name: name.into(),
                    noise_sigma,
                })
                .collect(),
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Validation(format!("synth: {m}")));
        if self.n_train < 3 || self.n_test < 3 {
            return bad("n_train and n_test must be at least 3");
        }
        if self.state_dim == 0 || self.planted_sparsity == 0 || self.planted_sparsity > self.state_dim {
            return bad("planted_sparsity must be in 1..=state_dim");
        }
        if self.voxels_per_region == 0 || self.subjects.is_empty() {
            return bad("need at least one voxel per region and one subject");
        }
        if self.min_words == 0 || self.max_words < self.min_words {
            return bad("need 1 <= min_words <= max_words");
        }
        let finite = [self.planted_weight, self.noise_sigma, self.state_noise]
            .into_iter()
            .chain(self.layers.iter().map(|l| l.noise_sigma));
        if finite.into_iter().any(|v| !v.is_finite() || v < 0.0) {
            return bad("weights and noise levels must be finite and non-negative");
        }
        Ok(())
    }

    /// Expected test correlation of a perfect model: σ_s / √(σ_s² + σ_n²),
    /// taking the signal variance as k·w² (uncorrelated unit features).
    pub fn noise_ceiling(&self) -> f64 {
        let signal = self.planted_sparsity as f64 * self.planted_weight.powi(2);
        (signal / (signal + self.noise_sigma.powi(2))).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedVoxel {
    pub voxel_id: String,
    pub support: Vec<usize>,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SynthBundle {
    pub config: SynthConfig,
    pub train_words: Vec<WordStateSequence>,
    pub test_words: Vec<WordStateSequence>,
    pub icf_train: FeatureMatrix,
    pub icf_test: FeatureMatrix,
    /// `(train, test)` per configured layer.
    pub layers: Vec<(FeatureMatrix, FeatureMatrix)>,
    pub responses_train: VoxelResponseMatrix,
    pub responses_test: VoxelResponseMatrix,
    pub planted: Vec<PlantedVoxel>,
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn normal(sigma: f64) -> Normal<f64> {
    Normal::new(0.0, sigma).expect("validated sigma")
}

fn captions(
    prefix: &str,
    n: usize,
    cfg: &SynthConfig,
    embeddings: &Array2<f32>,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<WordStateSequence>> {
    let noise = normal(cfg.state_noise);
    (0..n)
        .map(|i| {
            let len = rng.random_range(cfg.min_words..=cfg.max_words);
            let words: Vec<usize> = (0..len).map(|_| rng.random_range(0..VOCABULARY.len())).collect();
            let mut tokens = vec![START_TOKEN.to_string()];
            tokens.extend(words.iter().map(|&w| VOCABULARY[w].to_string()));
            tokens.push(END_TOKEN.to_string());
            let mut states = Array2::<f32>::zeros((tokens.len(), cfg.state_dim));
            for (r, mut row) in states.outer_iter_mut().enumerate() {
                // the first and last rows stand in for the image-conditioned
                // start state and the end-of-caption state
                let base = match r {
                    0 => None,
                    r if r == len + 1 => None,
                    r => Some(embeddings.row(words[r - 1])),
                };
                for (j, v) in row.iter_mut().enumerate() {
                    let e = base.map_or(0.0, |b| f64::from(b[j]));
                    *v = (e + noise.sample(rng)) as f32;
                }
            }
            WordStateSequence::new(format!("{prefix}{i:05}"), tokens, states)
        })
        .collect()
}

fn voxel_layout(cfg: &SynthConfig) -> Vec<VoxelInfo> {
    let mut out = Vec::new();
    for subject in &cfg.subjects {
        for h in [Hemisphere::L, Hemisphere::R] {
            for roi in Roi::ALL {
                for k in 0..cfg.voxels_per_region {
                    out.push(VoxelInfo {
                        voxel_id: format!("{subject}-{}-{}-{k:03}", h.as_str(), roi.as_str()),
                        subject: subject.clone(),
                        roi,
                        hemisphere: h,
                    });
                }
            }
        }
    }
    out
}

/// Generate a bundle; identical configs give identical bundles.
pub fn generate(cfg: &SynthConfig) -> Result<SynthBundle> {
    cfg.validate()?;
    let opts = PoolOptions::with_state_dim(cfg.state_dim);

    let mut rng = stream(cfg.seed, 0);
    let unit = normal(1.0);
    let embeddings = Array2::from_shape_simple_fn((VOCABULARY.len(), cfg.state_dim), || unit.sample(&mut rng) as f32);
    let mut rng = stream(cfg.seed, 1);
    let train_words = captions("train", cfg.n_train, cfg, &embeddings, &mut rng)?;
    let test_words = captions("test", cfg.n_test, cfg, &embeddings, &mut rng)?;

    let icf_train = build_feature_matrix(&train_words, &opts, Execution::Sequential)?;
    let icf_test = build_feature_matrix(&test_words, &opts, Execution::Sequential)?;
    let (z_train, params) = standardize_columns(icf_train.values.view())?;
    let z_test = params.apply(icf_test.values.view())?;

    let voxels = voxel_layout(cfg);
    let mut rng = stream(cfg.seed, 2);
    let planted: Vec<PlantedVoxel> = voxels
        .iter()
        .map(|v| {
            let mut support = sample(&mut rng, cfg.state_dim, cfg.planted_sparsity).into_vec();
            support.sort_unstable();
            let weights = support
                .iter()
                .map(|_| if rng.random_bool(0.5) { cfg.planted_weight } else { -cfg.planted_weight })
                .collect();
            PlantedVoxel {
                voxel_id: v.voxel_id.clone(),
                support,
                weights,
            }
        })
        .collect();

    let mut rng = stream(cfg.seed, 3);
    let noise = normal(cfg.noise_sigma);
    let mut respond = |z: &Array2<f64>| {
        let mut y = Array2::<f64>::zeros((z.nrows(), planted.len()));
        for (mut col, p) in y.axis_iter_mut(Axis(1)).zip(&planted) {
            for (i, v) in col.iter_mut().enumerate() {
                let signal: f64 = p.support.iter().zip(&p.weights).map(|(&j, w)| w * z[(i, j)]).sum();
                *v = signal + noise.sample(&mut rng);
            }
        }
        y
    };
    let y_train = respond(&z_train);
    let y_test = respond(&z_test);
    let responses_train = VoxelResponseMatrix::new(y_train, icf_train.image_ids.clone(), voxels.clone())?;
    let responses_test = VoxelResponseMatrix::new(y_test, icf_test.image_ids.clone(), voxels)?;

    let layers = cfg
        .layers
        .iter()
        .enumerate()
        .map(|(l, layer)| {
            let mut rng = stream(cfg.seed, 100 + l as u64);
            let noise = normal(layer.noise_sigma);
            let mut degrade = |z: &Array2<f64>, ids: &[String]| {
                // stored as f32 on disk, so round here to keep memory and file identical
                let values = z.mapv(|v| (v + noise.sample(&mut rng)) as f32 as f64);
                FeatureMatrix::new(values, ids.to_vec(), FeatureSource::Cnn(layer.name.clone()))
            };
            Ok((degrade(&z_train, &icf_train.image_ids)?, degrade(&z_test, &icf_test.image_ids)?))
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(SynthBundle {
        config: cfg.clone(),
        train_words,
        test_words,
        icf_train,
        icf_test,
        layers,
        responses_train,
        responses_test,
        planted,
    })
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    format: &'static str,
    version: u32,
    config: &'a SynthConfig,
    noise_ceiling: f64,
    planted: &'a [PlantedVoxel],
}

/// Relative file names inside a bundle directory.
pub mod files {
    pub const MANIFEST: &str = "manifest.json";
    pub const VOXELS: &str = "voxels.csv";
    pub const WORDS_TRAIN_INDEX: &str = "words_train.jsonl";
    pub const WORDS_TRAIN_STATES: &str = "words_train.fmat";
    pub const WORDS_TEST_INDEX: &str = "words_test.jsonl";
    pub const WORDS_TEST_STATES: &str = "words_test.fmat";
    pub const ICF_TRAIN: &str = "icf_train.fmat";
    pub const ICF_TEST: &str = "icf_test.fmat";
    pub const RESPONSES_TRAIN: &str = "responses_train.fmat";
    pub const RESPONSES_TEST: &str = "responses_test.fmat";

    pub fn layer_train(name: &str) -> String {
        format!("cnn_{name}_train.fmat")
    }

    pub fn layer_test(name: &str) -> String {
        format!("cnn_{name}_test.fmat")
    }
}

/// Write every part of `bundle` under `dir` and return the paths written.
pub fn write_bundle(bundle: &SynthBundle, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    let mut path = |name: &str| {
        let p = dir.join(name);
        written.push(p.clone());
        p
    };

    let manifest = Manifest {
        format: "voxenc.synth",
        version: 1,
        config: &bundle.config,
        noise_ceiling: bundle.config.noise_ceiling(),
        planted: &bundle.planted,
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Internal(e.to_string()))?;
    let p = path(files::MANIFEST);
    fs::write(&p, json + "\n").map_err(|e| Error::io(&p, e))?;

    write_voxel_meta(&bundle.responses_train.voxels, &path(files::VOXELS))?;
    write_word_states(&bundle.train_words, &path(files::WORDS_TRAIN_INDEX), &path(files::WORDS_TRAIN_STATES))?;
    write_word_states(&bundle.test_words, &path(files::WORDS_TEST_INDEX), &path(files::WORDS_TEST_STATES))?;
    write_feature_matrix(&bundle.icf_train, &path(files::ICF_TRAIN), Dtype::F32)?;
    write_feature_matrix(&bundle.icf_test, &path(files::ICF_TEST), Dtype::F32)?;
    write_fmat(&responses_to_fmat(&bundle.responses_train), &path(files::RESPONSES_TRAIN))?;
    write_fmat(&responses_to_fmat(&bundle.responses_test), &path(files::RESPONSES_TEST))?;
    for (layer, (train, test)) in bundle.config.layers.iter().zip(&bundle.layers) {
        write_feature_matrix(train, &path(&files::layer_train(&layer.name)), Dtype::F32)?;
        write_feature_matrix(test, &path(&files::layer_test(&layer.name)), Dtype::F32)?;
    }
    Ok(written)
}

/// Noise-free response of a planted voxel for each row of standardized features.
pub fn planted_signal(planted: &PlantedVoxel, z: &Array2<f64>) -> Array1<f64> {
    z.outer_iter()
        .map(|row| planted.support.iter().zip(&planted.weights).map(|(&j, w)| w * row[j]).sum())
        .collect()
}
