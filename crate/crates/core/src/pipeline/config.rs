//! Flat key-value pipeline configuration with a strict schema: every key is
//! typed, unknown keys are errors, and the snapshot writer emits keys in a
//! fixed order so identical configs serialize byte-identically.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::CorpusSchema;
use crate::features::FeatureCaps;
use crate::preprocess::{PreprocessConfig, ResourcePaths};

use super::PipelineError;

/// Scale preset: estimator counts, optimizer budget, vocabulary caps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Profile {
    /// fast settings for tests and iteration
    Desk,
    /// the reported full-scale configuration
    Paper,
}

impl Profile {
    pub fn as_str(self) -> &'static str {
        match self {
            Profile::Desk => "desk",
            Profile::Paper => "paper",
        }
    }

    pub fn parse(s: &str) -> Option<Profile> {
        match s.trim().to_ascii_lowercase().as_str() {
            "desk" => Some(Profile::Desk),
            "paper" => Some(Profile::Paper),
            _ => None,
        }
    }
}

/// Stage sequencing. `Standard` keeps every fitted statistic inside the
/// training partition; `PaperCompat` resamples the whole dataset before
/// splitting, mirroring the reported protocol (which leaks synthetic
/// neighbors across the split and is labeled as such in reports).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StageOrder {
    Standard,
    PaperCompat,
}

impl StageOrder {
    pub fn as_str(self) -> &'static str {
        match self {
            StageOrder::Standard => "standard",
            StageOrder::PaperCompat => "paper_compat",
        }
    }

    pub fn parse(s: &str) -> Option<StageOrder> {
        match s.trim().to_ascii_lowercase().as_str() {
            "standard" => Some(StageOrder::Standard),
            "paper_compat" => Some(StageOrder::PaperCompat),
            _ => None,
        }
    }
}

/// Harris Hawks selection knobs as configured (bounds are symmetric around
/// zero at `bound`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HhoConfig {
    pub hawks: usize,
    pub iterations: usize,
    pub levy_beta: f64,
    pub bound: f64,
    pub alpha: f64,
    pub holdout_fraction: f64,
    pub max_rows: usize,
    pub knn_k: usize,
}

/// Learner knobs beyond the estimator counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    pub extra_trees: usize,
    pub random_forest: usize,
    pub boosting: usize,
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub gb_depth: usize,
    pub gb_learning_rate: f64,
    pub svm_lambda: f64,
    pub svm_epochs: usize,
    pub logreg_l2: f64,
    pub stacking_folds: usize,
}

/// The full pipeline configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub data_path: Option<PathBuf>,
    pub schema: CorpusSchema,
    pub resources: ResourcePaths,
    pub preprocess: PreprocessConfig,
    pub caps: FeatureCaps,
    pub hho: HhoConfig,
    pub smote_k: usize,
    pub enn_k: usize,
    pub target_ratio: f64,
    pub learners: LearnerConfig,
    pub test_fraction: f64,
    pub seed: u64,
    pub profile: Profile,
    pub stage_order: StageOrder,
}

impl PipelineConfig {
    /// Desk-scale defaults: small vocabularies, a 25x60 optimizer budget,
    /// and 50/40/50 estimators.
    pub fn desk(seed: u64) -> PipelineConfig {
        PipelineConfig {
            data_path: None,
            schema: CorpusSchema::default(),
            resources: ResourcePaths::default(),
            preprocess: PreprocessConfig::default(),
            caps: FeatureCaps {
                word_max: 2_000,
                char_max: 500,
                count_max: 500,
                ..FeatureCaps::default()
            },
            hho: HhoConfig {
                hawks: 25,
                iterations: 60,
                levy_beta: 1.5,
                bound: 4.0,
                alpha: 0.99,
                holdout_fraction: 0.3,
                max_rows: 1_000,
                knn_k: 5,
            },
            smote_k: 5,
            enn_k: 3,
            target_ratio: 1.0,
            learners: LearnerConfig {
                extra_trees: 50,
                random_forest: 40,
                boosting: 50,
                max_depth: 24,
                min_samples_split: 2,
                gb_depth: 6,
                gb_learning_rate: 0.1,
                svm_lambda: 1e-4,
                svm_epochs: 10,
                logreg_l2: 1e-4,
                stacking_folds: 5,
            },
            test_fraction: 0.15,
            seed,
            profile: Profile::Desk,
            stage_order: StageOrder::Standard,
        }
    }

    /// Full-scale defaults: 10000/1500/2000 vocabulary caps, 30 hawks for
    /// 50 iterations, 500/400/500 estimators.
    pub fn paper(seed: u64) -> PipelineConfig {
        let mut config = PipelineConfig::desk(seed);
        config.profile = Profile::Paper;
        config.caps = FeatureCaps::default();
        config.hho = HhoConfig {
            hawks: 30,
            iterations: 50,
            levy_beta: 1.5,
            bound: 4.0,
            alpha: 0.99,
            holdout_fraction: 0.2,
            max_rows: 2_000,
            knn_k: 5,
        };
        config.learners.extra_trees = 500;
        config.learners.random_forest = 400;
        config.learners.boosting = 500;
        config
    }

    pub fn for_profile(profile: Profile, seed: u64) -> PipelineConfig {
        match profile {
            Profile::Desk => PipelineConfig::desk(seed),
            Profile::Paper => PipelineConfig::paper(seed),
        }
    }

    /// Serialize as the flat key-value snapshot. Stable key order.
    pub fn to_snapshot(&self) -> String {
        let mut out = String::new();
        let path_str = |p: &Option<PathBuf>| {
            p.as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_default()
        };
        let mut kv = |k: &str, v: String| writeln!(out, "{k} = {v}").expect("write to string");
        kv("profile", self.profile.as_str().to_string());
        kv("stage_order", self.stage_order.as_str().to_string());
        kv("seed", self.seed.to_string());
        kv("data.path", path_str(&self.data_path));
        kv("data.text_column", self.schema.text_column.clone());
        kv("data.label_column", self.schema.label_column.clone());
        kv(
            "data.category_column",
            self.schema.category_column.clone().unwrap_or_default(),
        );
        kv(
            "data.rating_column",
            self.schema.rating_column.clone().unwrap_or_default(),
        );
        kv("resources.contractions", path_str(&self.resources.contractions));
        kv("resources.lemmas", path_str(&self.resources.lemmas));
        kv("resources.stopwords", path_str(&self.resources.stopwords));
        kv("resources.valence", path_str(&self.resources.valence));
        kv("resources.superlatives", path_str(&self.resources.superlatives));
        kv("resources.intensifiers", path_str(&self.resources.intensifiers));
        kv(
            "preprocess.expand_contractions",
            self.preprocess.expand_contractions.to_string(),
        );
        kv("preprocess.lowercase", self.preprocess.lowercase.to_string());
        kv(
            "preprocess.preserve_emotive_punct",
            self.preprocess.preserve_emotive_punct.to_string(),
        );
        kv("preprocess.lemmatize", self.preprocess.lemmatize.to_string());
        kv(
            "preprocess.remove_stopwords",
            self.preprocess.remove_stopwords.to_string(),
        );
        kv("features.word_max", self.caps.word_max.to_string());
        kv("features.word_ngram_min", self.caps.word_ngram.0.to_string());
        kv("features.word_ngram_max", self.caps.word_ngram.1.to_string());
        kv("features.char_max", self.caps.char_max.to_string());
        kv("features.char_ngram_min", self.caps.char_ngram.0.to_string());
        kv("features.char_ngram_max", self.caps.char_ngram.1.to_string());
        kv("features.count_max", self.caps.count_max.to_string());
        kv("features.count_ngram_min", self.caps.count_ngram.0.to_string());
        kv("features.count_ngram_max", self.caps.count_ngram.1.to_string());
        kv("hho.hawks", self.hho.hawks.to_string());
        kv("hho.iterations", self.hho.iterations.to_string());
        kv("hho.levy_beta", self.hho.levy_beta.to_string());
        kv("hho.bound", self.hho.bound.to_string());
        kv("hho.alpha", self.hho.alpha.to_string());
        kv("hho.holdout_fraction", self.hho.holdout_fraction.to_string());
        kv("hho.max_rows", self.hho.max_rows.to_string());
        kv("hho.knn_k", self.hho.knn_k.to_string());
        kv("resample.smote_k", self.smote_k.to_string());
        kv("resample.enn_k", self.enn_k.to_string());
        kv("resample.target_ratio", self.target_ratio.to_string());
        kv("learners.extra_trees", self.learners.extra_trees.to_string());
        kv("learners.random_forest", self.learners.random_forest.to_string());
        kv("learners.boosting", self.learners.boosting.to_string());
        kv("learners.max_depth", self.learners.max_depth.to_string());
        kv(
            "learners.min_samples_split",
            self.learners.min_samples_split.to_string(),
        );
        kv("learners.gb_depth", self.learners.gb_depth.to_string());
        kv(
            "learners.gb_learning_rate",
            self.learners.gb_learning_rate.to_string(),
        );
        kv("learners.svm_lambda", self.learners.svm_lambda.to_string());
        kv("learners.svm_epochs", self.learners.svm_epochs.to_string());
        kv("learners.logreg_l2", self.learners.logreg_l2.to_string());
        kv(
            "learners.stacking_folds",
            self.learners.stacking_folds.to_string(),
        );
        kv("split.test_fraction", self.test_fraction.to_string());
        out
    }

    /// Apply one `key = value` assignment. Unknown keys and untypable values
    /// are errors.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), PipelineError> {
        let bad_value = |expected: &str| {
            Err(PipelineError::Config(format!(
                "key '{key}': cannot parse '{value}' as {expected}"
            )))
        };
        macro_rules! parse {
            ($ty:ty, $name:expr) => {
                match value.trim().parse::<$ty>() {
                    Ok(v) => v,
                    Err(_) => return bad_value($name),
                }
            };
        }
        let opt_path = |v: &str| {
            let v = v.trim();
            if v.is_empty() {
                None
            } else {
                Some(PathBuf::from(v))
            }
        };
        let opt_string = |v: &str| {
            let v = v.trim();
            if v.is_empty() {
                None
            } else {
                Some(v.to_string())
            }
        };
        match key {
            "profile" => {
                let profile = Profile::parse(value).ok_or_else(|| {
                    PipelineError::Config(format!("unknown profile '{value}'"))
                })?;
                *self = PipelineConfig::for_profile(profile, self.seed);
            }
            "stage_order" => {
                self.stage_order = StageOrder::parse(value).ok_or_else(|| {
                    PipelineError::Config(format!("unknown stage_order '{value}'"))
                })?;
            }
            "seed" => self.seed = parse!(u64, "an unsigned integer"),
            "data.path" => self.data_path = opt_path(value),
            "data.text_column" => self.schema.text_column = value.trim().to_string(),
            "data.label_column" => self.schema.label_column = value.trim().to_string(),
            "data.category_column" => self.schema.category_column = opt_string(value),
            "data.rating_column" => self.schema.rating_column = opt_string(value),
            "resources.contractions" => self.resources.contractions = opt_path(value),
            "resources.lemmas" => self.resources.lemmas = opt_path(value),
            "resources.stopwords" => self.resources.stopwords = opt_path(value),
            "resources.valence" => self.resources.valence = opt_path(value),
            "resources.superlatives" => self.resources.superlatives = opt_path(value),
            "resources.intensifiers" => self.resources.intensifiers = opt_path(value),
            "preprocess.expand_contractions" => {
                self.preprocess.expand_contractions = parse!(bool, "a boolean")
            }
            "preprocess.lowercase" => self.preprocess.lowercase = parse!(bool, "a boolean"),
            "preprocess.preserve_emotive_punct" => {
                self.preprocess.preserve_emotive_punct = parse!(bool, "a boolean")
            }
            "preprocess.lemmatize" => self.preprocess.lemmatize = parse!(bool, "a boolean"),
            "preprocess.remove_stopwords" => {
                self.preprocess.remove_stopwords = parse!(bool, "a boolean")
            }
            "features.word_max" => self.caps.word_max = parse!(usize, "an integer"),
            "features.word_ngram_min" => self.caps.word_ngram.0 = parse!(usize, "an integer"),
            "features.word_ngram_max" => self.caps.word_ngram.1 = parse!(usize, "an integer"),
            "features.char_max" => self.caps.char_max = parse!(usize, "an integer"),
            "features.char_ngram_min" => self.caps.char_ngram.0 = parse!(usize, "an integer"),
            "features.char_ngram_max" => self.caps.char_ngram.1 = parse!(usize, "an integer"),
            "features.count_max" => self.caps.count_max = parse!(usize, "an integer"),
            "features.count_ngram_min" => self.caps.count_ngram.0 = parse!(usize, "an integer"),
            "features.count_ngram_max" => self.caps.count_ngram.1 = parse!(usize, "an integer"),
            "hho.hawks" => self.hho.hawks = parse!(usize, "an integer"),
            "hho.iterations" => self.hho.iterations = parse!(usize, "an integer"),
            "hho.levy_beta" => self.hho.levy_beta = parse!(f64, "a number"),
            "hho.bound" => self.hho.bound = parse!(f64, "a number"),
            "hho.alpha" => self.hho.alpha = parse!(f64, "a number"),
            "hho.holdout_fraction" => self.hho.holdout_fraction = parse!(f64, "a number"),
            "hho.max_rows" => self.hho.max_rows = parse!(usize, "an integer"),
            "hho.knn_k" => self.hho.knn_k = parse!(usize, "an integer"),
            "resample.smote_k" => self.smote_k = parse!(usize, "an integer"),
            "resample.enn_k" => self.enn_k = parse!(usize, "an integer"),
            "resample.target_ratio" => self.target_ratio = parse!(f64, "a number"),
            "learners.extra_trees" => self.learners.extra_trees = parse!(usize, "an integer"),
            "learners.random_forest" => self.learners.random_forest = parse!(usize, "an integer"),
            "learners.boosting" => self.learners.boosting = parse!(usize, "an integer"),
            "learners.max_depth" => self.learners.max_depth = parse!(usize, "an integer"),
            "learners.min_samples_split" => {
                self.learners.min_samples_split = parse!(usize, "an integer")
            }
            "learners.gb_depth" => self.learners.gb_depth = parse!(usize, "an integer"),
            "learners.gb_learning_rate" => {
                self.learners.gb_learning_rate = parse!(f64, "a number")
            }
            "learners.svm_lambda" => self.learners.svm_lambda = parse!(f64, "a number"),
            "learners.svm_epochs" => self.learners.svm_epochs = parse!(usize, "an integer"),
            "learners.logreg_l2" => self.learners.logreg_l2 = parse!(f64, "a number"),
            "learners.stacking_folds" => {
                self.learners.stacking_folds = parse!(usize, "an integer")
            }
            "split.test_fraction" => self.test_fraction = parse!(f64, "a number"),
            _ => {
                return Err(PipelineError::Config(format!("unknown config key '{key}'")));
            }
        }
        Ok(())
    }

    /// Parse a whole config document. `profile`, if present, must come first
    /// so later keys override its defaults rather than being reset by it.
    pub fn parse_document(text: &str, base: PipelineConfig) -> Result<PipelineConfig, PipelineError> {
        let mut config = base;
        let mut seen_any_key = false;
        for (line_no, raw_line) in text.lines().enumerate() {
            let line = raw_line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                PipelineError::Config(format!(
                    "line {}: expected 'key = value', got '{line}'",
                    line_no + 1
                ))
            })?;
            let key = key.trim();
            if key == "profile" && seen_any_key {
                return Err(PipelineError::Config(
                    "'profile' must be the first key so it cannot silently reset earlier overrides"
                        .to_string(),
                ));
            }
            seen_any_key = true;
            config.set(key, value.trim())?;
        }
        Ok(config)
    }

    pub fn load(path: &Path, base: PipelineConfig) -> Result<PipelineConfig, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            PipelineError::Config(format!("cannot read config {}: {e}", path.display()))
        })?;
        PipelineConfig::parse_document(&text, base)
    }

    /// Basic sanity checks before a run.
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |msg: String| Err(PipelineError::Config(msg));
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return bad(format!(
                "split.test_fraction must lie in (0,1), got {}",
                self.test_fraction
            ));
        }
        if !(self.hho.alpha > 0.0 && self.hho.alpha < 1.0) {
            return bad(format!("hho.alpha must lie in (0,1), got {}", self.hho.alpha));
        }
        if self.enn_k.is_multiple_of(2) || self.enn_k == 0 {
            return bad(format!("resample.enn_k must be odd, got {}", self.enn_k));
        }
        if self.smote_k == 0 {
            return bad("resample.smote_k must be at least 1".to_string());
        }
        if self.learners.stacking_folds < 2 {
            return bad("learners.stacking_folds must be at least 2".to_string());
        }
        if self.hho.hawks < 2 || self.hho.iterations < 1 {
            return bad("hho needs at least 2 hawks and 1 iteration".to_string());
        }
        if !(self.hho.levy_beta > 1.0 && self.hho.levy_beta <= 2.0) {
            return bad(format!(
                "hho.levy_beta must lie in (1,2], got {}",
                self.hho.levy_beta
            ));
        }
        if self.hho.bound <= 0.0 {
            return bad(format!("hho.bound must be positive, got {}", self.hho.bound));
        }
        Ok(())
    }
}
