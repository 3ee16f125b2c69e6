//! Detection of computer-generated product reviews.
//!
//! The pipeline: normalize review text, build a multi-modal sparse feature
//! representation (word TF-IDF, character TF-IDF, raw counts, 43 linguistic
//! features), select a compact feature subset with binary Harris Hawks
//! Optimization, clean the training set with SMOTE + Edited Nearest
//! Neighbours, and classify with a stacking ensemble (extra trees, random
//! forest, gradient boosting, calibrated linear SVM, logistic-regression
//! meta-learner).
//!
//! All stages are deterministic given one root seed; see [`rng`] for the
//! substream scheme that keeps parallel and serial execution identical.

pub mod corpus;
pub mod eval;
pub mod features;
pub mod hho;
pub mod learners;
pub mod pipeline;
pub mod preprocess;
pub mod resample;
pub mod rng;

pub use corpus::{load_corpus, stratified_kfold, stratified_split, Corpus, Label, ReviewRecord};
pub use features::{fit_feature_space, transform, FeatureMatrix, FeatureSpace};
pub use hho::{minimize, select_features, FeatureMask, HhoParams};
pub use learners::{train_stacking, Classifier, StackingModel};
pub use pipeline::{ModelBundle, PipelineConfig, PipelineError, Profile, StageOrder};
pub use preprocess::{preprocess_document, CleanDocument, PreprocessConfig, Resources};
pub use resample::{smoteenn, ResampleParams, ResampledSet};
