//! The classifier zoo: tree ensembles, gradient boosting, linear models, and
//! the stacking ensemble that combines them through out-of-fold predictions.

mod boost;
mod linear;
mod tree;

pub use boost::{
    fit_regression_tree, log_loss, presort_features, train_gradient_boosting, BoostedModel,
    GbParams, RegressionTree,
};
pub use linear::{
    hinge_loss, logistic_loss_gradient, train_linear_svm, train_logistic_regression, LinearModel,
    LogRegParams, SvmParams,
};
pub use tree::{
    train_extra_trees, train_random_forest, train_tree, CandidateCount, DecisionTree, ForestModel,
    SplitRule, TreeParams,
};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{stratified_kfold, Label};
use crate::features::DenseMatrix;
use crate::rng::substream;

#[derive(Debug, Error)]
pub enum LearnError {
    #[error("cannot train on empty input")]
    EmptyInput,
    #[error("rows and labels disagree: {0} vs {1}")]
    Misaligned(usize, usize),
    #[error("training labels are single-class")]
    SingleClass,
    #[error("learning rate must lie in (0,1], got {0}")]
    BadLearningRate(f64),
    #[error("stacking folds: {0}")]
    Folds(#[from] crate::corpus::CorpusError),
}

/// Uniform inference surface: probability of the positive (CG) class.
pub trait Classifier: Send + Sync {
    fn predict_proba(&self, row: &[f64]) -> f64;
}

/// Batch probability helper.
pub fn predict_proba_batch(model: &dyn Classifier, x: &DenseMatrix) -> Vec<f64> {
    (0..x.n_rows())
        .into_par_iter()
        .map(|i| model.predict_proba(x.row(i)))
        .collect()
}

/// Thresholded batch prediction at 0.5.
pub fn predict_labels(model: &dyn Classifier, x: &DenseMatrix) -> Vec<Label> {
    predict_proba_batch(model, x)
        .into_iter()
        .map(|p| if p > 0.5 { Label::Cg } else { Label::Or })
        .collect()
}

pub fn labels_to_binary(labels: &[Label]) -> Vec<u8> {
    labels.iter().map(|&l| u8::from(l == Label::Cg)).collect()
}

/// Estimator counts and shared knobs for the four base models.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BaseConfigs {
    pub extra_trees_n: usize,
    pub random_forest_n: usize,
    pub boosting_n: usize,
    pub tree: TreeParams,
    pub gb: GbParams,
    pub svm: SvmParams,
}

impl Default for BaseConfigs {
    fn default() -> Self {
        BaseConfigs {
            extra_trees_n: 500,
            random_forest_n: 400,
            boosting_n: 500,
            tree: TreeParams::default(),
            gb: GbParams::default(),
            svm: SvmParams::default(),
        }
    }
}

impl BaseConfigs {
    /// Scaled-down estimator counts for fast iteration and tests.
    pub fn desk() -> Self {
        BaseConfigs {
            extra_trees_n: 50,
            random_forest_n: 40,
            boosting_n: 50,
            ..BaseConfigs::default()
        }
    }
}

/// Names of the base models, in meta-feature column order.
pub const BASE_MODEL_NAMES: [&str; 4] = ["extra_trees", "random_forest", "boosting", "svm"];

/// The four fitted base models plus the logistic-regression meta-learner
/// trained on their out-of-fold probabilities.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StackingModel {
    pub extra_trees: ForestModel,
    pub random_forest: ForestModel,
    pub boosting: BoostedModel,
    pub svm: LinearModel,
    pub meta: LinearModel,
    pub oof_folds: usize,
}

impl StackingModel {
    pub fn base_probabilities(&self, row: &[f64]) -> [f64; 4] {
        [
            self.extra_trees.predict_proba(row),
            self.random_forest.predict_proba(row),
            self.boosting.predict_proba(row),
            self.svm.predict_proba(row),
        ]
    }
}

impl Classifier for StackingModel {
    fn predict_proba(&self, row: &[f64]) -> f64 {
        self.meta.predict_proba(&self.base_probabilities(row))
    }
}

fn fit_base_quartet(
    x: &DenseMatrix,
    y01: &[u8],
    configs: &BaseConfigs,
    seed: u64,
) -> Result<(ForestModel, ForestModel, BoostedModel, LinearModel), LearnError> {
    let gb_params = GbParams {
        n_stages: configs.boosting_n,
        seed: substream(seed, "gb", &[]),
        ..configs.gb.clone()
    };
    let svm_params = SvmParams {
        seed: substream(seed, "svm", &[]),
        ..configs.svm.clone()
    };
    // the two forests parallelize internally over trees
    let et = train_extra_trees(
        x,
        y01,
        configs.extra_trees_n,
        &configs.tree,
        substream(seed, "et", &[]),
    )?;
    let rf = train_random_forest(
        x,
        y01,
        configs.random_forest_n,
        &configs.tree,
        substream(seed, "rf", &[]),
    )?;
    let gb = train_gradient_boosting(x, y01, &gb_params)?;
    let svm = train_linear_svm(x, y01, &svm_params)?;
    Ok((et, rf, gb, svm))
}

/// Train the stacking ensemble.
///
/// Out-of-fold protocol: stratified `k` folds; each base model trains on
/// k-1 folds and predicts the held-out fold; the assembled n-by-4
/// probability matrix trains the meta-learner; finally the base models are
/// refit on all rows for inference.
pub fn train_stacking(
    x: &DenseMatrix,
    labels: &[Label],
    configs: &BaseConfigs,
    k: usize,
    seed: u64,
) -> Result<StackingModel, LearnError> {
    if x.n_rows() == 0 {
        return Err(LearnError::EmptyInput);
    }
    if x.n_rows() != labels.len() {
        return Err(LearnError::Misaligned(x.n_rows(), labels.len()));
    }
    let y01 = labels_to_binary(labels);
    let folds = stratified_kfold(labels, k, substream(seed, "stacking_folds", &[]))?;

    let mut meta_features = DenseMatrix::zeros(x.n_rows(), 4);
    for (fold_ix, (train_rows, val_rows)) in folds.iter().enumerate() {
        let x_train = x.select_rows(train_rows);
        let y_train: Vec<u8> = train_rows.iter().map(|&i| y01[i]).collect();
        let (et, rf, gb, svm) = fit_base_quartet(
            &x_train,
            &y_train,
            configs,
            substream(seed, "fold", &[fold_ix as u64]),
        )?;
        for &row in val_rows {
            let probs = [
                et.predict_proba(x.row(row)),
                rf.predict_proba(x.row(row)),
                gb.predict_proba(x.row(row)),
                svm.predict_proba(x.row(row)),
            ];
            for (j, p) in probs.iter().enumerate() {
                meta_features.set(row, j, *p);
            }
        }
    }

    let meta = train_logistic_regression(&meta_features, &y01, &LogRegParams::default())?;
    let (extra_trees, random_forest, boosting, svm) =
        fit_base_quartet(x, &y01, configs, substream(seed, "refit", &[]))?;
    Ok(StackingModel {
        extra_trees,
        random_forest,
        boosting,
        svm,
        meta,
        oof_folds: k,
    })
}
