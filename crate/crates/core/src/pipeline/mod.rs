//! Pipeline orchestration: stage sequencing, artifact emission, bundle
//! persistence, prediction, and evaluation.
//!
//! Two stage orders exist. `standard` keeps every fitted statistic inside
//! the training partition: split, then fit features / select / resample on
//! the training rows only. `paper_compat` reproduces the reported protocol,
//! which resamples the full dataset before splitting; its reports carry the
//! stage-order label so the leak is explicit.

mod bundle;
mod config;

pub use bundle::ModelBundle;
pub use config::{HhoConfig, LearnerConfig, PipelineConfig, Profile, StageOrder};

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;

use crate::corpus::{
    load_corpus, stratified_split_labels, Corpus, CorpusError, Label, SplitIndices,
};
use crate::eval::{
    evaluate_scores, roc_curve, roc_points_tsv, ConfusionMatrix, CrossValidation, EvalError,
    MetricReport,
};
use crate::features::{fit_feature_space, transform, FeatureError};
use crate::hho::{
    select_features, FeatureMask, FitnessParams, HhoParams, KnnEvaluator, SelectionError,
    SelectionResult,
};
use crate::learners::{
    train_stacking, BaseConfigs, GbParams, LearnError, SvmParams, TreeParams,
};
use crate::preprocess::{preprocess_document, CleanDocument, ResourceError, Resources};
use crate::resample::{smoteenn, ResampleError, ResampleParams, ResampledSet};
use crate::rng::substream;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Corpus(#[from] CorpusError),
    #[error("resource error: {0}")]
    Resource(#[from] ResourceError),
    #[error("feature stage: {0}")]
    Features(#[from] FeatureError),
    #[error("selection stage: {0}")]
    Selection(#[from] SelectionError),
    #[error("resampling stage: {0}")]
    Resample(#[from] ResampleError),
    #[error("training stage: {0}")]
    Learn(#[from] LearnError),
    #[error("evaluation stage: {0}")]
    Eval(#[from] EvalError),
    #[error("bundle error: {0}")]
    Bundle(String),
    #[error("io error at {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl PipelineError {
    /// Process exit code: 2 config, 3 data, 4 anything at runtime.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 2,
            PipelineError::Corpus(_) | PipelineError::Resource(_) => 3,
            _ => 4,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// How far [`run_stages`] should go.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopAfter {
    Featurize,
    Select,
    Resample,
    Train,
}

/// Everything a training run produces (fields past the requested stage stay
/// empty).
pub struct TrainOutcome {
    pub bundle: ModelBundle,
    pub split: SplitIndices,
    pub selection: SelectionResult,
    pub resample: Option<ResampledSet>,
    pub confusion: Option<ConfusionMatrix>,
    pub metrics: Option<MetricReport>,
    pub roc: Vec<(f64, f64)>,
    pub test_scores: Vec<f64>,
    pub stage_log: Vec<String>,
}

fn preprocess_all(corpus: &Corpus, config: &PipelineConfig, res: &Resources) -> Vec<CleanDocument> {
    let cfg = config.preprocess.clone().normalized();
    corpus
        .records()
        .par_iter()
        .map(|r| preprocess_document(&r.text, &cfg, res))
        .collect()
}

fn hho_params(config: &PipelineConfig, dim: usize, seed: u64) -> HhoParams {
    HhoParams {
        n_hawks: config.hho.hawks,
        n_iterations: config.hho.iterations,
        levy_beta: config.hho.levy_beta,
        bounds: vec![(-config.hho.bound, config.hho.bound); dim],
        seed,
    }
}

fn fitness_params(config: &PipelineConfig) -> FitnessParams {
    FitnessParams {
        alpha: config.hho.alpha,
        holdout_fraction: config.hho.holdout_fraction,
        max_rows: config.hho.max_rows,
        evaluator: Box::new(KnnEvaluator {
            k: config.hho.knn_k,
        }),
    }
}

fn base_configs(config: &PipelineConfig) -> BaseConfigs {
    BaseConfigs {
        extra_trees_n: config.learners.extra_trees,
        random_forest_n: config.learners.random_forest,
        boosting_n: config.learners.boosting,
        tree: TreeParams {
            max_depth: config.learners.max_depth,
            min_samples_split: config.learners.min_samples_split,
            ..TreeParams::default()
        },
        gb: GbParams {
            n_stages: config.learners.boosting,
            learning_rate: config.learners.gb_learning_rate,
            max_depth: config.learners.gb_depth,
            min_samples_split: config.learners.min_samples_split,
            seed: 0,
        },
        svm: SvmParams {
            lambda: config.learners.svm_lambda,
            epochs: config.learners.svm_epochs,
            seed: 0,
        },
    }
}

struct StageData<'a> {
    documents: Vec<CleanDocument>,
    raw_texts: Vec<&'a str>,
    labels: Vec<Label>,
}

/// Run the training pipeline on an already-loaded corpus, stopping after the
/// requested stage. Artifacts stay in memory; [`write_artifacts`] persists
/// them.
pub fn run_stages(
    corpus: &Corpus,
    config: &PipelineConfig,
    stop_after: StopAfter,
) -> Result<TrainOutcome, PipelineError> {
    config.validate()?;
    let res = Resources::from_paths(&config.resources)?;
    let mut log: Vec<String> = vec![format!(
        "corpus: {} records (OR {}, CG {})",
        corpus.len(),
        corpus.count(Label::Or),
        corpus.count(Label::Cg)
    )];

    let data = StageData {
        documents: preprocess_all(corpus, config, &res),
        raw_texts: corpus.records().iter().map(|r| r.text.as_str()).collect(),
        labels: corpus.labels(),
    };

    match config.stage_order {
        StageOrder::Standard => run_standard(config, &res, data, stop_after, &mut log),
        StageOrder::PaperCompat => run_paper_compat(config, &res, data, stop_after, &mut log),
    }
}

fn partial_outcome(
    config: &PipelineConfig,
    res: &Resources,
    space: crate::features::FeatureSpace,
    split: SplitIndices,
    selection: Option<SelectionResult>,
    resample: Option<ResampledSet>,
    log: &[String],
) -> TrainOutcome {
    let dim = space.total_dim;
    let mut bundle = ModelBundle::unfitted(config.clone(), res.clone(), space);
    let selection = match selection {
        Some(s) => {
            bundle = bundle.with_mask(s.mask.clone());
            s
        }
        None => SelectionResult {
            mask: FeatureMask::all_selected(dim),
            best_fitness: f64::NAN,
            history: Vec::new(),
        },
    };
    TrainOutcome {
        bundle,
        split,
        selection,
        resample,
        confusion: None,
        metrics: None,
        roc: Vec::new(),
        test_scores: Vec::new(),
        stage_log: log.to_vec(),
    }
}

fn run_standard(
    config: &PipelineConfig,
    res: &Resources,
    data: StageData<'_>,
    stop_after: StopAfter,
    log: &mut Vec<String>,
) -> Result<TrainOutcome, PipelineError> {
    let seed = config.seed;
    let split =
        stratified_split_labels(&data.labels, config.test_fraction, substream(seed, "split", &[]))?;
    log.push(format!(
        "split: {} train, {} test (fraction {})",
        split.train.len(),
        split.test.len(),
        config.test_fraction
    ));

    let train_docs: Vec<CleanDocument> =
        split.train.iter().map(|&i| data.documents[i].clone()).collect();
    let train_raws: Vec<&str> = split.train.iter().map(|&i| data.raw_texts[i]).collect();
    let train_labels: Vec<Label> = split.train.iter().map(|&i| data.labels[i]).collect();

    let space = fit_feature_space(&train_docs, &train_raws, &config.caps, res)?;
    let x_train = transform(&space, &train_docs, &train_raws, res)?;
    log.push(format!(
        "features: fitted on train only; {} columns (blocks {:?}), train nnz {}",
        space.total_dim,
        space.blocks.iter().map(|b| b.len()).collect::<Vec<_>>(),
        x_train.nnz()
    ));

    if stop_after == StopAfter::Featurize {
        return Ok(partial_outcome(config, res, space, split, None, None, log));
    }

    let selection = select_features(
        &x_train,
        &train_labels,
        &hho_params(config, x_train.n_cols(), substream(seed, "hho", &[])),
        &fitness_params(config),
    )?;
    log.push(format!(
        "selection: kept {} of {} columns ({:.1}% reduction), best fitness {:.6}",
        selection.mask.selected_count(),
        selection.mask.dim(),
        100.0 * selection.mask.reduction_ratio(),
        selection.best_fitness
    ));

    if stop_after == StopAfter::Select {
        return Ok(partial_outcome(config, res, space, split, Some(selection), None, log));
    }

    let x_train_selected = x_train.select_columns(selection.mask.bits()).to_dense();
    let resampled = smoteenn(
        &x_train_selected,
        &train_labels,
        &ResampleParams {
            smote_k: config.smote_k,
            enn_k: config.enn_k,
            target_ratio: config.target_ratio,
            seed: substream(seed, "resample", &[]),
        },
    )?;
    log.push(format!(
        "resample: {} rows in, {} synthetic added, {} removed, {} rows out",
        x_train_selected.n_rows(),
        resampled.synthetic_count,
        resampled.removed_count,
        resampled.x.n_rows()
    ));

    if stop_after == StopAfter::Resample {
        return Ok(partial_outcome(
            config,
            res,
            space,
            split,
            Some(selection),
            Some(resampled),
            log,
        ));
    }

    let model = train_stacking(
        &resampled.x,
        &resampled.y,
        &base_configs(config),
        config.learners.stacking_folds,
        substream(seed, "learners", &[]),
    )?;
    log.push(format!(
        "learners: stacking trained on {} rows x {} features",
        resampled.x.n_rows(),
        resampled.x.n_cols()
    ));

    let test_docs: Vec<CleanDocument> =
        split.test.iter().map(|&i| data.documents[i].clone()).collect();
    let test_raws: Vec<&str> = split.test.iter().map(|&i| data.raw_texts[i]).collect();
    let test_labels: Vec<Label> = split.test.iter().map(|&i| data.labels[i]).collect();
    let x_test = transform(&space, &test_docs, &test_raws, res)?;
    let x_test_selected = x_test.select_columns(selection.mask.bits()).to_dense();
    let scores = crate::learners::predict_proba_batch(&model, &x_test_selected);
    let (confusion, metrics) = evaluate_scores(&test_labels, &scores)?;
    let roc = roc_curve(&test_labels, &scores).unwrap_or_default();
    log.push(format!(
        "evaluate: accuracy {:.4}, f1 {:.4}, auc {}",
        metrics.accuracy,
        metrics.f1,
        metrics
            .auc
            .map(|a| format!("{a:.4}"))
            .unwrap_or_else(|| "n/a".into())
    ));

    let bundle = ModelBundle::fitted(
        config.clone(),
        res.clone(),
        space,
        selection.mask.clone(),
        model,
    );
    Ok(TrainOutcome {
        bundle,
        split,
        selection,
        resample: Some(resampled),
        confusion: Some(confusion),
        metrics: Some(metrics),
        roc,
        test_scores: scores,
        stage_log: log.clone(),
    })
}

fn run_paper_compat(
    config: &PipelineConfig,
    res: &Resources,
    data: StageData<'_>,
    stop_after: StopAfter,
    log: &mut Vec<String>,
) -> Result<TrainOutcome, PipelineError> {
    let seed = config.seed;
    log.push(
        "stage order: paper_compat (features, selection, and resampling fitted on ALL rows \
         before splitting; synthetic neighbors leak across the split by construction)"
            .to_string(),
    );

    let space = fit_feature_space(&data.documents, &data.raw_texts, &config.caps, res)?;
    let x_all = transform(&space, &data.documents, &data.raw_texts, res)?;
    log.push(format!("features: fitted on all rows; {} columns", space.total_dim));

    let empty_split = SplitIndices {
        train: Vec::new(),
        test: Vec::new(),
        seed,
    };
    if stop_after == StopAfter::Featurize {
        return Ok(partial_outcome(config, res, space, empty_split, None, None, log));
    }

    let selection = select_features(
        &x_all,
        &data.labels,
        &hho_params(config, x_all.n_cols(), substream(seed, "hho", &[])),
        &fitness_params(config),
    )?;
    log.push(format!(
        "selection: kept {} of {} columns ({:.1}% reduction)",
        selection.mask.selected_count(),
        selection.mask.dim(),
        100.0 * selection.mask.reduction_ratio()
    ));
    if stop_after == StopAfter::Select {
        return Ok(partial_outcome(config, res, space, empty_split, Some(selection), None, log));
    }

    let x_selected = x_all.select_columns(selection.mask.bits()).to_dense();
    let resampled = smoteenn(
        &x_selected,
        &data.labels,
        &ResampleParams {
            smote_k: config.smote_k,
            enn_k: config.enn_k,
            target_ratio: config.target_ratio,
            seed: substream(seed, "resample", &[]),
        },
    )?;
    log.push(format!(
        "resample: {} rows in, {} synthetic added, {} removed, {} rows out",
        x_selected.n_rows(),
        resampled.synthetic_count,
        resampled.removed_count,
        resampled.x.n_rows()
    ));

    // the reported protocol splits AFTER resampling
    let split = stratified_split_labels(
        &resampled.y,
        config.test_fraction,
        substream(seed, "split", &[]),
    )?;
    log.push(format!(
        "split (post-resample): {} train, {} test",
        split.train.len(),
        split.test.len()
    ));

    if stop_after == StopAfter::Resample {
        return Ok(partial_outcome(
            config,
            res,
            space,
            split,
            Some(selection),
            Some(resampled),
            log,
        ));
    }

    let x_train = resampled.x.select_rows(&split.train);
    let y_train: Vec<Label> = split.train.iter().map(|&i| resampled.y[i]).collect();
    let model = train_stacking(
        &x_train,
        &y_train,
        &base_configs(config),
        config.learners.stacking_folds,
        substream(seed, "learners", &[]),
    )?;
    log.push(format!(
        "learners: stacking trained on {} rows x {} features",
        x_train.n_rows(),
        x_train.n_cols()
    ));

    let x_test = resampled.x.select_rows(&split.test);
    let y_test: Vec<Label> = split.test.iter().map(|&i| resampled.y[i]).collect();
    let scores = crate::learners::predict_proba_batch(&model, &x_test);
    let (confusion, metrics) = evaluate_scores(&y_test, &scores)?;
    let roc = roc_curve(&y_test, &scores).unwrap_or_default();
    log.push(format!(
        "evaluate (paper_compat): accuracy {:.4}, f1 {:.4}",
        metrics.accuracy, metrics.f1
    ));

    let bundle = ModelBundle::fitted(
        config.clone(),
        res.clone(),
        space,
        selection.mask.clone(),
        model,
    );
    Ok(TrainOutcome {
        bundle,
        split,
        selection,
        resample: Some(resampled),
        confusion: Some(confusion),
        metrics: Some(metrics),
        roc,
        test_scores: scores,
        stage_log: log.clone(),
    })
}

/// Full training run from the configured dataset file; artifacts land in
/// `out_dir`.
pub fn run_train(config: &PipelineConfig, out_dir: &Path) -> Result<TrainOutcome, PipelineError> {
    let corpus = load_configured_corpus(config)?;
    let outcome = run_stages(&corpus, config, StopAfter::Train)?;
    write_artifacts(&outcome, &corpus, config, out_dir)?;
    Ok(outcome)
}

pub fn load_configured_corpus(config: &PipelineConfig) -> Result<Corpus, PipelineError> {
    let path = config.data_path.as_ref().ok_or_else(|| {
        PipelineError::Config("data.path is required for this command".to_string())
    })?;
    Ok(load_corpus(path, &config.schema)?)
}

/// Report header embedding the provenance of every artifact.
fn header(config: &PipelineConfig) -> String {
    format!(
        "# profile: {} | stage_order: {} | seed: {}",
        config.profile.as_str(),
        config.stage_order.as_str(),
        config.seed
    )
}

/// Persist the artifacts of a training run into `out_dir`.
pub fn write_artifacts(
    outcome: &TrainOutcome,
    corpus: &Corpus,
    config: &PipelineConfig,
    out_dir: &Path,
) -> Result<(), PipelineError> {
    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;

    let ingest_path = out_dir.join("ingestion_report.txt");
    let mut ingest = String::new();
    writeln!(ingest, "{}", header(config)).expect("write to string");
    writeln!(ingest, "{}", corpus.ingest).expect("write to string");
    writeln!(ingest, "class_or: {}", corpus.count(Label::Or)).expect("write to string");
    writeln!(ingest, "class_cg: {}", corpus.count(Label::Cg)).expect("write to string");
    std::fs::write(&ingest_path, ingest).map_err(io_err(&ingest_path))?;

    if !outcome.selection.history.is_empty() {
        let path = out_dir.join("hho_history.tsv");
        std::fs::write(&path, outcome.selection.history_tsv()).map_err(io_err(&path))?;
    }

    if let Some(resampled) = &outcome.resample {
        let path = out_dir.join("resample_report.txt");
        let text = format!("{}\n{}\n", header(config), resampled.report());
        std::fs::write(&path, text).map_err(io_err(&path))?;
    }

    if let Some(metrics) = &outcome.metrics {
        write_metric_artifacts(metrics, outcome.confusion.as_ref(), &outcome.roc, config, out_dir)?;
    }

    let stage_path = out_dir.join("train_report.txt");
    let mut report = String::new();
    writeln!(report, "{}", header(config)).expect("write to string");
    for line in &outcome.stage_log {
        writeln!(report, "{line}").expect("write to string");
    }
    std::fs::write(&stage_path, &report).map_err(io_err(&stage_path))?;

    outcome.bundle.save(&out_dir.join("bundle"), &report)?;
    Ok(())
}

pub fn write_metric_artifacts(
    metrics: &MetricReport,
    confusion: Option<&ConfusionMatrix>,
    roc: &[(f64, f64)],
    config: &PipelineConfig,
    out_dir: &Path,
) -> Result<(), PipelineError> {
    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let mut text = String::new();
    writeln!(text, "{}", header(config)).expect("write to string");
    if let Some(cm) = confusion {
        writeln!(text, "{cm}").expect("write to string");
    }
    writeln!(text, "{metrics}").expect("write to string");
    let path = out_dir.join("metrics.txt");
    std::fs::write(&path, text).map_err(io_err(&path))?;

    let json_path = out_dir.join("metrics.json");
    let json = serde_json::to_string_pretty(metrics).expect("serializable metrics");
    std::fs::write(&json_path, json).map_err(io_err(&json_path))?;

    if !roc.is_empty() {
        let roc_path = out_dir.join("roc_points.tsv");
        std::fs::write(&roc_path, roc_points_tsv(roc)).map_err(io_err(&roc_path))?;
    }
    Ok(())
}

/// Per-row prediction output.
#[derive(Debug, Clone)]
pub struct Prediction {
    pub cg_probability: f64,
    pub label: Label,
}

/// Score raw review texts with a loaded bundle.
pub fn predict_texts(
    bundle: &ModelBundle,
    texts: &[String],
) -> Result<Vec<Prediction>, PipelineError> {
    let model = bundle
        .model
        .as_ref()
        .ok_or_else(|| PipelineError::Bundle("bundle has no trained model".to_string()))?;
    let cfg = bundle.config.preprocess.clone().normalized();
    let docs: Vec<CleanDocument> = texts
        .par_iter()
        .map(|t| preprocess_document(t, &cfg, &bundle.resources))
        .collect();
    let raws: Vec<&str> = texts.iter().map(String::as_str).collect();
    let x = transform(&bundle.space, &docs, &raws, &bundle.resources)?;
    let x_selected = x.select_columns(bundle.mask.bits()).to_dense();
    let scores = crate::learners::predict_proba_batch(model, &x_selected);
    Ok(scores
        .into_iter()
        .map(|p| Prediction {
            cg_probability: p,
            label: if p > 0.5 { Label::Cg } else { Label::Or },
        })
        .collect())
}

/// Confusion counts, metric report, and ROC points of one evaluation.
pub type EvalOutput = (ConfusionMatrix, MetricReport, Vec<(f64, f64)>);

/// Evaluate a loaded bundle against a labeled corpus.
pub fn run_eval(bundle: &ModelBundle, corpus: &Corpus) -> Result<EvalOutput, PipelineError> {
    let texts: Vec<String> = corpus.records().iter().map(|r| r.text.clone()).collect();
    let predictions = predict_texts(bundle, &texts)?;
    let scores: Vec<f64> = predictions.iter().map(|p| p.cg_probability).collect();
    let labels = corpus.labels();
    let (cm, metrics) = evaluate_scores(&labels, &scores)?;
    let roc = roc_curve(&labels, &scores).unwrap_or_default();
    Ok((cm, metrics, roc))
}

/// Cross-validate the full pipeline: feature fitting, selection, resampling,
/// and training all run inside each fold.
pub fn cross_validate_pipeline(
    corpus: &Corpus,
    config: &PipelineConfig,
    k: usize,
) -> Result<CrossValidation, PipelineError> {
    config.validate()?;
    let res = Resources::from_paths(&config.resources)?;
    let documents = preprocess_all(corpus, config, &res);
    let raw_texts: Vec<&str> = corpus.records().iter().map(|r| r.text.as_str()).collect();
    let labels = corpus.labels();

    let mut failure: Option<PipelineError> = None;
    let cv = crate::eval::cross_validate(&labels, k, config.seed, |train, val, fold_seed| {
        if failure.is_some() {
            return vec![0.5; val.len()];
        }
        let fold = (|| -> Result<Vec<f64>, PipelineError> {
            let train_docs: Vec<CleanDocument> =
                train.iter().map(|&i| documents[i].clone()).collect();
            let train_raws: Vec<&str> = train.iter().map(|&i| raw_texts[i]).collect();
            let train_labels: Vec<Label> = train.iter().map(|&i| labels[i]).collect();
            let space = fit_feature_space(&train_docs, &train_raws, &config.caps, &res)?;
            let x_train = transform(&space, &train_docs, &train_raws, &res)?;
            let selection = select_features(
                &x_train,
                &train_labels,
                &hho_params(config, x_train.n_cols(), substream(fold_seed, "hho", &[])),
                &fitness_params(config),
            )?;
            let x_selected = x_train.select_columns(selection.mask.bits()).to_dense();
            let resampled = smoteenn(
                &x_selected,
                &train_labels,
                &ResampleParams {
                    smote_k: config.smote_k,
                    enn_k: config.enn_k,
                    target_ratio: config.target_ratio,
                    seed: substream(fold_seed, "resample", &[]),
                },
            )?;
            let model = train_stacking(
                &resampled.x,
                &resampled.y,
                &base_configs(config),
                config.learners.stacking_folds,
                substream(fold_seed, "learners", &[]),
            )?;
            let val_docs: Vec<CleanDocument> = val.iter().map(|&i| documents[i].clone()).collect();
            let val_raws: Vec<&str> = val.iter().map(|&i| raw_texts[i]).collect();
            let x_val = transform(&space, &val_docs, &val_raws, &res)?;
            let x_val_selected = x_val.select_columns(selection.mask.bits()).to_dense();
            Ok(crate::learners::predict_proba_batch(&model, &x_val_selected))
        })();
        match fold {
            Ok(scores) => scores,
            Err(e) => {
                failure = Some(e);
                vec![0.5; val.len()]
            }
        }
    })?;
    match failure {
        Some(e) => Err(e),
        None => Ok(cv),
    }
}

/// Canonical bytes of every fitted statistic (feature space, mask, models),
/// for leakage and determinism checks.
pub fn fitted_state_bytes(outcome: &TrainOutcome) -> Vec<u8> {
    outcome.bundle.fitted_state_bytes()
}
