//! Metrics, confusion matrix, rank-based ROC/AUC, and the cross-validation
//! harness. CG is the positive class throughout.

use std::fmt;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{stratified_kfold, CorpusError, Label};
use crate::rng::substream;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("length mismatch: {0} truths vs {1} predictions")]
    LengthMismatch(usize, usize),
    #[error("empty evaluation input")]
    Empty,
    #[error("AUC needs both classes present")]
    SingleClass,
    #[error(transparent)]
    Folds(#[from] CorpusError),
}

/// Binary confusion counts with CG as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }
}

impl fmt::Display for ConfusionMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "              predicted_CG  predicted_OR")?;
        writeln!(f, "actual_CG     {:>12}  {:>12}", self.tp, self.fn_)?;
        write!(f, "actual_OR     {:>12}  {:>12}", self.fp, self.tn)
    }
}

/// Headline metrics in [0,1]. `degenerate` flags any zero-denominator metric
/// that was defined to 0 by convention.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub auc: Option<f64>,
    pub degenerate: bool,
}

impl fmt::Display for MetricReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "accuracy: {:.4}", self.accuracy)?;
        writeln!(f, "precision: {:.4}", self.precision)?;
        writeln!(f, "recall: {:.4}", self.recall)?;
        writeln!(f, "f1: {:.4}", self.f1)?;
        match self.auc {
            Some(auc) => write!(f, "auc: {auc:.4}")?,
            None => write!(f, "auc: n/a")?,
        }
        if self.degenerate {
            write!(f, "\ndegenerate: true")?;
        }
        Ok(())
    }
}

/// Count the confusion matrix of predictions against truths.
pub fn confusion(y_true: &[Label], y_pred: &[Label]) -> Result<ConfusionMatrix, EvalError> {
    if y_true.len() != y_pred.len() {
        return Err(EvalError::LengthMismatch(y_true.len(), y_pred.len()));
    }
    let mut cm = ConfusionMatrix {
        tp: 0,
        tn: 0,
        fp: 0,
        fn_: 0,
    };
    for (&t, &p) in y_true.iter().zip(y_pred) {
        match (t, p) {
            (Label::Cg, Label::Cg) => cm.tp += 1,
            (Label::Or, Label::Or) => cm.tn += 1,
            (Label::Or, Label::Cg) => cm.fp += 1,
            (Label::Cg, Label::Or) => cm.fn_ += 1,
        }
    }
    Ok(cm)
}

/// Accuracy, precision, recall, F1 from counts. Zero denominators yield 0
/// with the degenerate flag set.
pub fn metrics(cm: &ConfusionMatrix) -> Result<MetricReport, EvalError> {
    let total = cm.total();
    if total == 0 {
        return Err(EvalError::Empty);
    }
    let mut degenerate = false;
    let mut safe_div = |num: usize, den: usize| {
        if den == 0 {
            degenerate = true;
            0.0
        } else {
            num as f64 / den as f64
        }
    };
    let accuracy = (cm.tp + cm.tn) as f64 / total as f64;
    let precision = safe_div(cm.tp, cm.tp + cm.fp);
    let recall = safe_div(cm.tp, cm.tp + cm.fn_);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        degenerate = true;
        0.0
    };
    Ok(MetricReport {
        accuracy,
        precision,
        recall,
        f1,
        auc: None,
        degenerate,
    })
}

/// Rank-statistic AUC with midrank tie handling:
/// `P(score_CG > score_OR) + 0.5 * P(tie)`.
pub fn roc_auc(y_true: &[Label], scores: &[f64]) -> Result<f64, EvalError> {
    if y_true.len() != scores.len() {
        return Err(EvalError::LengthMismatch(y_true.len(), scores.len()));
    }
    let n = y_true.len();
    let n_pos = y_true.iter().filter(|&&l| l == Label::Cg).count();
    let n_neg = n - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(EvalError::SingleClass);
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));

    // midranks over tie groups
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j < n && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        let midrank = (i + 1 + j) as f64 / 2.0; // average of ranks i+1..=j
        for &ix in &order[i..j] {
            if y_true[ix] == Label::Cg {
                rank_sum_pos += midrank;
            }
        }
        i = j;
    }
    let auc =
        (rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0) / (n_pos as f64 * n_neg as f64);
    Ok(auc)
}

/// ROC staircase from (0,0) to (1,1); tie groups advance both rates at once.
pub fn roc_curve(y_true: &[Label], scores: &[f64]) -> Result<Vec<(f64, f64)>, EvalError> {
    if y_true.len() != scores.len() {
        return Err(EvalError::LengthMismatch(y_true.len(), scores.len()));
    }
    let n = y_true.len();
    let n_pos = y_true.iter().filter(|&&l| l == Label::Cg).count();
    let n_neg = n - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(EvalError::SingleClass);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));

    let mut points = vec![(0.0, 0.0)];
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j < n && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        for &ix in &order[i..j] {
            if y_true[ix] == Label::Cg {
                tp += 1;
            } else {
                fp += 1;
            }
        }
        points.push((fp as f64 / n_neg as f64, tp as f64 / n_pos as f64));
        i = j;
    }
    Ok(points)
}

/// Trapezoidal area under a curve of (x, y) points.
pub fn trapezoid_area(points: &[(f64, f64)]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0)
        .sum()
}

/// Two-column delimited export of ROC points.
pub fn roc_points_tsv(points: &[(f64, f64)]) -> String {
    let mut out = String::from("fpr\ttpr\n");
    for (fpr, tpr) in points {
        writeln!(out, "{fpr}\t{tpr}").expect("write to string");
    }
    out
}

/// Combined per-split evaluation: confusion, metrics, AUC.
pub fn evaluate_scores(
    y_true: &[Label],
    scores: &[f64],
) -> Result<(ConfusionMatrix, MetricReport), EvalError> {
    let predictions: Vec<Label> = scores
        .iter()
        .map(|&p| if p > 0.5 { Label::Cg } else { Label::Or })
        .collect();
    let cm = confusion(y_true, &predictions)?;
    let mut report = metrics(&cm)?;
    report.auc = roc_auc(y_true, scores).ok();
    Ok((cm, report))
}

/// Per-fold reports plus mean and population standard deviation of each
/// metric.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CrossValidation {
    pub folds: Vec<MetricReport>,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    pub mean_f1: f64,
    pub std_f1: f64,
}

impl fmt::Display for CrossValidation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (ix, fold) in self.folds.iter().enumerate() {
            writeln!(
                f,
                "fold {}: accuracy {:.4} f1 {:.4}",
                ix + 1,
                fold.accuracy,
                fold.f1
            )?;
        }
        write!(
            f,
            "mean accuracy {:.4} (+/- {:.4}), mean f1 {:.4} (+/- {:.4})",
            self.mean_accuracy, self.std_accuracy, self.mean_f1, self.std_f1
        )
    }
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len().max(1) as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Run stratified k-fold cross-validation over an arbitrary fold runner.
///
/// The runner receives (train indices, validation indices, fold seed) and
/// returns CG scores for the validation rows; the full pipeline (feature
/// fitting, selection, resampling, training) belongs inside it so nothing
/// fitted leaks across folds.
pub fn cross_validate<F>(
    labels: &[Label],
    k: usize,
    seed: u64,
    mut run_fold: F,
) -> Result<CrossValidation, EvalError>
where
    F: FnMut(&[usize], &[usize], u64) -> Vec<f64>,
{
    let folds = stratified_kfold(labels, k, substream(seed, "cv_folds", &[]))?;
    let mut reports = Vec::with_capacity(k);
    for (fold_ix, (train, val)) in folds.iter().enumerate() {
        let scores = run_fold(train, val, substream(seed, "cv_fold_seed", &[fold_ix as u64]));
        let y_val: Vec<Label> = val.iter().map(|&i| labels[i]).collect();
        let (_, report) = evaluate_scores(&y_val, &scores)?;
        reports.push(report);
    }
    let accs: Vec<f64> = reports.iter().map(|r| r.accuracy).collect();
    let f1s: Vec<f64> = reports.iter().map(|r| r.f1).collect();
    let (mean_accuracy, std_accuracy) = mean_std(&accs);
    let (mean_f1, std_f1) = mean_std(&f1s);
    Ok(CrossValidation {
        folds: reports,
        mean_accuracy,
        std_accuracy,
        mean_f1,
        std_f1,
    })
}
