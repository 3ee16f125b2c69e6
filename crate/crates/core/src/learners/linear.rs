//! Linear models: an L2-regularized hinge-loss classifier trained by
//! epoch-shuffled subgradient descent with sigmoid (Platt) calibration, and
//! the L2-regularized logistic regression used both standalone and as the
//! stacking meta-learner.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::features::DenseMatrix;
use crate::rng::stream_rng;

use super::boost::sigmoid;
use super::{Classifier, LearnError};

/// Weights plus optional probability calibration `p = sigmoid(a*d + b)` over
/// the raw decision value `d`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub calibrator: Option<(f64, f64)>,
}

impl LinearModel {
    pub fn decision(&self, row: &[f64]) -> f64 {
        dot(&self.weights, row) + self.bias
    }
}

impl Classifier for LinearModel {
    fn predict_proba(&self, row: &[f64]) -> f64 {
        let d = self.decision(row);
        match self.calibrator {
            Some((a, b)) => sigmoid(a * d + b),
            None => sigmoid(d),
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LogRegParams {
    pub l2: f64,
    pub iterations: usize,
}

impl Default for LogRegParams {
    fn default() -> Self {
        LogRegParams {
            l2: 1e-4,
            iterations: 2_000,
        }
    }
}

/// Mean logistic loss gradient with L2 penalty `l2/2 * ||w||^2` (bias not
/// penalized). Returns (loss, weight gradient, bias gradient).
pub fn logistic_loss_gradient(
    x: &DenseMatrix,
    y: &[u8],
    weights: &[f64],
    bias: f64,
    l2: f64,
) -> (f64, Vec<f64>, f64) {
    let n = x.n_rows().max(1) as f64;
    let mut grad_w = vec![0.0; weights.len()];
    let mut grad_b = 0.0;
    let mut loss = 0.0;
    for (i, &yi) in y.iter().enumerate().take(x.n_rows()) {
        let row = x.row(i);
        let z = dot(weights, row) + bias;
        let margin = if yi == 1 { z } else { -z };
        loss += (-margin).exp().ln_1p();
        let err = sigmoid(z) - f64::from(yi);
        for (g, v) in grad_w.iter_mut().zip(row) {
            *g += err * v;
        }
        grad_b += err;
    }
    loss /= n;
    loss += 0.5 * l2 * weights.iter().map(|w| w * w).sum::<f64>();
    for (g, w) in grad_w.iter_mut().zip(weights) {
        *g = *g / n + l2 * w;
    }
    (loss, grad_w, grad_b / n)
}

/// Full-batch gradient descent with the safe step `1/L`,
/// `L = max_row_norm2/4 + l2`, which decreases the loss monotonically.
pub fn train_logistic_regression(
    x: &DenseMatrix,
    y: &[u8],
    params: &LogRegParams,
) -> Result<LinearModel, LearnError> {
    if x.n_rows() == 0 {
        return Err(LearnError::EmptyInput);
    }
    if x.n_rows() != y.len() {
        return Err(LearnError::Misaligned(x.n_rows(), y.len()));
    }
    let max_norm2 = (0..x.n_rows())
        .map(|i| dot(x.row(i), x.row(i)))
        .fold(0.0f64, f64::max);
    let step = 1.0 / (0.25 * max_norm2 + params.l2 + 0.25);
    let mut weights = vec![0.0; x.n_cols()];
    let mut bias = 0.0;
    for _ in 0..params.iterations {
        let (_, grad_w, grad_b) = logistic_loss_gradient(x, y, &weights, bias, params.l2);
        for (w, g) in weights.iter_mut().zip(&grad_w) {
            *w -= step * g;
        }
        bias -= step * grad_b;
    }
    Ok(LinearModel {
        weights,
        bias,
        calibrator: None,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SvmParams {
    pub lambda: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            lambda: 1e-4,
            epochs: 10,
            seed: 0,
        }
    }
}

/// Mean hinge loss (no regularization term), for diagnostics and tests.
pub fn hinge_loss(x: &DenseMatrix, y: &[u8], model: &LinearModel) -> f64 {
    let n = x.n_rows().max(1) as f64;
    (0..x.n_rows())
        .map(|i| {
            let t = if y[i] == 1 { 1.0 } else { -1.0 };
            (1.0 - t * model.decision(x.row(i))).max(0.0)
        })
        .sum::<f64>()
        / n
}

/// Pegasos-style subgradient descent on the hinge loss, then Platt
/// calibration fitted on a stratified held-out fifth of the rows (the SVM
/// itself never trains on the calibration rows). Degenerate inputs that
/// cannot support calibration fall back to an uncalibrated sigmoid.
pub fn train_linear_svm(
    x: &DenseMatrix,
    y: &[u8],
    params: &SvmParams,
) -> Result<LinearModel, LearnError> {
    let n = x.n_rows();
    if n == 0 {
        return Err(LearnError::EmptyInput);
    }
    if n != y.len() {
        return Err(LearnError::Misaligned(n, y.len()));
    }
    let pos = y.iter().filter(|&&v| v == 1).count();
    if pos == 0 || pos == n {
        return Err(LearnError::SingleClass);
    }

    // stratified fifth held out for calibration
    let mut by_class: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (i, &label) in y.iter().enumerate() {
        by_class[usize::from(label == 1)].push(i);
    }
    let mut calibration = Vec::new();
    let mut training = Vec::new();
    for (class_ix, members) in by_class.iter().enumerate() {
        let mut members = members.clone();
        let mut rng = stream_rng(params.seed, "svm_calibration", &[class_ix as u64]);
        members.shuffle(&mut rng);
        let n_cal = members.len() / 5;
        calibration.extend_from_slice(&members[..n_cal]);
        training.extend_from_slice(&members[n_cal..]);
    }
    training.sort_unstable();
    calibration.sort_unstable();
    let calibratable = calibration.iter().any(|&i| y[i] == 1)
        && calibration.iter().any(|&i| y[i] == 0)
        && calibration.len() >= 4;
    if !calibratable {
        // too small to hold anything out: train on everything, no calibrator
        training = (0..n).collect();
    }

    let mut weights = vec![0.0; x.n_cols()];
    let mut bias = 0.0;
    let mut t = 0u64;
    for epoch in 0..params.epochs {
        let mut order = training.clone();
        let mut rng = stream_rng(params.seed, "svm_epoch", &[epoch as u64]);
        order.shuffle(&mut rng);
        for &i in &order {
            t += 1;
            let eta = 1.0 / (params.lambda * t as f64);
            let target = if y[i] == 1 { 1.0 } else { -1.0 };
            let margin = target * (dot(&weights, x.row(i)) + bias);
            let shrink = 1.0 - eta * params.lambda;
            for w in weights.iter_mut() {
                *w *= shrink;
            }
            if margin < 1.0 {
                for (w, v) in weights.iter_mut().zip(x.row(i)) {
                    *w += eta * target * v;
                }
                bias += eta * target;
            }
        }
    }
    let mut model = LinearModel {
        weights,
        bias,
        calibrator: None,
    };

    if calibratable {
        let decisions: Vec<Vec<f64>> = calibration
            .iter()
            .map(|&i| vec![model.decision(x.row(i))])
            .collect();
        let cal_y: Vec<u8> = calibration.iter().map(|&i| y[i]).collect();
        let cal_x = DenseMatrix::from_rows(decisions);
        let platt = train_logistic_regression(
            &cal_x,
            &cal_y,
            &LogRegParams {
                l2: 1e-6,
                iterations: 5_000,
            },
        )?;
        model.calibrator = Some((platt.weights[0], platt.bias));
    }
    Ok(model)
}
