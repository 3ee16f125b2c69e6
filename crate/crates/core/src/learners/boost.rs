//! Gradient boosting with logistic loss: each stage fits a regression tree
//! to the residual `y - sigmoid(F)` and the ensemble accumulates
//! `F += learning_rate * stage`.
//!
//! Regression trees grow breadth-first over feature orders presorted once
//! per fit, so a stage costs O(features * rows) per depth level.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::features::DenseMatrix;

use super::{Classifier, LearnError};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GbParams {
    pub n_stages: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_samples_split: usize,
    /// reserved for row subsampling; the shipped configuration trains on the
    /// full sample every stage
    pub seed: u64,
}

impl Default for GbParams {
    fn default() -> Self {
        GbParams {
            n_stages: 500,
            learning_rate: 0.1,
            max_depth: 6,
            min_samples_split: 2,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
enum RegNode {
    Split {
        feature: u32,
        threshold: f64,
        left: u32,
        right: u32,
    },
    Leaf { value: f64 },
}

/// Regression tree over squared error; leaves hold the mean target of their
/// rows.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegressionTree {
    nodes: Vec<RegNode>,
}

impl RegressionTree {
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut at = 0usize;
        loop {
            match &self.nodes[at] {
                RegNode::Leaf { value } => return *value,
                RegNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if row[*feature as usize] <= *threshold {
                        *left as usize
                    } else {
                        *right as usize
                    };
                }
            }
        }
    }
}

/// Sort row indices by value for every feature; shared by all stages of one
/// fit since feature values never change.
pub fn presort_features(x: &DenseMatrix) -> Vec<Vec<u32>> {
    (0..x.n_cols())
        .into_par_iter()
        .map(|j| {
            let mut order: Vec<u32> = (0..x.n_rows() as u32).collect();
            order.sort_by(|&a, &b| {
                x.get(a as usize, j)
                    .total_cmp(&x.get(b as usize, j))
                    .then(a.cmp(&b))
            });
            order
        })
        .collect()
}

const NO_NODE: u32 = u32::MAX;

struct CandidateSplit {
    score: f64,
    feature: u32,
    threshold: f64,
}

/// Best SSE split of one node from its value-sorted (value, target) stream.
/// `parent_score` is `-(sum^2/n)`; a split must beat it strictly.
fn scan_sorted_stream(stream: &[(f64, f64)], parent_score: f64) -> Option<(f64, f64)> {
    let n = stream.len();
    if n < 2 {
        return None;
    }
    let total: f64 = stream.iter().map(|(_, t)| t).sum();
    let mut best: Option<(f64, f64)> = None;
    let mut left_sum = 0.0;
    for i in 1..n {
        left_sum += stream[i - 1].1;
        if stream[i].0 <= stream[i - 1].0 {
            continue;
        }
        let right_sum = total - left_sum;
        let nl = i as f64;
        let nr = (n - i) as f64;
        let score = -(left_sum * left_sum / nl + right_sum * right_sum / nr);
        if score < parent_score - 1e-12 && best.is_none_or(|(s, _)| score < s) {
            best = Some((score, (stream[i - 1].0 + stream[i].0) / 2.0));
        }
    }
    best
}

/// Fit one regression tree breadth-first.
pub fn fit_regression_tree(
    x: &DenseMatrix,
    targets: &[f64],
    presorted: &[Vec<u32>],
    max_depth: usize,
    min_samples_split: usize,
) -> RegressionTree {
    let n = x.n_rows();
    let mut nodes: Vec<RegNode> = Vec::new();
    // node each row currently sits in; NO_NODE once the row reached a leaf
    let mut assign: Vec<u32> = vec![0; n];

    let root_mean = targets.iter().sum::<f64>() / n.max(1) as f64;
    nodes.push(RegNode::Leaf { value: root_mean });
    // active node ids at the current level
    let mut active: Vec<u32> = vec![0];

    for _depth in 0..max_depth {
        if active.is_empty() {
            break;
        }
        // dense node-id -> slot map for this level
        let max_id = *active.iter().max().unwrap() as usize;
        let mut slot_of = vec![NO_NODE; max_id + 1];
        for (slot, &id) in active.iter().enumerate() {
            slot_of[id as usize] = slot as u32;
        }
        let mut counts = vec![0usize; active.len()];
        let mut sums = vec![0.0f64; active.len()];
        for (r, &node) in assign.iter().enumerate() {
            if node != NO_NODE {
                if let Some(&slot) = slot_of.get(node as usize) {
                    if slot != NO_NODE {
                        let s = slot as usize;
                        counts[s] += 1;
                        sums[s] += targets[r];
                    }
                }
            }
        }
        let parent_scores: Vec<f64> = counts
            .iter()
            .zip(&sums)
            .map(|(&c, &s)| if c > 0 { -(s * s) / c as f64 } else { 0.0 })
            .collect();

        // per feature, the best split found for each active slot
        let per_feature: Vec<Vec<Option<CandidateSplit>>> = (0..x.n_cols())
            .into_par_iter()
            .map(|feature| {
                let mut streams: Vec<Vec<(f64, f64)>> =
                    counts.iter().map(|&c| Vec::with_capacity(c)).collect();
                for &r in &presorted[feature] {
                    let node = assign[r as usize];
                    if node == NO_NODE {
                        continue;
                    }
                    if let Some(&slot) = slot_of.get(node as usize) {
                        if slot != NO_NODE {
                            streams[slot as usize]
                                .push((x.get(r as usize, feature), targets[r as usize]));
                        }
                    }
                }
                streams
                    .iter()
                    .enumerate()
                    .map(|(slot, stream)| {
                        if stream.len() < min_samples_split.max(2) {
                            return None;
                        }
                        scan_sorted_stream(stream, parent_scores[slot]).map(
                            |(score, threshold)| CandidateSplit {
                                score,
                                feature: feature as u32,
                                threshold,
                            },
                        )
                    })
                    .collect()
            })
            .collect();

        // reduce across features: lowest score, ties to the lowest feature
        let mut chosen: Vec<Option<CandidateSplit>> = (0..active.len()).map(|_| None).collect();
        for feature_bests in per_feature {
            for (slot, candidate) in feature_bests.into_iter().enumerate() {
                if let Some(c) = candidate {
                    if chosen[slot].as_ref().is_none_or(|cur| c.score < cur.score) {
                        chosen[slot] = Some(c);
                    }
                }
            }
        }

        // materialize splits, build next level
        let mut split_info: Vec<Option<(u32, f64, u32, u32)>> = vec![None; active.len()];
        let mut next_active = Vec::new();
        for (slot, &node_id) in active.iter().enumerate() {
            match &chosen[slot] {
                Some(c) => {
                    let left = nodes.len() as u32;
                    let right = left + 1;
                    nodes.push(RegNode::Leaf { value: 0.0 });
                    nodes.push(RegNode::Leaf { value: 0.0 });
                    nodes[node_id as usize] = RegNode::Split {
                        feature: c.feature,
                        threshold: c.threshold,
                        left,
                        right,
                    };
                    split_info[slot] = Some((c.feature, c.threshold, left, right));
                    next_active.push(left);
                    next_active.push(right);
                }
                None => {
                    // finalize leaf with the mean target
                    let value = if counts[slot] > 0 {
                        sums[slot] / counts[slot] as f64
                    } else {
                        0.0
                    };
                    nodes[node_id as usize] = RegNode::Leaf { value };
                }
            }
        }

        for (r, slot_ref) in assign.iter_mut().enumerate() {
            let node = *slot_ref;
            if node == NO_NODE {
                continue;
            }
            match slot_of.get(node as usize).copied() {
                Some(slot) if slot != NO_NODE => match split_info[slot as usize] {
                    Some((feature, threshold, left, right)) => {
                        *slot_ref = if x.get(r, feature as usize) <= threshold {
                            left
                        } else {
                            right
                        };
                    }
                    None => *slot_ref = NO_NODE,
                },
                _ => {}
            }
        }
        active = next_active;
    }

    // depth limit reached: finalize any still-active nodes as mean leaves
    if !active.is_empty() {
        let max_id = *active.iter().max().unwrap() as usize;
        let mut slot_of = vec![NO_NODE; max_id + 1];
        for (slot, &id) in active.iter().enumerate() {
            slot_of[id as usize] = slot as u32;
        }
        let mut counts = vec![0usize; active.len()];
        let mut sums = vec![0.0f64; active.len()];
        for (r, &node) in assign.iter().enumerate() {
            if node != NO_NODE {
                if let Some(&slot) = slot_of.get(node as usize) {
                    if slot != NO_NODE {
                        counts[slot as usize] += 1;
                        sums[slot as usize] += targets[r];
                    }
                }
            }
        }
        for (slot, &id) in active.iter().enumerate() {
            let value = if counts[slot] > 0 {
                sums[slot] / counts[slot] as f64
            } else {
                0.0
            };
            nodes[id as usize] = RegNode::Leaf { value };
        }
    }

    RegressionTree { nodes }
}

/// The boosted ensemble.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoostedModel {
    pub initial_logit: f64,
    pub learning_rate: f64,
    pub stages: Vec<RegressionTree>,
}

impl BoostedModel {
    pub fn decision(&self, row: &[f64]) -> f64 {
        self.initial_logit
            + self.learning_rate * self.stages.iter().map(|s| s.predict(row)).sum::<f64>()
    }
}

impl Classifier for BoostedModel {
    fn predict_proba(&self, row: &[f64]) -> f64 {
        sigmoid(self.decision(row))
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Mean logistic loss of raw scores `f` against 0/1 labels.
pub fn log_loss(scores: &[f64], y: &[u8]) -> f64 {
    let total: f64 = scores
        .iter()
        .zip(y)
        .map(|(&f, &yi)| {
            // numerically stable: ln(1+e^-|f|) + max(0, sign-dependent part)
            let margin = if yi == 1 { f } else { -f };
            (-margin).exp().ln_1p()
        })
        .sum();
    total / y.len().max(1) as f64
}

/// Train the boosted classifier.
pub fn train_gradient_boosting(
    x: &DenseMatrix,
    y: &[u8],
    params: &GbParams,
) -> Result<BoostedModel, LearnError> {
    let n = x.n_rows();
    if n == 0 {
        return Err(LearnError::EmptyInput);
    }
    if y.len() != n {
        return Err(LearnError::Misaligned(n, y.len()));
    }
    let pos = y.iter().filter(|&&v| v == 1).count();
    if pos == 0 || pos == n {
        return Err(LearnError::SingleClass);
    }
    if !(params.learning_rate > 0.0 && params.learning_rate <= 1.0) {
        return Err(LearnError::BadLearningRate(params.learning_rate));
    }

    let p_bar = pos as f64 / n as f64;
    let initial_logit = (p_bar / (1.0 - p_bar)).ln();
    let presorted = presort_features(x);

    let mut scores = vec![initial_logit; n];
    let mut stages = Vec::with_capacity(params.n_stages);
    for _ in 0..params.n_stages {
        let residuals: Vec<f64> = scores
            .iter()
            .zip(y)
            .map(|(&f, &yi)| f64::from(yi) - sigmoid(f))
            .collect();
        let tree = fit_regression_tree(
            x,
            &residuals,
            &presorted,
            params.max_depth,
            params.min_samples_split,
        );
        let updates: Vec<f64> = (0..n).into_par_iter().map(|i| tree.predict(x.row(i))).collect();
        for (s, u) in scores.iter_mut().zip(&updates) {
            *s += params.learning_rate * u;
        }
        stages.push(tree);
    }

    Ok(BoostedModel {
        initial_logit,
        learning_rate: params.learning_rate,
        stages,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use rand::Rng;

    #[test]
    fn balanced_labels_start_at_zero_logit() {
        let x = DenseMatrix::from_rows(vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]]);
        let y = vec![0, 1, 0, 1];
        let model = train_gradient_boosting(
            &x,
            &y,
            &GbParams {
                n_stages: 1,
                ..GbParams::default()
            },
        )
        .unwrap();
        assert_eq!(model.initial_logit, 0.0);
    }

    #[test]
    fn single_class_rejected() {
        let x = DenseMatrix::from_rows(vec![vec![0.0], vec![1.0]]);
        assert!(matches!(
            train_gradient_boosting(&x, &[1, 1], &GbParams::default()),
            Err(LearnError::SingleClass)
        ));
    }

    #[test]
    fn single_leaf_stage_gives_mean_residual() {
        // a depth-0 stage is the mean residual; from the optimal initial
        // logit that mean is zero, so predictions sit at the base rate
        let x = DenseMatrix::from_rows(vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]]);
        let y = vec![1, 1, 1, 0];
        let params = GbParams {
            n_stages: 1,
            learning_rate: 1.0,
            max_depth: 0,
            ..GbParams::default()
        };
        let model = train_gradient_boosting(&x, &y, &params).unwrap();
        for i in 0..4 {
            assert!((model.predict_proba(x.row(i)) - 0.75).abs() < 1e-12);
        }
        // the regression tree itself stores the mean of its targets
        let presorted = presort_features(&x);
        let targets = [0.5, -0.25, 0.75, -0.5];
        let tree = fit_regression_tree(&x, &targets, &presorted, 0, 2);
        let mean = targets.iter().sum::<f64>() / 4.0;
        assert!((tree.predict(&[9.0]) - mean).abs() < 1e-12);
    }

    #[test]
    fn regression_tree_splits_obvious_step() {
        let x = DenseMatrix::from_rows(vec![vec![0.0], vec![1.0], vec![10.0], vec![11.0]]);
        let targets = [0.0, 0.0, 1.0, 1.0];
        let presorted = presort_features(&x);
        let tree = fit_regression_tree(&x, &targets, &presorted, 3, 2);
        assert!((tree.predict(&[0.5]) - 0.0).abs() < 1e-12);
        assert!((tree.predict(&[10.5]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn training_loss_monotone_non_increasing() {
        let mut rng = stream_rng(17, "gb_loss", &[]);
        let n = 120;
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..6).map(|_| rng.gen_range(-2.0..2.0)).collect())
            .collect();
        let y: Vec<u8> = rows
            .iter()
            .map(|r| u8::from(r[0] + 0.5 * r[1] - 0.2 * r[2] + rng.gen_range(-0.5..0.5) > 0.0))
            .collect();
        let x = DenseMatrix::from_rows(rows);
        let params = GbParams {
            n_stages: 40,
            max_depth: 3,
            ..GbParams::default()
        };
        let model = train_gradient_boosting(&x, &y, &params).unwrap();

        let mut scores = vec![model.initial_logit; n];
        let mut last = log_loss(&scores, &y);
        for stage in &model.stages {
            for (i, s) in scores.iter_mut().enumerate() {
                *s += model.learning_rate * stage.predict(x.row(i));
            }
            let loss = log_loss(&scores, &y);
            assert!(
                loss <= last + 1e-12,
                "stage increased training loss: {loss} > {last}"
            );
            last = loss;
        }
    }

    #[test]
    fn boosting_fits_nonlinear_signal() {
        let mut rng = stream_rng(23, "gb_fit", &[]);
        let n = 200;
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])
            .collect();
        let y: Vec<u8> = rows.iter().map(|r| u8::from(r[0] * r[1] > 0.0)).collect();
        let x = DenseMatrix::from_rows(rows);
        let params = GbParams {
            n_stages: 60,
            max_depth: 3,
            ..GbParams::default()
        };
        let model = train_gradient_boosting(&x, &y, &params).unwrap();
        let correct: usize = (0..n)
            .filter(|&i| u8::from(model.predict_proba(x.row(i)) > 0.5) == y[i])
            .count();
        assert!(correct as f64 / n as f64 > 0.9, "xor-like signal learned");
    }

    #[test]
    fn deterministic() {
        let x = DenseMatrix::from_rows(
            (0..30).map(|i| vec![(i % 7) as f64, (i % 3) as f64]).collect(),
        );
        let y: Vec<u8> = (0..30).map(|i| u8::from(i % 2 == 0)).collect();
        let p = GbParams {
            n_stages: 10,
            ..GbParams::default()
        };
        let a = train_gradient_boosting(&x, &y, &p).unwrap();
        let b = train_gradient_boosting(&x, &y, &p).unwrap();
        for i in 0..30 {
            assert_eq!(a.predict_proba(x.row(i)), b.predict_proba(x.row(i)));
        }
    }
}
