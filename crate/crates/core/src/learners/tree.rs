//! Binary classification trees and the two forest variants built on them:
//! bootstrap + exhaustive Gini splits (random forest) and full-sample +
//! random-threshold splits (extra trees).

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::features::DenseMatrix;
use crate::rng::{stream_rng, SubRng};

use super::{Classifier, LearnError};

/// How candidate split thresholds are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SplitRule {
    /// scan every cut point between distinct values, minimize weighted Gini
    BestGini,
    /// draw one uniform threshold per candidate feature
    RandomThreshold,
}

/// Number of features examined per node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CandidateCount {
    /// `round(sqrt(D))`
    Sqrt,
    Fixed(usize),
    All,
}

impl CandidateCount {
    fn resolve(self, dim: usize) -> usize {
        match self {
            CandidateCount::Sqrt => ((dim as f64).sqrt().round() as usize).clamp(1, dim),
            CandidateCount::Fixed(n) => n.clamp(1, dim),
            CandidateCount::All => dim,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub n_candidate_features: CandidateCount,
    pub split_rule: SplitRule,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: 24,
            min_samples_split: 2,
            n_candidate_features: CandidateCount::Sqrt,
            split_rule: SplitRule::BestGini,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
enum Node {
    Split {
        feature: u32,
        threshold: f64,
        left: u32,
        right: u32,
    },
    /// Laplace-smoothed probability of the positive class
    Leaf { p_pos: f64 },
}

/// A fitted decision tree stored as a flat node arena.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecisionTree {
    nodes: Vec<Node>,
}

impl DecisionTree {
    pub fn predict_proba(&self, row: &[f64]) -> f64 {
        let mut at = 0usize;
        loop {
            match &self.nodes[at] {
                Node::Leaf { p_pos } => return *p_pos,
                Node::Split {
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

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }
}

fn gini(pos: usize, total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let p = pos as f64 / total as f64;
    1.0 - p * p - (1.0 - p) * (1.0 - p)
}

/// Weighted Gini of a candidate split; lower is better.
fn split_score(pos_left: usize, n_left: usize, pos_total: usize, n_total: usize) -> f64 {
    let n_right = n_total - n_left;
    let pos_right = pos_total - pos_left;
    (n_left as f64 * gini(pos_left, n_left) + n_right as f64 * gini(pos_right, n_right))
        / n_total as f64
}

struct TreeBuilder<'a> {
    x: &'a DenseMatrix,
    y: &'a [u8],
    params: &'a TreeParams,
    nodes: Vec<Node>,
}

impl TreeBuilder<'_> {
    fn leaf(&mut self, pos: usize, n: usize) -> u32 {
        let p_pos = (pos as f64 + 1.0) / (n as f64 + 2.0);
        self.nodes.push(Node::Leaf { p_pos });
        (self.nodes.len() - 1) as u32
    }

    fn best_split_exhaustive(&self, rows: &[usize], feature: usize) -> Option<(f64, f64)> {
        let mut pairs: Vec<(f64, u8)> = rows
            .iter()
            .map(|&r| (self.x.get(r, feature), self.y[r]))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let n = pairs.len();
        let pos_total = pairs.iter().filter(|(_, y)| *y == 1).count();
        let mut best: Option<(f64, f64)> = None;
        let mut pos_left = 0usize;
        for i in 1..n {
            pos_left += usize::from(pairs[i - 1].1 == 1);
            if pairs[i].0 <= pairs[i - 1].0 {
                continue;
            }
            let score = split_score(pos_left, i, pos_total, n);
            if best.is_none_or(|(s, _)| score < s) {
                best = Some((score, (pairs[i - 1].0 + pairs[i].0) / 2.0));
            }
        }
        best
    }

    fn best_split_random(
        &self,
        rows: &[usize],
        feature: usize,
        rng: &mut SubRng,
    ) -> Option<(f64, f64)> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &r in rows {
            let v = self.x.get(r, feature);
            lo = lo.min(v);
            hi = hi.max(v);
        }
        // negated `<` so NaN feature values cannot produce a split
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(lo < hi) {
            return None;
        }
        let threshold = rng.gen_range(lo..hi);
        let n = rows.len();
        let pos_total = rows.iter().filter(|&&r| self.y[r] == 1).count();
        let mut n_left = 0usize;
        let mut pos_left = 0usize;
        for &r in rows {
            if self.x.get(r, feature) <= threshold {
                n_left += 1;
                pos_left += usize::from(self.y[r] == 1);
            }
        }
        if n_left == 0 || n_left == n {
            return None;
        }
        Some((split_score(pos_left, n_left, pos_total, n), threshold))
    }

    fn grow(&mut self, rows: Vec<usize>, depth: usize, rng: &mut SubRng) -> u32 {
        let n = rows.len();
        let pos = rows.iter().filter(|&&r| self.y[r] == 1).count();
        if depth >= self.params.max_depth
            || n < self.params.min_samples_split
            || pos == 0
            || pos == n
        {
            return self.leaf(pos, n);
        }

        let dim = self.x.n_cols();
        let n_candidates = self.params.n_candidate_features.resolve(dim);
        let candidates: Vec<usize> = if n_candidates == dim {
            (0..dim).collect()
        } else {
            rand::seq::index::sample(rng, dim, n_candidates).into_vec()
        };

        let mut best: Option<(f64, usize, f64)> = None;
        for &feature in &candidates {
            let found = match self.params.split_rule {
                SplitRule::BestGini => self.best_split_exhaustive(&rows, feature),
                SplitRule::RandomThreshold => self.best_split_random(&rows, feature, rng),
            };
            if let Some((score, threshold)) = found {
                if best.is_none_or(|(s, _, _)| score < s) {
                    best = Some((score, feature, threshold));
                }
            }
        }
        let Some((_, feature, threshold)) = best else {
            return self.leaf(pos, n);
        };

        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
            .into_iter()
            .partition(|&r| self.x.get(r, feature) <= threshold);
        if left_rows.is_empty() || right_rows.is_empty() {
            return self.leaf(pos, n);
        }

        let at = self.nodes.len() as u32;
        self.nodes.push(Node::Leaf { p_pos: 0.0 }); // placeholder
        let left = self.grow(left_rows, depth + 1, rng);
        let right = self.grow(right_rows, depth + 1, rng);
        self.nodes[at as usize] = Node::Split {
            feature: feature as u32,
            threshold,
            left,
            right,
        };
        at
    }
}

/// Train one tree on the given rows (duplicates allowed, as produced by a
/// bootstrap draw).
pub fn train_tree(
    x: &DenseMatrix,
    y: &[u8],
    rows: Vec<usize>,
    params: &TreeParams,
    rng: &mut SubRng,
) -> Result<DecisionTree, LearnError> {
    if rows.is_empty() || x.n_rows() == 0 {
        return Err(LearnError::EmptyInput);
    }
    let mut builder = TreeBuilder {
        x,
        y,
        params,
        nodes: Vec::new(),
    };
    let root = builder.grow(rows, 0, rng);
    debug_assert_eq!(root, 0);
    Ok(DecisionTree {
        nodes: builder.nodes,
    })
}

/// A bagged ensemble of decision trees; probability is the mean of the tree
/// probabilities.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<DecisionTree>,
    pub bootstrap: bool,
    pub n_estimators: usize,
    pub seed: u64,
}

impl Classifier for ForestModel {
    fn predict_proba(&self, row: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict_proba(row)).sum();
        sum / self.trees.len() as f64
    }
}

fn train_forest(
    x: &DenseMatrix,
    y: &[u8],
    n_estimators: usize,
    params: &TreeParams,
    bootstrap: bool,
    seed: u64,
) -> Result<ForestModel, LearnError> {
    if x.n_rows() == 0 || n_estimators == 0 {
        return Err(LearnError::EmptyInput);
    }
    let trees = (0..n_estimators)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, "forest_tree", &[i as u64]);
            let rows: Vec<usize> = if bootstrap {
                (0..x.n_rows()).map(|_| rng.gen_range(0..x.n_rows())).collect()
            } else {
                let mut all: Vec<usize> = (0..x.n_rows()).collect();
                // shuffle so equal-score split ties do not repeat identically
                all.shuffle(&mut rng);
                all
            };
            train_tree(x, y, rows, params, &mut rng)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ForestModel {
        trees,
        bootstrap,
        n_estimators,
        seed,
    })
}

/// Extra trees: no bootstrap, random thresholds.
pub fn train_extra_trees(
    x: &DenseMatrix,
    y: &[u8],
    n_estimators: usize,
    params: &TreeParams,
    seed: u64,
) -> Result<ForestModel, LearnError> {
    let params = TreeParams {
        split_rule: SplitRule::RandomThreshold,
        ..params.clone()
    };
    train_forest(x, y, n_estimators, &params, false, seed)
}

/// Random forest: bootstrap sample per tree, exhaustive Gini splits.
pub fn train_random_forest(
    x: &DenseMatrix,
    y: &[u8],
    n_estimators: usize,
    params: &TreeParams,
    seed: u64,
) -> Result<ForestModel, LearnError> {
    let params = TreeParams {
        split_rule: SplitRule::BestGini,
        ..params.clone()
    };
    train_forest(x, y, n_estimators, &params, true, seed)
}
