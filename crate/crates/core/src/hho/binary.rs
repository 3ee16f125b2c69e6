//! Binary wrapper around the continuous HHO core: sigmoid transfer from
//! positions to feature masks, the wrapper fitness
//! `alpha * error + (1 - alpha) * |mask| / D`, and the end-to-end feature
//! selection routine.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Mutex;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Label;
use crate::features::FeatureMatrix;
use crate::rng::{stream_rng, SubRng};

use super::{minimize, HhoError, HhoParams, Objective};

#[derive(Debug, Error)]
pub enum SelectionError {
    #[error(transparent)]
    Hho(#[from] HhoError),
    #[error("mask dimension {0} does not match matrix columns {1}")]
    DimMismatch(usize, usize),
    #[error("labels and rows disagree: {0} vs {1}")]
    Misaligned(usize, usize),
    #[error("training partition is single-class; fitness is undefined")]
    SingleClass,
    #[error("mask io error at {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed mask file {0}")]
    MalformedMask(String),
}

/// Boolean column selector; never empty (the repair rule forces at least one
/// bit on).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureMask {
    bits: Vec<bool>,
    selected_count: usize,
}

impl FeatureMask {
    pub fn new(bits: Vec<bool>) -> FeatureMask {
        let selected_count = bits.iter().filter(|&&b| b).count();
        FeatureMask {
            bits,
            selected_count,
        }
    }

    pub fn all_selected(dim: usize) -> FeatureMask {
        FeatureMask {
            bits: vec![true; dim],
            selected_count: dim,
        }
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn dim(&self) -> usize {
        self.bits.len()
    }

    pub fn selected_count(&self) -> usize {
        self.selected_count
    }

    pub fn selected_columns(&self) -> Vec<usize> {
        self.bits
            .iter()
            .enumerate()
            .filter_map(|(ix, &b)| b.then_some(ix))
            .collect()
    }

    pub fn reduction_ratio(&self) -> f64 {
        if self.bits.is_empty() {
            return 0.0;
        }
        1.0 - self.selected_count as f64 / self.bits.len() as f64
    }

    /// Persist as a text file: first line the dimension, second line one
    /// '0'/'1' character per column.
    pub fn save(&self, path: &Path) -> Result<(), SelectionError> {
        let mut out = String::with_capacity(self.bits.len() + 16);
        writeln!(out, "{}", self.bits.len()).expect("write to string");
        for &b in &self.bits {
            out.push(if b { '1' } else { '0' });
        }
        out.push('\n');
        std::fs::write(path, out).map_err(|source| SelectionError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<FeatureMask, SelectionError> {
        let raw = std::fs::read_to_string(path).map_err(|source| SelectionError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let bad = || SelectionError::MalformedMask(path.display().to_string());
        let mut lines = raw.lines();
        let dim: usize = lines.next().ok_or_else(bad)?.trim().parse().map_err(|_| bad())?;
        let bits_line = lines.next().ok_or_else(bad)?.trim();
        if bits_line.len() != dim {
            return Err(bad());
        }
        let bits = bits_line
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(bad()),
            })
            .collect::<Result<Vec<bool>, _>>()?;
        Ok(FeatureMask::new(bits))
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Transfer a continuous position to a mask: bit j switches on when a uniform
/// draw falls below `sigmoid(x_j)`. An all-zero outcome is repaired by
/// forcing the highest-probability bit on.
pub fn binarize(position: &[f64], rng: &mut SubRng) -> FeatureMask {
    let mut bits: Vec<bool> = position
        .iter()
        .map(|&x| rng.gen::<f64>() < sigmoid(x))
        .collect();
    if !bits.iter().any(|&b| b) && !bits.is_empty() {
        let argmax = position
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
            .map(|(ix, _)| ix)
            .unwrap_or(0);
        bits[argmax] = true;
    }
    FeatureMask::new(bits)
}

/// Scores the held-out error of a classifier trained on the masked columns.
pub trait SubsetEvaluator: Send + Sync {
    fn error_rate(
        &self,
        x: &FeatureMatrix,
        y: &[Label],
        train_rows: &[usize],
        val_rows: &[usize],
        mask: &FeatureMask,
        rng: &mut SubRng,
    ) -> f64;
}

/// k-nearest-neighbors over the selected columns; the wrapper default.
#[derive(Debug, Clone)]
pub struct KnnEvaluator {
    pub k: usize,
}

impl Default for KnnEvaluator {
    fn default() -> Self {
        KnnEvaluator { k: 5 }
    }
}

impl SubsetEvaluator for KnnEvaluator {
    fn error_rate(
        &self,
        x: &FeatureMatrix,
        y: &[Label],
        train_rows: &[usize],
        val_rows: &[usize],
        mask: &FeatureMask,
        _rng: &mut SubRng,
    ) -> f64 {
        let k = self.k.min(train_rows.len());

        // project each row once through the mask so the distance loop never
        // touches unselected columns; validation rows go dense so the pair
        // cost is one sparse dot against the training row
        let mut remap = vec![u32::MAX; mask.dim()];
        let mut n_selected = 0u32;
        for (ix, &bit) in mask.bits().iter().enumerate() {
            if bit {
                remap[ix] = n_selected;
                n_selected += 1;
            }
        }
        let project = |row: usize| -> (Vec<u32>, Vec<f64>, f64) {
            let (cols, values) = x.row(row);
            let mut pc = Vec::with_capacity(cols.len());
            let mut pv = Vec::with_capacity(cols.len());
            let mut norm_sq = 0.0;
            for (c, v) in cols.iter().zip(values) {
                let mapped = remap[*c as usize];
                if mapped != u32::MAX {
                    pc.push(mapped);
                    pv.push(*v);
                    norm_sq += v * v;
                }
            }
            (pc, pv, norm_sq)
        };
        let train: Vec<(Vec<u32>, Vec<f64>, f64)> =
            train_rows.iter().map(|&r| project(r)).collect();

        let errors: usize = val_rows
            .par_iter()
            .map(|&v| {
                let (vc, vv, v_norm) = project(v);
                let mut dense = vec![0.0f64; n_selected as usize];
                for (c, value) in vc.iter().zip(&vv) {
                    dense[*c as usize] = *value;
                }
                let mut nearest: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
                for (slot, (tc, tv, t_norm)) in train.iter().enumerate() {
                    let mut dot = 0.0;
                    for (c, value) in tc.iter().zip(tv) {
                        dot += dense[*c as usize] * value;
                    }
                    let d = (v_norm + t_norm - 2.0 * dot).max(0.0);
                    // ties resolved by training slot for determinism
                    let pos = nearest
                        .binary_search_by(|probe| probe.0.total_cmp(&d).then(probe.1.cmp(&slot)))
                        .unwrap_or_else(|p| p);
                    if pos < k {
                        nearest.insert(pos, (d, slot));
                        nearest.truncate(k);
                    }
                }
                let votes_cg = nearest
                    .iter()
                    .filter(|(_, slot)| y[train_rows[*slot]] == Label::Cg)
                    .count();
                let predicted = if votes_cg * 2 > nearest.len() {
                    Label::Cg
                } else {
                    Label::Or
                };
                usize::from(predicted != y[v])
            })
            .sum();
        errors as f64 / val_rows.len().max(1) as f64
    }
}

/// Wrapper fitness parameters.
pub struct FitnessParams {
    /// weight of the error term; the remainder weighs the subset size
    pub alpha: f64,
    /// stratified fraction of the (subsampled) rows held out for validation
    pub holdout_fraction: f64,
    /// cap on rows used for fitness evaluation
    pub max_rows: usize,
    pub evaluator: Box<dyn SubsetEvaluator>,
}

impl Default for FitnessParams {
    fn default() -> Self {
        FitnessParams {
            alpha: 0.99,
            holdout_fraction: 0.2,
            max_rows: 2_000,
            evaluator: Box::new(KnnEvaluator::default()),
        }
    }
}

/// The wrapper fitness with its validation split frozen for one optimizer
/// run.
pub struct SubsetFitness<'a> {
    x: &'a FeatureMatrix,
    y: &'a [Label],
    train_rows: Vec<usize>,
    val_rows: Vec<usize>,
    params: &'a FitnessParams,
}

impl<'a> SubsetFitness<'a> {
    /// Freeze a stratified subsample and holdout split derived from `seed`.
    pub fn new(
        x: &'a FeatureMatrix,
        y: &'a [Label],
        params: &'a FitnessParams,
        seed: u64,
    ) -> Result<SubsetFitness<'a>, SelectionError> {
        if x.n_rows() != y.len() {
            return Err(SelectionError::Misaligned(x.n_rows(), y.len()));
        }
        let mut by_class: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
        for (ix, &label) in y.iter().enumerate() {
            by_class[usize::from(label == Label::Cg)].push(ix);
        }
        if by_class.iter().any(|c| c.len() < 2) {
            return Err(SelectionError::SingleClass);
        }

        let total: usize = y.len();
        let keep_fraction = (params.max_rows as f64 / total as f64).min(1.0);
        let mut train_rows = Vec::new();
        let mut val_rows = Vec::new();
        for (class_ix, members) in by_class.iter().enumerate() {
            let mut members = members.clone();
            use rand::seq::SliceRandom;
            let mut rng = stream_rng(seed, "fitness_subsample", &[class_ix as u64]);
            members.shuffle(&mut rng);
            let keep = ((members.len() as f64 * keep_fraction).round() as usize)
                .clamp(2, members.len());
            let kept = &members[..keep];
            let n_val = ((kept.len() as f64 * params.holdout_fraction).round() as usize)
                .clamp(1, kept.len() - 1);
            val_rows.extend_from_slice(&kept[..n_val]);
            train_rows.extend_from_slice(&kept[n_val..]);
        }
        train_rows.sort_unstable();
        val_rows.sort_unstable();
        Ok(SubsetFitness {
            x,
            y,
            train_rows,
            val_rows,
            params,
        })
    }

    /// `alpha * error + (1 - alpha) * selected/D` for one mask.
    pub fn eval_mask(&self, mask: &FeatureMask, rng: &mut SubRng) -> f64 {
        debug_assert_eq!(mask.dim(), self.x.n_cols());
        let error = self.params.evaluator.error_rate(
            self.x,
            self.y,
            &self.train_rows,
            &self.val_rows,
            mask,
            rng,
        );
        let size_ratio = mask.selected_count() as f64 / mask.dim().max(1) as f64;
        self.params.alpha * error + (1.0 - self.params.alpha) * size_ratio
    }

    pub fn validation_rows(&self) -> &[usize] {
        &self.val_rows
    }

    pub fn training_rows(&self) -> &[usize] {
        &self.train_rows
    }
}

struct MaskObjective<'a> {
    fitness: &'a SubsetFitness<'a>,
    best: Mutex<(f64, Option<FeatureMask>)>,
}

impl Objective for MaskObjective<'_> {
    fn eval(&self, x: &[f64], rng: &mut SubRng) -> f64 {
        let mask = binarize(x, rng);
        let value = self.fitness.eval_mask(&mask, rng);
        let mut best = self.best.lock().expect("mask tracker");
        // equal-fitness ties break on the mask bits so the tracked winner
        // does not depend on which parallel evaluation finished first
        let replace = match &best.1 {
            None => true,
            Some(current) => {
                value < best.0 || (value == best.0 && mask.bits() < current.bits())
            }
        };
        if replace {
            *best = (value, Some(mask));
        }
        value
    }
}

/// Result of a feature-selection run.
#[derive(Debug, Clone)]
pub struct SelectionResult {
    pub mask: FeatureMask,
    pub best_fitness: f64,
    /// best wrapper fitness after each iteration
    pub history: Vec<f64>,
}

impl SelectionResult {
    /// Two-column `iteration<TAB>best_fitness` export for plotting.
    pub fn history_tsv(&self) -> String {
        let mut out = String::from("iteration\tbest_fitness\n");
        for (ix, f) in self.history.iter().enumerate() {
            writeln!(out, "{}\t{f}", ix + 1).expect("write to string");
        }
        out
    }
}

/// Select feature columns by binary HHO: positions live in the given bounds,
/// masks come from sigmoid binarization with per-hawk frozen draws per
/// iteration, and the returned mask is the best ever evaluated.
pub fn select_features(
    x: &FeatureMatrix,
    y: &[Label],
    hho: &HhoParams,
    fitness_params: &FitnessParams,
) -> Result<SelectionResult, SelectionError> {
    let dim = x.n_cols();
    let fitness = SubsetFitness::new(x, y, fitness_params, hho.seed)?;
    let objective = MaskObjective {
        fitness: &fitness,
        best: Mutex::new((f64::INFINITY, None)),
    };
    let result = minimize(&objective, dim, hho)?;
    let (best_fitness, mask) = objective.best.into_inner().expect("mask tracker");
    let mask = mask.expect("at least one evaluation happened");
    Ok(SelectionResult {
        mask,
        best_fitness,
        history: result.history,
    })
}
